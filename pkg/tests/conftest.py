"""Shared fixtures: small synthetic scenarios plus the heavyweight session
artifacts (bundled-scenario plans and a full compare run) that several
modules assert against."""
import json
import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from windplan import pipeline
from windplan.env import load_scenario, rle_encode
from windplan.scenarios import BUNDLED, bundled_path

settings.register_profile(
    "suite", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("suite")

# one summary line per acceptance criterion, printed after the run
_CRITERIA: dict[str, tuple[bool, str]] = {}


def record_criterion(name: str, passed: bool, detail: str) -> None:
    _CRITERIA[name] = (passed, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("-", "acceptance summary")
    for name in sorted(_CRITERIA, key=lambda n: int(n.split("-")[1])):
        ok, detail = _CRITERIA[name]
        terminalreporter.write_line(f"{name} {'PASS' if ok else 'FAIL'}: {detail}")


def tiny_scenario_doc(obstacle: bool = True, sources: bool = True) -> dict:
    """A 64x48 arena at 5 cm cells that runs the whole pipeline in ~2 s."""
    width, height, cell = 64, 48, 0.05
    solid = np.zeros((height, width), dtype=bool)
    if obstacle:
        solid[18:30, 28:36] = True
    doc = {
        "name": "tiny",
        "grid": {
            "width": width,
            "height": height,
            "cell_size": cell,
            "solid": {"rle_rows": rle_encode(solid)},
        },
        "sources": [],
        "start": [0.4, 1.2],
        "goal": [2.8, 1.2],
        "params": {
            "n_steps": 600,
            "re": 100.0,
            "bezier_degree": 5,
            "quad_samples": 48,
            "bcd_max_sweeps": 10,
            "box_halfwidth_cells": 3.0,
            "b": 0.1,
            "cruise_speed": 0.5,
        },
    }
    if sources:
        doc["sources"] = [
            {"direction": [1.0, 0.0], "speed": 2.0, "side": "W", "start": 4, "length": 40}
        ]
    return doc


@pytest.fixture(scope="session")
def tiny_scenario(tmp_path_factory):
    """Path to the standard tiny scenario JSON."""
    path = tmp_path_factory.mktemp("tiny") / "tiny.json"
    path.write_text(json.dumps(tiny_scenario_doc()))
    return path


@pytest.fixture(scope="session")
def tiny_scenario_empty(tmp_path_factory):
    """Tiny arena without the obstacle block."""
    path = tmp_path_factory.mktemp("tiny_empty") / "tiny_empty.json"
    path.write_text(json.dumps(tiny_scenario_doc(obstacle=False)))
    return path


@pytest.fixture(scope="session")
def tiny_scenario_calm(tmp_path_factory):
    """Tiny arena with no wind sources at all."""
    path = tmp_path_factory.mktemp("tiny_calm") / "tiny_calm.json"
    path.write_text(json.dumps(tiny_scenario_doc(sources=False)))
    return path


@pytest.fixture(scope="session")
def bundled_plans():
    """Solve the wind field and run both planner modes for every bundled
    scenario. Expensive (three lattice solves), so shared session-wide."""
    out = {}
    for name in BUNDLED:
        scenario = load_scenario(bundled_path(name))
        field = pipeline.solve_field(scenario)
        plans = {
            mode: pipeline.plan_mode(scenario, field, mode) for mode in pipeline.MODES
        }
        out[name] = {"scenario": scenario, "field": field, "plans": plans}
    return out


@pytest.fixture(scope="session")
def crosswind_compare(tmp_path_factory):
    """One full compare run (single trial, noise off) on the crosswind
    scenario, with its wall-clock duration."""
    out_dir = tmp_path_factory.mktemp("crosswind_cmp")
    t0 = time.perf_counter()
    manifest, comparison = pipeline.run_compare(
        bundled_path("crosswind-corridor"), trials=1, out_dir=out_dir, noise_std=0.0, seed=0
    )
    elapsed = time.perf_counter() - t0
    return {
        "out_dir": out_dir,
        "manifest": manifest,
        "comparison": comparison,
        "elapsed": elapsed,
    }
