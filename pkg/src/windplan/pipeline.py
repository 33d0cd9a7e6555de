"""End-to-end command pipelines: wind solve, plan, compare, evaluate.

Every command is a deterministic function of the scenario file and its
flags, so artifact bytes repeat across identical runs. The manifest
records stage timings and the file inventory; it is the only artifact
whose bytes legitimately differ between two identical invocations.
"""
from __future__ import annotations

import hashlib
import json
import time
from contextlib import contextmanager
from dataclasses import dataclass, field as dfield, replace
from pathlib import Path

import numpy as np

from .bezier import (
    BezierTrajectory,
    CostContext,
    DragModel,
    ObjectiveWeights,
    OptimizeResult,
    init_from_path,
    optimize,
    write_control_csv,
    write_trajectory_csv,
)
from .costmap import CostMap, build_costmap, write_costmap_csv
from .env import (
    OccupancyGrid,
    PipelineParams,
    Scenario,
    dilate_obstacles,
    load_scenario,
)
from .errors import ParseError, ValidationError
from .flightsim import DroneModel, FlightLog, detect_collision, simulate_flight, write_log_csv
from .lbm import WindField, build_lattice, read_field_csv, run_steady, write_field_csv, write_field_vtk
from .metrics import (
    ComparisonReport,
    aggregate_reports,
    build_comparison,
    deviation_series,
    displacement,
    report_from_log,
    write_comparison_json,
    write_metrics_csv,
)
from .planner import GridPath, astar, select_variant, write_path_csv

MODES = ("base", "wespr")
STAGES = ("load", "simulate", "plan", "optimize", "replay", "metrics")

_FMT = "%.17g"


def scenario_hash(scenario: Scenario) -> str:
    """Short content hash of the canonical scenario document."""
    blob = json.dumps(scenario.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


class StageTimer:
    """Wall-clock seconds accumulated per pipeline stage."""

    def __init__(self):
        self.durations = {name: 0.0 for name in STAGES}

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.durations[name] += time.perf_counter() - t0


@dataclass
class RunManifest:
    command: str
    scenario: str
    scenario_hash: str
    params: dict
    flags: dict
    durations_s: dict
    files: list
    extra: dict = dfield(default_factory=dict)

    def __post_init__(self):
        for name, seconds in self.durations_s.items():
            if seconds < 0:
                raise ValidationError(f"manifest.durations_s.{name}", "must be non-negative")

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "scenario": self.scenario,
            "scenario_hash": self.scenario_hash,
            "flags": self.flags,
            "params": self.params,
            "durations_s": self.durations_s,
            "files": self.files,
            **self.extra,
        }

    def write(self, out: str | Path) -> None:
        Path(out).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def load_with_overrides(path: str | Path, overrides: dict | None = None) -> Scenario:
    """Load a scenario, replacing named pipeline parameters."""
    scenario = load_scenario(path)
    if not overrides:
        return scenario
    data = scenario.params.to_dict()
    for key, value in overrides.items():
        if key not in data:
            raise ParseError(f"unknown parameter {key!r}")
        data[key] = value
    params = PipelineParams.from_dict(data)
    params.validate()
    return replace(scenario, params=params)


def solve_field(scenario: Scenario) -> WindField:
    p = scenario.params
    lattice = build_lattice(
        scenario.grid,
        scenario.sources,
        re=p.re,
        u_lat_max=p.u_lat_max,
        ref_length_cells=p.ref_length_cells,
        anchor_factor=p.anchor_factor,
    )
    return run_steady(lattice, p.n_steps, conv_tol=p.conv_tol, conv_interval=p.conv_interval)


def zero_field(grid: OccupancyGrid) -> WindField:
    """Calm-air stand-in with the scenario's geometry."""
    shape = (grid.height, grid.width)
    return WindField(
        grid.width, grid.height, grid.cell_size,
        np.zeros(shape), np.zeros(shape), wall_mask=grid.solid.copy(),
    )


@dataclass
class PlanResult:
    """Everything the routing and refinement stages produced for one mode."""

    mode: str
    flow_aware: bool
    against_flow: bool
    costmap: CostMap
    path: GridPath
    path_xy: np.ndarray
    initial: BezierTrajectory
    refined: OptimizeResult


def plan_mode(
    scenario: Scenario,
    field: WindField,
    mode: str,
    timer: StageTimer | None = None,
    flow_aware: bool | None = None,
) -> PlanResult:
    """Route and refine in one mode.

    base mode routes on the uniform-cost map and drops the wind-effort
    objective term; wespr uses the full wind-aware stack. `flow_aware`
    overrides just the cost-map part (wind-blind routing ablation).
    """
    if mode not in MODES:
        raise ParseError(f"unknown mode {mode!r}; expected one of {MODES}")
    p = scenario.params
    timer = timer or StageTimer()
    flow = (mode == "wespr") if flow_aware is None else flow_aware

    with timer.stage("plan"):
        planning = dilate_obstacles(scenario.grid, p.b)
        cm = build_costmap(
            field if flow else None, planning, scenario.start, scenario.goal, p,
            flow_aware=flow,
        )
        against = select_variant(cm.mean_alignment) if flow else False
        path = astar(
            cm,
            planning.cell_of(*scenario.start),
            planning.cell_of(*scenario.goal),
            against_flow=against,
        )
        path_xy = path.points(scenario.grid.cell_size)

    with timer.stage("optimize"):
        initial, bounds = init_from_path(
            path_xy, scenario.start, scenario.goal, p.bezier_degree,
            p.cruise_speed, p.box_halfwidth_cells * scenario.grid.cell_size,
        )
        weights = ObjectiveWeights(
            lambda_p=p.lambda_p,
            lambda_s=p.lambda_s,
            lambda_t=p.lambda_t if mode == "wespr" else 0.0,
            lambda_w=p.lambda_w,
        )
        context = CostContext(
            path_xy=path_xy,
            field=field if mode == "wespr" else None,
            cm=cm,
            drag=DragModel(mass=p.mass, drag_gain=p.drag_gain),
            n_samples=p.quad_samples,
        )
        refined = optimize(
            initial, weights, bounds, context,
            tol=p.bcd_tol, max_sweeps=p.bcd_max_sweeps,
        )

    return PlanResult(
        mode=mode,
        flow_aware=flow,
        against_flow=against,
        costmap=cm,
        path=path,
        path_xy=path_xy,
        initial=initial,
        refined=refined,
    )


def replay(
    scenario: Scenario,
    reference,
    field: WindField | None,
    *,
    noise_std: float = 0.0,
    seed: int = 0,
) -> tuple[FlightLog, bool, int | None]:
    """Fly the reference and check the track against the raw obstacle set."""
    p = scenario.params
    drone = DroneModel(mass=p.mass, drag_gain=p.drag_gain, a_max=p.a_max, dt=p.sim_dt)
    log = simulate_flight(
        reference, field, scenario.grid, drone, (p.kp, p.kd),
        noise_std=noise_std, seed=seed,
    )
    hit, index = detect_collision(log, scenario.grid)
    return log, hit, index


def _prepare(out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_plan_artifacts(out: Path, suffix: str, result: PlanResult) -> list[str]:
    def name(stem: str) -> str:
        return f"{stem}_{suffix}.csv" if suffix else f"{stem}.csv"

    files = []
    write_costmap_csv(result.costmap, out / name("costmap"))
    files.append(name("costmap"))
    write_path_csv(result.path, result.costmap, out / name("path"))
    files.append(name("path"))
    write_control_csv(result.refined.trajectory, out / name("control"))
    files.append(name("control"))
    write_trajectory_csv(result.refined.trajectory, out / name("trajectory"))
    files.append(name("trajectory"))
    return files


def run_simulate_wind(
    scenario_path: str | Path,
    out_dir: str | Path,
    *,
    overrides: dict | None = None,
) -> RunManifest:
    out = _prepare(out_dir)
    timer = StageTimer()
    with timer.stage("load"):
        scenario = load_with_overrides(scenario_path, overrides)
    with timer.stage("simulate"):
        field = solve_field(scenario)

    write_field_csv(field, out / "field.csv")
    write_field_vtk(field, out / "field.vtk")
    manifest = RunManifest(
        command="simulate-wind",
        scenario=scenario.name,
        scenario_hash=scenario_hash(scenario),
        params=scenario.params.to_dict(),
        flags={},
        durations_s=timer.durations,
        files=["field.csv", "field.vtk"],
        extra={"converged": field.converged, "steps_run": field.steps_run},
    )
    manifest.write(out / "manifest.json")
    return manifest


def run_plan(
    scenario_path: str | Path,
    mode: str,
    out_dir: str | Path,
    *,
    field_path: str | Path | None = None,
    flow_aware: bool | None = None,
    overrides: dict | None = None,
) -> RunManifest:
    out = _prepare(out_dir)
    timer = StageTimer()
    with timer.stage("load"):
        scenario = load_with_overrides(scenario_path, overrides)
    with timer.stage("simulate"):
        field = read_field_csv(field_path) if field_path else solve_field(scenario)
    result = plan_mode(scenario, field, mode, timer, flow_aware=flow_aware)

    files = _write_plan_artifacts(out, "", result)
    manifest = RunManifest(
        command="plan",
        scenario=scenario.name,
        scenario_hash=scenario_hash(scenario),
        params=scenario.params.to_dict(),
        flags={
            "mode": mode,
            "flow_aware": result.flow_aware,
            "precomputed_field": field_path is not None,
        },
        durations_s=timer.durations,
        files=sorted(files),
        extra={
            "against_flow": result.against_flow,
            "converged": field.converged,
            "bcd_sweeps": result.refined.sweeps,
            "bcd_converged": result.refined.converged,
        },
    )
    manifest.write(out / "manifest.json")
    return manifest


def run_compare(
    scenario_path: str | Path,
    trials: int,
    out_dir: str | Path,
    *,
    noise_std: float | None = None,
    seed: int = 0,
    flow_aware: bool | None = None,
    overrides: dict | None = None,
) -> tuple[RunManifest, ComparisonReport]:
    if trials < 1:
        raise ValidationError("trials", "must be at least 1")
    out = _prepare(out_dir)
    (out / "logs").mkdir(exist_ok=True)
    timer = StageTimer()
    with timer.stage("load"):
        scenario = load_with_overrides(scenario_path, overrides)
    noise = scenario.params.noise_std if noise_std is None else noise_std
    with timer.stage("simulate"):
        field = solve_field(scenario)

    plans = {
        mode: plan_mode(
            scenario, field, mode, timer,
            flow_aware=flow_aware if mode == "wespr" else None,
        )
        for mode in MODES
    }

    files: list[str] = []
    for mode in MODES:
        files += _write_plan_artifacts(out, mode, plans[mode])

    sh = scenario_hash(scenario)
    logs: dict[tuple[str, str, int], tuple[FlightLog, bool, int | None]] = {}
    with timer.stage("replay"):
        for mode in MODES:
            for wtag, fld in (("wind", field), ("calm", None)):
                for k in range(trials):
                    log, hit, index = replay(
                        scenario, plans[mode].refined.trajectory, fld,
                        noise_std=noise, seed=seed + k,
                    )
                    log.meta["scenario"] = sh
                    rel = f"logs/log_{mode}_{wtag}_t{k}.csv"
                    write_log_csv(log, out / rel)
                    files.append(rel)
                    logs[(mode, wtag, k)] = (log, hit, index)

    with timer.stage("metrics"):
        rows = []
        aggregated = {}
        for mode in MODES:
            for wtag in ("wind", "calm"):
                per_trial = []
                for k in range(trials):
                    log, hit, index = logs[(mode, wtag, k)]
                    rep = report_from_log(
                        log, f"{mode}-{wtag}-t{k}",
                        collided=hit, collision_index=index,
                        plan_xy=plans[mode].path_xy,
                    )
                    per_trial.append(rep)
                    rows.append(
                        {"env": scenario.name, "planner": mode, "wind": wtag, "trial": k}
                        | rep.to_dict()
                    )
                aggregated[(mode, wtag)] = aggregate_reports(per_trial, f"{mode}-{wtag}")
        displacements = {
            mode: float(np.mean([
                displacement(logs[(mode, "wind", k)][0], logs[(mode, "calm", k)][0])
                for k in range(trials)
            ]))
            for mode in MODES
        }
        comparison = build_comparison(scenario.name, aggregated, displacements, trials)

    write_metrics_csv(rows, out / "metrics.csv")
    files.append("metrics.csv")
    payload = {
        "scenario": scenario.name,
        "scenario_hash": sh,
        "trials": trials,
        "noise_std": noise,
        "seed": seed,
        "per_trial": rows,
        "aggregate": {f"{m}_{w}": aggregated[(m, w)].to_dict() for m, w in aggregated},
    }
    (out / "metrics.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    files.append("metrics.json")
    write_comparison_json(comparison, out / "comparison.json")
    files.append("comparison.json")
    for mode in MODES:
        rel = f"deviation_{mode}.csv"
        _write_deviation_csv(
            out / rel,
            logs[(mode, "wind", 0)][0],
            logs[(mode, "calm", 0)][0],
        )
        files.append(rel)

    manifest = RunManifest(
        command="compare",
        scenario=scenario.name,
        scenario_hash=sh,
        params=scenario.params.to_dict(),
        flags={
            "trials": trials,
            "seed": seed,
            "noise_std": noise,
            "flow_aware": plans["wespr"].flow_aware,
        },
        durations_s=timer.durations,
        files=sorted(files),
        extra={
            "against_flow": plans["wespr"].against_flow,
            "converged": field.converged,
        },
    )
    manifest.write(out / "manifest.json")
    return manifest, comparison


def _write_deviation_csv(out: Path, wind_log: FlightLog, calm_log: FlightLog) -> None:
    """Tracking-error series for the first trial, one line per sample."""
    t, dev_wind = deviation_series(wind_log)
    _, dev_calm = deviation_series(calm_log)
    n = min(len(dev_wind), len(dev_calm))
    lines = ["t,dev_wind,dev_calm"]
    for k in range(n):
        lines.append(",".join(_FMT % v for v in (t[k], dev_wind[k], dev_calm[k])))
    out.write_text("\n".join(lines) + "\n")


def run_evaluate(
    log_paths: list[str | Path],
    out_dir: str | Path | None = None,
    *,
    scenario_path: str | Path | None = None,
) -> dict:
    """Score externally supplied flight logs; collision checks need the
    scenario for its obstacle set."""
    from .flightsim import read_log_csv

    if not log_paths:
        raise ValidationError("logs", "at least one log file is required")
    grid = load_scenario(scenario_path).grid if scenario_path else None
    rows = []
    reports = []
    logs = []
    for path in log_paths:
        log = read_log_csv(path)
        logs.append(log)
        hit, index = detect_collision(log, grid) if grid is not None else (False, None)
        rep = report_from_log(log, Path(path).stem, collided=hit, collision_index=index)
        reports.append(rep)
        rows.append(
            {
                "env": log.meta.get("scenario", "-"),
                "planner": Path(path).stem,
                "wind": "wind" if log.meta.get("wind") else "calm",
                "trial": 0,
            }
            | rep.to_dict()
        )
    payload: dict = {"reports": [r.to_dict() for r in reports]}
    if len(logs) == 2:
        payload["displacement_m"] = displacement(logs[0], logs[1])
    if out_dir is not None:
        out = _prepare(out_dir)
        (out / "metrics.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        write_metrics_csv(rows, out / "metrics.csv")
    return payload
