"""Command-line behavior: artifact production, flag wiring, exit codes for
each failure family, and run-to-run determinism."""
import json

import numpy as np
import pytest
from conftest import tiny_scenario_doc

from windplan import cli


@pytest.fixture(scope="module")
def cmp_run(tiny_scenario, tmp_path_factory):
    """One noise-free single-trial compare on the tiny scenario."""
    out = tmp_path_factory.mktemp("cli_cmp") / "run"
    rc = cli.main([
        "compare", str(tiny_scenario), "--trials", "1",
        "--noise-std", "0.0", "--out", str(out),
    ])
    assert rc == 0
    return out


def write_doc(tmp_path, doc, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


class TestSimulateWind:
    def test_artifacts_and_exit_code(self, tiny_scenario, tmp_path, capsys):
        rc = cli.main(["simulate-wind", str(tiny_scenario), "--out", str(tmp_path / "sim")])
        assert rc == 0
        for name in ("field.csv", "field.vtk", "manifest.json"):
            assert (tmp_path / "sim" / name).exists()
        stdout = capsys.readouterr().out
        assert "wrote:" in stdout and "stages:" in stdout

    def test_param_override_lands_in_manifest(self, tiny_scenario, tmp_path):
        out = tmp_path / "sim"
        rc = cli.main([
            "simulate-wind", str(tiny_scenario), "--out", str(out),
            "--params", "n_steps=650",
        ])
        assert rc == 0
        with open(out / "manifest.json") as fh:
            assert json.load(fh)["params"]["n_steps"] == 650


class TestExitCodes:
    def test_malformed_json_exits_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert cli.main(["plan", str(bad), "--out", str(tmp_path / "o")]) == 2

    def test_unknown_scenario_name_exits_2(self, tmp_path):
        rc = cli.main(["plan", "no-such-env", "--out", str(tmp_path / "o")])
        assert rc == 2

    def test_bad_params_format_exits_2(self, tiny_scenario, tmp_path):
        rc = cli.main([
            "plan", str(tiny_scenario), "--out", str(tmp_path / "o"),
            "--params", "n_steps",
        ])
        assert rc == 2

    def test_unknown_param_key_exits_2(self, tiny_scenario, tmp_path):
        rc = cli.main([
            "plan", str(tiny_scenario), "--out", str(tmp_path / "o"),
            "--params", "warp_factor=9",
        ])
        assert rc == 2

    def test_non_numeric_param_value_exits_3(self, tiny_scenario, tmp_path):
        rc = cli.main([
            "plan", str(tiny_scenario), "--out", str(tmp_path / "o"),
            "--params", "n_steps=abc",
        ])
        assert rc == 3

    def test_start_on_solid_exits_3(self, tmp_path):
        doc = tiny_scenario_doc()
        doc["start"] = [1.5, 1.2]  # inside the block
        path = write_doc(tmp_path, doc)
        assert cli.main(["plan", str(path), "--out", str(tmp_path / "o")]) == 3

    def test_walled_off_goal_exits_4(self, tmp_path):
        doc = tiny_scenario_doc(obstacle=False)
        # full-height wall between start and goal
        solid = np.zeros((48, 64), dtype=bool)
        solid[:, 44:46] = True
        from windplan.env import rle_encode

        doc["grid"]["solid"] = {"rle_rows": rle_encode(solid)}
        path = write_doc(tmp_path, doc)
        assert cli.main(["plan", str(path), "--out", str(tmp_path / "o")]) == 4

    def test_diverging_controller_exits_5(self, tiny_scenario, tmp_path):
        rc = cli.main([
            "compare", str(tiny_scenario), "--trials", "1",
            "--out", str(tmp_path / "o"),
            "--params", "kp=1000000.0", "--params", "a_max=1e9",
        ])
        assert rc == 5

    def test_thread_cap_must_be_positive_integer(self, tiny_scenario, tmp_path, monkeypatch):
        monkeypatch.setenv("WINDPLAN_THREADS", "abc")
        rc = cli.main(["simulate-wind", str(tiny_scenario), "--out", str(tmp_path / "a")])
        assert rc == 2
        monkeypatch.setenv("WINDPLAN_THREADS", "0")
        rc = cli.main(["simulate-wind", str(tiny_scenario), "--out", str(tmp_path / "b")])
        assert rc == 2
        monkeypatch.setenv("WINDPLAN_THREADS", "1")
        rc = cli.main(["simulate-wind", str(tiny_scenario), "--out", str(tmp_path / "c")])
        assert rc == 0


class TestPlan:
    def test_base_mode_flags(self, tiny_scenario, tmp_path):
        out = tmp_path / "plan"
        rc = cli.main(["plan", str(tiny_scenario), "--mode", "base", "--out", str(out)])
        assert rc == 0
        with open(out / "manifest.json") as fh:
            manifest = json.load(fh)
        assert manifest["flags"]["mode"] == "base"
        assert manifest["flags"]["flow_aware"] is False
        assert manifest["against_flow"] is False
        for name in ("costmap.csv", "path.csv", "control.csv", "trajectory.csv"):
            assert (out / name).exists()

    def test_no_flow_aware_flag(self, tiny_scenario, tmp_path):
        out = tmp_path / "plan"
        rc = cli.main([
            "plan", str(tiny_scenario), "--mode", "wespr",
            "--no-flow-aware", "--out", str(out),
        ])
        assert rc == 0
        with open(out / "manifest.json") as fh:
            assert json.load(fh)["flags"]["flow_aware"] is False

    def test_precomputed_field_gives_identical_plan(self, tiny_scenario, tmp_path):
        sim = tmp_path / "sim"
        assert cli.main(["simulate-wind", str(tiny_scenario), "--out", str(sim)]) == 0
        a = tmp_path / "with_field"
        b = tmp_path / "inline"
        assert cli.main([
            "plan", str(tiny_scenario), "--field", str(sim / "field.csv"),
            "--out", str(a),
        ]) == 0
        assert cli.main(["plan", str(tiny_scenario), "--out", str(b)]) == 0
        assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()
        assert (a / "path.csv").read_bytes() == (b / "path.csv").read_bytes()


class TestCompare:
    def test_zero_wind_scenario_has_zero_penalties(self, tiny_scenario_calm, tmp_path):
        out = tmp_path / "calm"
        rc = cli.main([
            "compare", str(tiny_scenario_calm), "--trials", "1",
            "--noise-std", "0.0", "--out", str(out),
        ])
        assert rc == 0
        with open(out / "comparison.json") as fh:
            report = json.load(fh)
        for planner in ("base", "wespr"):
            for row in report["penalties"][planner].values():
                assert row["penalty_pct"] == 0.0
        assert report["relative_reduction_pct"]["displacement"] is None

    def test_noise_free_trials_are_identical(self, tiny_scenario, tmp_path):
        out = tmp_path / "trials"
        rc = cli.main([
            "compare", str(tiny_scenario), "--trials", "5",
            "--noise-std", "0.0", "--out", str(out),
        ])
        assert rc == 0
        with open(out / "metrics.json") as fh:
            payload = json.load(fh)
        assert payload["trials"] == 5
        for planner in ("base", "wespr"):
            for wind in ("wind", "calm"):
                vals = {
                    r["max_dev"] for r in payload["per_trial"]
                    if r["planner"] == planner and r["wind"] == wind
                }
                assert len(vals) == 1  # bitwise identical across trials

    def test_rerun_is_byte_identical_except_timings(self, cmp_run, tiny_scenario, tmp_path):
        again = tmp_path / "again"
        rc = cli.main([
            "compare", str(tiny_scenario), "--trials", "1",
            "--noise-std", "0.0", "--out", str(again),
        ])
        assert rc == 0
        with open(cmp_run / "manifest.json") as fh:
            files = json.load(fh)["files"]
        for rel in files:
            a = (cmp_run / rel).read_bytes()
            b = (again / rel).read_bytes()
            assert a == b, rel
        with open(cmp_run / "manifest.json") as fh:
            m1 = json.load(fh)
        with open(again / "manifest.json") as fh:
            m2 = json.load(fh)
        m1.pop("durations_s")
        m2.pop("durations_s")
        assert m1 == m2


class TestEvaluateAndValidate:
    def test_evaluate_two_logs(self, cmp_run, tiny_scenario, tmp_path, capsys):
        logs = [
            str(cmp_run / "logs" / "log_wespr_wind_t0.csv"),
            str(cmp_run / "logs" / "log_wespr_calm_t0.csv"),
        ]
        out = tmp_path / "eval"
        rc = cli.main([
            "evaluate", *logs, "--scenario", str(tiny_scenario), "--out", str(out),
        ])
        assert rc == 0
        stdout = capsys.readouterr().out
        assert "displacement between the two logs" in stdout
        with open(out / "metrics.json") as fh:
            payload = json.load(fh)
        assert "displacement_m" in payload
        assert len(payload["reports"]) == 2

    def test_evaluate_missing_log_exits_2(self, tmp_path):
        rc = cli.main(["evaluate", str(tmp_path / "absent.csv")])
        assert rc == 2

    def test_validate_quick_passes(self, capsys):
        rc = cli.main(["validate", "--quick"])
        assert rc == 0
        stdout = capsys.readouterr().out
        assert "pass poiseuille_profile" in stdout
        assert "FAIL" not in stdout
