"""Command-line front end.

Subcommands map one-to-one onto the pipeline commands; every error family
exits with its own code (2 parse, 3 validation, 4 no-path, 5 numerical) so
shell callers can branch without scraping stderr. WINDPLAN_THREADS caps the
solver's thread count.
"""
from __future__ import annotations

import argparse
import os
import sys

from . import pipeline, validation
from .errors import ParseError, WindplanError
from .scenarios import BUNDLED, resolve_scenario_path


def _parse_value(raw: str):
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return raw


def _parse_overrides(pairs: list[str] | None) -> dict:
    overrides = {}
    for pair in pairs or []:
        key, sep, raw = pair.partition("=")
        if not sep or not key:
            raise ParseError(f"--params expects key=value, got {pair!r}")
        overrides[key] = _parse_value(raw)
    return overrides


def _apply_thread_cap() -> None:
    cap = os.environ.get("WINDPLAN_THREADS")
    if not cap:
        return
    try:
        requested = int(cap)
    except ValueError as exc:
        raise ParseError(f"WINDPLAN_THREADS must be an integer, got {cap!r}") from exc
    if requested < 1:
        raise ParseError("WINDPLAN_THREADS must be at least 1")
    import numba

    numba.set_num_threads(min(requested, numba.config.NUMBA_NUM_THREADS))


def _print_durations(manifest: pipeline.RunManifest) -> None:
    parts = [
        f"{name} {seconds:.2f}s"
        for name, seconds in manifest.durations_s.items()
        if seconds > 0.0005
    ]
    print("stages: " + ", ".join(parts))


def _cmd_simulate_wind(args) -> int:
    manifest = pipeline.run_simulate_wind(
        resolve_scenario_path(args.scenario), args.out,
        overrides=_parse_overrides(args.params),
    )
    status = "converged" if manifest.extra["converged"] else "not converged"
    print(f"{manifest.scenario}: {status} after {manifest.extra['steps_run']} steps")
    print("wrote: " + ", ".join(manifest.files))
    _print_durations(manifest)
    return 0


def _cmd_plan(args) -> int:
    manifest = pipeline.run_plan(
        resolve_scenario_path(args.scenario), args.mode, args.out,
        field_path=args.field,
        flow_aware=False if args.no_flow_aware else None,
        overrides=_parse_overrides(args.params),
    )
    extra = manifest.extra
    print(
        f"{manifest.scenario}: mode={args.mode}"
        f" against_flow={extra['against_flow']}"
        f" bcd_sweeps={extra['bcd_sweeps']}"
    )
    print("wrote: " + ", ".join(manifest.files))
    _print_durations(manifest)
    return 0


def _cmd_compare(args) -> int:
    manifest, report = pipeline.run_compare(
        resolve_scenario_path(args.scenario), args.trials, args.out,
        noise_std=args.noise_std,
        seed=args.seed,
        flow_aware=False if args.no_flow_aware else None,
        overrides=_parse_overrides(args.params),
    )
    print(f"{manifest.scenario}: {args.trials} trial(s) per (mode, wind) cell")
    for planner, rows in sorted(report.penalties.items()):
        for key in ("max_dev", "mean_jerk"):
            row = rows[key]
            pen = "n/a" if row["penalty_pct"] is None else f"{row['penalty_pct']:+.1f}%"
            print(
                f"  {planner:6s} {key:10s} calm {row['no_wind']:.4f}"
                f" wind {row['wind']:.4f} penalty {pen}"
            )
    for planner, delta in sorted(report.displacement_m.items()):
        print(f"  {planner:6s} wind displacement {delta:.4f} m")
    reduction = report.relative_reduction_pct.get("displacement")
    if reduction is not None:
        print(f"  displacement reduction vs base: {reduction:.1f}%")
    _print_durations(manifest)
    return 0


def _cmd_evaluate(args) -> int:
    payload = pipeline.run_evaluate(
        args.logs, args.out, scenario_path=args.scenario and resolve_scenario_path(args.scenario),
    )
    for rep in payload["reports"]:
        print(
            f"{rep['label']}: max_dev {rep['max_dev']:.4f} m,"
            f" mean_jerk {rep['mean_jerk']:.3f} m/s^3,"
            f" length {rep['path_length']:.3f} m,"
            f" collided {rep['collided']}"
        )
    if "displacement_m" in payload:
        print(f"displacement between the two logs: {payload['displacement_m']:.4f} m")
    return 0


def _cmd_validate(args) -> int:
    results = validation.run_all(quick=args.quick)
    failed = False
    for res in results:
        mark = "pass" if res.passed else "FAIL"
        print(f"{mark} {res.name}: {res.value:.3e} (bound {res.bound:.1e}) {res.detail}")
        failed = failed or not res.passed
    return 5 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="windplan",
        description="Wind-aware planning pipeline: solve an indoor wind field, "
        "plan through it, and score replays against a wind-agnostic baseline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    scenario_help = (
        "scenario JSON path, or a bundled name: " + ", ".join(BUNDLED)
    )

    p = sub.add_parser("simulate-wind", help="solve the steady wind field")
    p.add_argument("scenario", help=scenario_help)
    p.add_argument("--out", default="windplan_out", help="output directory")
    p.add_argument("--params", action="append", metavar="K=V", help="parameter overrides")
    p.set_defaults(func=_cmd_simulate_wind)

    p = sub.add_parser("plan", help="plan and refine a trajectory")
    p.add_argument("scenario", help=scenario_help)
    p.add_argument("--mode", choices=pipeline.MODES, default="wespr")
    p.add_argument("--field", help="pre-solved field CSV (skips the wind stage)")
    p.add_argument(
        "--no-flow-aware", action="store_true",
        help="route on the uniform-cost map even in wespr mode",
    )
    p.add_argument("--out", default="windplan_out", help="output directory")
    p.add_argument("--params", action="append", metavar="K=V", help="parameter overrides")
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("compare", help="replay both modes with wind on and off")
    p.add_argument("scenario", help=scenario_help)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--noise-std", type=float, default=None,
        help="per-step velocity noise in m/s (default: scenario params)",
    )
    p.add_argument(
        "--no-flow-aware", action="store_true",
        help="route the wespr arm on the uniform-cost map (ablation)",
    )
    p.add_argument("--out", default="windplan_out", help="output directory")
    p.add_argument("--params", action="append", metavar="K=V", help="parameter overrides")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("evaluate", help="score externally supplied flight logs")
    p.add_argument("logs", nargs="+", help="flight-log CSV files")
    p.add_argument("--scenario", help="scenario for collision checks (optional)")
    p.add_argument("--out", default=None, help="optional output directory")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("validate", help="run the analytic solver checks")
    p.add_argument("--quick", action="store_true", help="smaller, faster variants")
    p.set_defaults(func=_cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _apply_thread_cap()
        return args.func(args)
    except WindplanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
