#!/usr/bin/env python3
"""Run the wind-on/wind-off comparison over the bundled scenarios.

Writes one artifact directory per scenario under --out and prints the
headline numbers (max-deviation penalty per mode, displacement reduction).
"""
import argparse
from pathlib import Path

from windplan import pipeline
from windplan.scenarios import BUNDLED, resolve_scenario_path


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("scenarios", nargs="*", default=list(BUNDLED),
                    help="scenario files or bundled names (default: all bundled)")
    ap.add_argument("--trials", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--noise-std", type=float, default=None)
    ap.add_argument("--out", default="compare_out")
    args = ap.parse_args()

    for name in args.scenarios or list(BUNDLED):
        path = resolve_scenario_path(name)
        out = Path(args.out) / path.stem
        manifest, report = pipeline.run_compare(
            path, args.trials, out, noise_std=args.noise_std, seed=args.seed,
        )
        print(f"== {manifest.scenario} ==")
        for planner in sorted(report.penalties):
            row = report.penalties[planner]["max_dev"]
            pen = "n/a" if row["penalty_pct"] is None else f"{row['penalty_pct']:+8.1f}%"
            print(f"  {planner:6s} max_dev calm {row['no_wind']:.4f}"
                  f" wind {row['wind']:.4f} penalty {pen}")
        reduction = report.relative_reduction_pct.get("displacement")
        if reduction is not None:
            print(f"  displacement reduction vs base: {reduction:+.1f}%")
        print(f"  artifacts: {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
