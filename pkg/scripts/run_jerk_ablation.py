#!/usr/bin/env python3
"""Smoothness ablation: replay the refined curve vs the raw grid path.

Flies both references through the same wind field with the same controller
and reports mean jerk, so the only difference is the reference geometry.
"""
import argparse

from windplan import metrics, pipeline
from windplan.flightsim import PolylineReference
from windplan.scenarios import resolve_scenario_path


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("scenario", nargs="?", default="crosswind-corridor",
                    help="scenario file or bundled name")
    ap.add_argument("--mode", choices=pipeline.MODES, default="wespr")
    ap.add_argument("--calm", action="store_true", help="replay without wind")
    args = ap.parse_args()

    scenario = pipeline.load_with_overrides(resolve_scenario_path(args.scenario))
    field = pipeline.solve_field(scenario)
    plan = pipeline.plan_mode(scenario, field, args.mode)
    replay_field = None if args.calm else field

    refs = {
        "bezier": plan.refined.trajectory,
        "polyline": PolylineReference(plan.path_xy, scenario.params.cruise_speed),
    }
    jerks = {}
    for label, ref in refs.items():
        log, hit, _ = pipeline.replay(scenario, ref, replay_field)
        rep = metrics.report_from_log(log, label, collided=hit)
        jerks[label] = rep.mean_jerk
        print(f"{label:9s} mean jerk {rep.mean_jerk:8.3f} m/s^3"
              f"  max dev {rep.max_dev:.4f} m  collided {rep.collided}")

    reduction = (1.0 - jerks["bezier"] / jerks["polyline"]) * 100.0
    print(f"jerk reduction from refinement: {reduction:+.1f}%")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
