#!/usr/bin/env python3
"""Regenerate the bundled scenario JSON files from their builders.

Run from the repo root after editing windplan/scenarios.py:

    python3 scripts/make_scenarios.py
"""
import sys
from pathlib import Path

from windplan.env import save_scenario
from windplan.scenarios import BUNDLED, build_bundled


def main() -> int:
    out_dir = Path(__file__).resolve().parent.parent / "src" / "windplan" / "scenarios"
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in BUNDLED:
        scenario = build_bundled(name)
        target = out_dir / f"{name}.json"
        save_scenario(scenario, target)
        print(f"wrote {target}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
