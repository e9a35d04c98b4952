#!/usr/bin/env python3
"""Compare behavioral metrics across completed experiment runs.

Reads the per-case summary.json files written by run_experiment.py (or the
`uncdrive test` CLI) and prints a side-by-side table of finish/collision
rates, brake-to-throttle ratios and median front distances.

Example:
    python3 scripts/compare_experiments.py runs/exp1 runs/exp2 runs/exp3
"""

import argparse
import json
import sys
from pathlib import Path


def load_summaries(run_dir: Path) -> dict:
    out = {}
    for summary in sorted(run_dir.glob("test/*/summary.json")):
        out[summary.parent.name] = json.loads(summary.read_text())
    return out


def fmt(value) -> str:
    if value is None:
        return "—"
    return f"{value:.2f}"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("runs", nargs="+", type=Path)
    args = parser.parse_args()

    tables = {run.name: load_summaries(run) for run in args.runs}
    cases = sorted({case for t in tables.values() for case in t})
    if not cases:
        print("no test summaries found; run run_experiment.py first", file=sys.stderr)
        return 1

    for case in cases:
        print(f"\n== case {case} ==")
        header = f"{'run':12s} {'finish':>7s} {'collide':>8s} {'brake/throttle':>15s} {'med gap (m)':>12s}"
        print(header)
        for name, table in tables.items():
            s = table.get(case)
            if s is None:
                print(f"{name:12s} {'—':>7s}")
                continue
            print(
                f"{name:12s} {s['finish_rate']:7.2f} {s['collision_rate']:8.2f} "
                f"{fmt(s['brake_to_throttle_ratio']['median']):>15s} "
                f"{fmt(s['front_distance_m']['median']):>12s}"
            )
    return 0


if __name__ == "__main__":
    sys.exit(main())
