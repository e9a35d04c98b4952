#!/usr/bin/env python3
"""End-to-end experiment pipeline for one scenario.

Trains a policy, selects the best checkpoint by validation, then tests it
for 60 episodes under each reported perceptual case, writing per-case
episode logs, metrics CSVs and boxplot CSVs under the run directory.

Example:
    python3 scripts/run_experiment.py --scenario 2 --steps 2000000 \
        --seed 0 --out runs/exp2
"""

import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from uncdrive.protocol import (  # noqa: E402
    TEST_CASES,
    ExperimentConfig,
    select_best,
    test_policy,
    train_experiment,
)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenario", type=int, required=True, choices=(1, 2, 3))
    parser.add_argument("--steps", type=int, default=2_000_000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--episodes", type=int, default=60)
    parser.add_argument("--out", type=Path, required=True)
    parser.add_argument(
        "--also-scenario-4",
        action="store_true",
        help="additionally evaluate a scenario-3 policy with the zero one-hot",
    )
    args = parser.parse_args()

    cfg = ExperimentConfig(
        scenario_id=args.scenario,
        seed=args.seed,
        total_steps=args.steps,
        out_dir=args.out,
    )
    manifest_path = args.out / "manifest.json"
    if manifest_path.exists() and json.loads(manifest_path.read_text()).get(
        "status"
    ) == "complete":
        print(f"reusing completed training run in {args.out}")
    else:
        print(f"training scenario {args.scenario} for {args.steps} steps ...")
        train_experiment(cfg)

    params = select_best(args.out, cfg)
    print("selected best checkpoint (see selection.json)")

    for case in TEST_CASES:
        out_dir = args.out / "test" / str(case).lower()
        metrics, _ = test_policy(
            params, case, args.episodes, args.scenario, cfg, out_dir=out_dir
        )
        print(
            f"case {case:4s}: finish {metrics.finish_rate:.2f} "
            f"collide {metrics.collision_rate:.2f} "
            f"timeout {metrics.timeout_rate:.2f} "
            f"stalled {metrics.stalled_rate:.2f} "
            f"median gap {metrics.median_front_distance():.2f} m"
        )

    if args.also_scenario_4:
        if args.scenario != 3:
            parser.error("--also-scenario-4 requires --scenario 3")
        out_dir = args.out / "test" / "scenario4_vevv"
        metrics, _ = test_policy(
            params,
            "VEVV",
            args.episodes,
            3,
            cfg,
            out_dir=out_dir,
            force_zero_uncertainty=True,
        )
        print(
            f"scenario-4 VEVV: finish {metrics.finish_rate:.2f} "
            f"median gap {metrics.median_front_distance():.2f} m"
        )

    print(f"artifacts in {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
