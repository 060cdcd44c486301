#!/usr/bin/env python3
"""Run the full evolution protocol for every representation and environment.

Six experiments (cppn/bezier x soil/gravel/fluid), each with 10 repeats of
50 generations at population 20, archived under the output directory as
<out>/<representation>_<environment>/.  Expect this to take a while; use
scripts/quick_demo.py for a fast smoke run.
"""

import argparse
import sys

from voxleg.experiment import ExperimentConfig, run_experiment


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="root output directory")
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--generations", type=int, default=50)
    parser.add_argument("--population", type=int, default=20)
    parser.add_argument("--repeats", type=int, default=10)
    parser.add_argument(
        "--constraint",
        default="scale",
        choices=("adaptive", "scale"),
        help="constraint repair method for cppn runs",
    )
    args = parser.parse_args()

    for representation in ("cppn", "bezier"):
        for environment in ("soil", "gravel", "fluid"):
            name = f"{representation}_{environment}"
            print(f"=== {name} ===", flush=True)
            config = ExperimentConfig(
                representation=representation,
                constraint_method=args.constraint if representation == "cppn" else None,
                environment=environment,
                generations=args.generations,
                population=args.population,
                repeats=args.repeats,
                master_seed=args.seed,
                output_dir=f"{args.out}/{name}",
            )
            archive = run_experiment(config)
            bests = archive.final_bests()
            print(f"final bests: {[f'{b:.4f}' for b in bests]}", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
