#!/usr/bin/env python3
"""Fast end-to-end demo: evolve both representations on soil and compare them.

Runs a small desk-scale experiment (3 repeats, 10 generations, population 20),
writes both archives plus meshes and plots, and prints the Mann-Whitney
comparison of final best fitnesses.  Finishes in a few minutes.
"""

import argparse
import json
import sys

from voxleg.experiment import ExperimentConfig, compare_runs, run_experiment


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="root output directory")
    parser.add_argument("--env", default="soil", choices=("soil", "gravel", "fluid"))
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()

    bests = {}
    for representation in ("cppn", "bezier"):
        config = ExperimentConfig(
            representation=representation,
            constraint_method="scale" if representation == "cppn" else None,
            environment=args.env,
            generations=10,
            population=20,
            repeats=3,
            master_seed=args.seed,
            output_dir=f"{args.out}/{representation}_{args.env}",
        )
        print(f"evolving {representation} on {args.env}...", flush=True)
        archive = run_experiment(config)
        bests[representation] = archive.final_bests()
        print(f"  final bests: {[f'{b:.4f}' for b in bests[representation]]}")

    report = compare_runs(bests["cppn"], bests["bezier"])
    print("cppn vs bezier:", json.dumps(report, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
