"""Command-line interface.

Subcommands: evolve, evaluate, export-mesh, compare, plot.  Exit codes:
0 success, 1 usage error, 2 runtime error.  All randomness derives from
--seed.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from voxleg import bezier, cppn, mesh, plotting
from voxleg.experiment import (
    ExperimentConfig,
    compare_runs,
    final_bests_from_dir,
    read_stats_csv,
    run_experiment,
)
from voxleg.simulate import LegRig, MediumModel, StepTrajectory, evaluate
from voxleg.voxels import GridDims


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _load_genome(path: str, representation: str | None):
    """Returns ('bezier'|'cppn', genome); representation None means detect."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if representation is None:
        doc = json.loads(text)
        representation = "bezier" if "splines" in doc else "cppn"
    if representation == "bezier":
        return "bezier", bezier.from_json(text)
    return "cppn", cppn.from_json(text)


def _decode(representation: str, genome, dims: GridDims, constraint: str):
    if representation == "bezier":
        return bezier.rasterize(genome, dims)
    if constraint == "threshold":
        grid, _ = cppn.decode_adaptive_threshold(genome, dims)
        return grid
    return cppn.decode_scaled(genome, dims)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="voxleg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    evolve = sub.add_parser("evolve", help="run an evolutionary experiment")
    evolve.add_argument("--representation", choices=("bezier", "cppn"), required=True)
    evolve.add_argument("--constraint", choices=("threshold", "scale"))
    evolve.add_argument("--env", choices=("soil", "gravel", "fluid"), required=True)
    evolve.add_argument("--generations", type=int, default=50)
    evolve.add_argument("--population", type=int, default=20)
    evolve.add_argument("--repeats", type=int, default=10)
    evolve.add_argument("--seed", type=int, default=0)
    evolve.add_argument("--out", required=True)

    ev = sub.add_parser("evaluate", help="evaluate one genome file")
    ev.add_argument("genome")
    ev.add_argument("--representation", choices=("bezier", "cppn"))
    ev.add_argument("--constraint", choices=("threshold", "scale"), default="scale")
    ev.add_argument("--env", choices=("soil", "gravel", "fluid"), default="soil")
    ev.add_argument("--trace-csv", help="write the torque trace here")

    em = sub.add_parser("export-mesh", help="export a genome as STL/OBJ")
    em.add_argument("genome")
    em.add_argument("--representation", choices=("bezier", "cppn"))
    em.add_argument("--constraint", choices=("threshold", "scale"), default="scale")
    em.add_argument("--stl")
    em.add_argument("--obj")

    cp = sub.add_parser("compare", help="Mann-Whitney comparison of two archives")
    cp.add_argument("archive_a")
    cp.add_argument("archive_b")

    pl = sub.add_parser("plot", help="render a fitness plot from an archive")
    pl.add_argument("archive")
    pl.add_argument("--out", required=True)
    return parser


def _cmd_evolve(args: argparse.Namespace) -> int:
    constraint = args.constraint
    if args.representation == "cppn" and constraint is None:
        constraint = "scale"
    if args.representation == "bezier":
        constraint = None
    config = ExperimentConfig(
        representation=args.representation,
        constraint_method=constraint,
        environment=args.env,
        generations=args.generations,
        population=args.population,
        repeats=args.repeats,
        master_seed=args.seed,
        output_dir=args.out,
    )
    archive = run_experiment(config)
    best = max(archive.final_bests())
    print(f"archive written to {args.out}; best final fitness {best:.6g}")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    representation, genome = _load_genome(args.genome, args.representation)
    dims = GridDims()
    grid = _decode(representation, genome, dims, args.constraint)
    fitness, trace = evaluate(
        grid, LegRig(), StepTrajectory(), MediumModel(kind=args.env)
    )
    if args.trace_csv:
        trace.write_csv(args.trace_csv)
    print(f"fitness {fitness!r}")
    return 0


def _cmd_export_mesh(args: argparse.Namespace) -> int:
    if not args.stl and not args.obj:
        sys.stderr.write("export-mesh: need --stl and/or --obj\n")
        return 1
    representation, genome = _load_genome(args.genome, args.representation)
    grid = _decode(representation, genome, GridDims(), args.constraint)
    tri_mesh = mesh.voxel_to_mesh(grid)
    if args.stl:
        size = mesh.write_stl(tri_mesh, args.stl)
        print(f"wrote {args.stl} ({size} bytes, {tri_mesh.triangle_count} triangles)")
    if args.obj:
        size = mesh.write_obj(tri_mesh, args.obj)
        print(f"wrote {args.obj} ({size} bytes)")
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    report = compare_runs(
        final_bests_from_dir(args.archive_a), final_bests_from_dir(args.archive_b)
    )
    print(json.dumps(report, indent=2))
    return 0


def _cmd_plot(args: argparse.Namespace) -> int:
    import os

    by_repeat = read_stats_csv(os.path.join(args.archive, "stats.csv"))
    stats = np.array(
        [[[g.best, g.mean, g.worst] for g in gens] for _, gens in sorted(by_repeat.items())]
    )
    plotting.render_fitness_plot(stats, args.out)
    print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "evolve": _cmd_evolve,
    "evaluate": _cmd_evaluate,
    "export-mesh": _cmd_export_mesh,
    "compare": _cmd_compare,
    "plot": _cmd_plot,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except BrokenPipeError:
        return 2
    except Exception as exc:  # runtime failures map to exit code 2
        sys.stderr.write(f"voxleg: error: {exc}\n")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
