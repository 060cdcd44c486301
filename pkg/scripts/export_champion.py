#!/usr/bin/env python3
"""Decode a champion genome from an archive and export printable meshes.

Given a run directory (e.g. <archive>/run_0), reads the final generation's
champion.json, decodes it to the voxel grid, and writes STL/OBJ files plus a
torque-trace CSV for the chosen environment.
"""

import argparse
import json
import sys
from pathlib import Path

from voxleg import bezier, cppn, mesh, simulate
from voxleg.voxels import GridDims


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("run_dir", help="run directory containing gen_*/champion.json")
    parser.add_argument("--out", required=True, help="output file prefix")
    parser.add_argument("--env", default="soil", choices=("soil", "gravel", "fluid"))
    args = parser.parse_args()

    run_dir = Path(args.run_dir)
    generations = sorted(
        run_dir.glob("gen_*/champion.json"),
        key=lambda p: int(p.parent.name.split("_")[1]),
    )
    if not generations:
        print(f"no champions under {run_dir}", file=sys.stderr)
        return 1
    text = generations[-1].read_text()

    dims = GridDims()
    config_path = run_dir.parent / "config.json"
    if config_path.exists():
        dims = GridDims(**json.loads(config_path.read_text())["dims"])
    if "splines" in json.loads(text):
        grid = bezier.rasterize(bezier.from_json(text), dims)
    else:
        grid = cppn.decode_scaled(cppn.from_json(text), dims)

    medium = getattr(simulate.MediumModel, args.env)()
    fitness, trace = simulate.evaluate(grid, medium=medium)
    print(f"fitness on {args.env}: {fitness:.6f}")

    surface = mesh.voxel_to_mesh(grid)
    mesh.write_stl(surface, f"{args.out}.stl")
    mesh.write_obj(surface, f"{args.out}.obj")
    trace.write_csv(f"{args.out}_trace.csv")
    print(f"wrote {args.out}.stl, {args.out}.obj, {args.out}_trace.csv")
    return 0


if __name__ == "__main__":
    sys.exit(main())
