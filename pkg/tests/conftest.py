"""Shared test oracles and generators, kept independent of the implementations."""

from __future__ import annotations

import numpy as np
import pytest

from voxleg import cppn, neat
from voxleg.voxels import GridDims, VoxelGrid


def flood_fill_partition(grid: VoxelGrid) -> set[frozenset]:
    """Independent 6-connectivity oracle: BFS partition of occupied cells."""
    occ = grid.occupancy
    nx, ny, nz = grid.dims.shape
    seen = np.zeros_like(occ, dtype=bool)
    parts = []
    for start in map(tuple, np.argwhere(occ)):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        cells = []
        while stack:
            x, y, z = stack.pop()
            cells.append((x, y, z))
            for dx, dy, dz in (
                (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1),
            ):
                n = (x + dx, y + dy, z + dz)
                if (
                    0 <= n[0] < nx
                    and 0 <= n[1] < ny
                    and 0 <= n[2] < nz
                    and occ[n]
                    and not seen[n]
                ):
                    seen[n] = True
                    stack.append(n)
        parts.append(frozenset(cells))
    return set(parts)


def oracle_is_compliant(grid: VoxelGrid) -> bool:
    """Compliance via the flood-fill oracle: one part touches y=0 and y=ny-1."""
    top = grid.dims.ny - 1
    return any(
        any(c[1] == 0 for c in part) and any(c[1] == top for c in part)
        for part in flood_fill_partition(grid)
    )


def labeling_partition(labeling) -> set[frozenset]:
    """Convert a ComponentLabeling into the oracle's partition format."""
    parts = {}
    for x, y, z in np.argwhere(labeling.labels > 0):
        parts.setdefault(int(labeling.labels[x, y, z]), []).append(
            (int(x), int(y), int(z))
        )
    return {frozenset(cells) for cells in parts.values()}


def random_grid(rng: np.random.Generator, dims: GridDims, fill: float = 0.3) -> VoxelGrid:
    return VoxelGrid(dims, rng.random(dims.shape) < fill)


def random_cppn_genome(
    rng: np.random.Generator, mutations: int = 6
) -> cppn.CppnGenome:
    """A CPPN genome shaped like an evolved one: init + several mutations."""
    config = neat.NeatConfig()
    registry = neat.InnovationRegistry()
    genome = neat.init_population(config, rng)[0]
    forced = neat.NeatConfig(
        p_add_node=0.4, p_add_connection=0.6, p_mutate_weight=0.8, p_mutate_activation=0.4
    )
    for _ in range(int(rng.integers(0, mutations + 1))):
        genome = neat.mutate(genome, registry, forced, rng)
    return genome


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260826)
