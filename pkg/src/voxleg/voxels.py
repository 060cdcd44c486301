"""Voxel occupancy grids and the leg-span compliance machinery.

A leg phenotype is a dense boolean grid.  Cells are addressed ``(x, y, z)``
with ``y`` the vertical axis; canonical linear order is x-fastest, then z,
then y (``index = x + nx * (z + nz * y)``), which fixes label numbering and
makes runs byte-for-byte reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage


class EmptyGridError(ValueError):
    """Operation requires at least one occupied voxel."""


class UnknownComponentError(KeyError):
    """Requested component id is not present in the labeling."""


class MultipleComponentsError(ValueError):
    """Operation requires a single connected component."""


# 6-connectivity: neighbors share a face.
_FACE_STRUCTURE = ndimage.generate_binary_structure(3, 1)


@dataclass(frozen=True)
class GridDims:
    """Lattice dimensions; defaults are the 16x32x16 grid at 5 mm resolution."""

    nx: int = 16
    ny: int = 32
    nz: int = 16
    voxel_size: float = 5.0

    def __post_init__(self) -> None:
        if self.nx < 1 or self.ny < 1 or self.nz < 1:
            raise ValueError("grid dimensions must be >= 1")
        if self.voxel_size <= 0:
            raise ValueError("voxel_size must be positive")

    @property
    def cell_count(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)


@dataclass(frozen=True)
class VoxelGrid:
    """Immutable dense occupancy over a GridDims lattice.

    ``occupancy`` has shape ``(nx, ny, nz)`` and is write-locked after
    construction; all operations return new grids.
    """

    dims: GridDims
    occupancy: np.ndarray

    def __post_init__(self) -> None:
        occ = np.ascontiguousarray(self.occupancy, dtype=bool)
        if occ.shape != self.dims.shape:
            raise ValueError(
                f"occupancy shape {occ.shape} != dims shape {self.dims.shape}"
            )
        occ.setflags(write=False)
        object.__setattr__(self, "occupancy", occ)

    @classmethod
    def empty(cls, dims: GridDims) -> "VoxelGrid":
        return cls(dims, np.zeros(dims.shape, dtype=bool))

    @classmethod
    def full(cls, dims: GridDims) -> "VoxelGrid":
        return cls(dims, np.ones(dims.shape, dtype=bool))

    @property
    def occupied_count(self) -> int:
        return int(self.occupancy.sum())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VoxelGrid):
            return NotImplemented
        return self.dims == other.dims and bool(
            np.array_equal(self.occupancy, other.occupancy)
        )

    def __hash__(self) -> int:
        return hash((self.dims, self.occupancy.tobytes()))

    def dump_layers(self) -> str:
        """Plain-text layer-by-layer dump ('#' full, '.' empty) for golden tests.

        One block per y layer from bottom (y=0) upward; rows are z, columns x.
        """
        blocks = []
        for y in range(self.dims.ny):
            rows = []
            for z in range(self.dims.nz):
                rows.append(
                    "".join(
                        "#" if self.occupancy[x, y, z] else "."
                        for x in range(self.dims.nx)
                    )
                )
            blocks.append(f"y={y}\n" + "\n".join(rows))
        return "\n\n".join(blocks) + "\n"


@dataclass(frozen=True)
class ComponentLabeling:
    """Partition of occupied cells into 6-connected components.

    ``labels`` holds a positive component id per occupied cell and 0 for
    empty cells.  Ids are assigned in ascending canonical-index order of each
    component's first cell, so the numbering is deterministic.
    """

    labels: np.ndarray
    component_sizes: dict[int, int]
    component_count: int = field(default=0)


def _canonical_view(array: np.ndarray) -> np.ndarray:
    """Reorder axes so that C-raveling yields the canonical linear order."""
    return np.transpose(array, (1, 2, 0))


def occupancy_percentage(grid: VoxelGrid) -> float:
    """Percentage of occupied voxels, in [0, 100]."""
    return 100.0 * grid.occupied_count / grid.dims.cell_count


def connected_components(grid: VoxelGrid) -> ComponentLabeling:
    """Label 6-connected components of the occupied set.

    Backed by scipy's labeling, then renumbered so component ids follow the
    canonical-order first occurrence of each component.
    """
    raw, count = ndimage.label(grid.occupancy, structure=_FACE_STRUCTURE)
    if count == 0:
        return ComponentLabeling(raw, {}, 0)
    flat = _canonical_view(raw).ravel()
    occupied = flat[flat > 0]
    raw_ids, first_index = np.unique(occupied, return_index=True)
    # Renumber: component whose first canonical cell comes earliest gets id 1.
    order = np.argsort(first_index, kind="stable")
    remap = np.zeros(count + 1, dtype=raw.dtype)
    remap[raw_ids[order]] = np.arange(1, count + 1)
    labels = remap[raw]
    ids, sizes = np.unique(labels[labels > 0], return_counts=True)
    labels.setflags(write=False)
    return ComponentLabeling(
        labels=labels,
        component_sizes={int(i): int(s) for i, s in zip(ids, sizes)},
        component_count=int(count),
    )


def is_compliant(grid: VoxelGrid) -> bool:
    """A leg is compliant iff one component spans from y=0 to y=ny-1."""
    ny = grid.dims.ny
    if not grid.occupancy[:, 0, :].any() or not grid.occupancy[:, ny - 1, :].any():
        return False
    labeling = connected_components(grid)
    bottom = np.unique(labeling.labels[:, 0, :])
    top = np.unique(labeling.labels[:, ny - 1, :])
    spanning = np.intersect1d(bottom, top)
    return bool((spanning > 0).any())


def largest_component(labeling: ComponentLabeling) -> int:
    """Id of the largest component; ties break to the smallest id."""
    if labeling.component_count == 0:
        raise EmptyGridError("grid has no occupied voxels")
    best_id = 0
    best_size = -1
    for cid in sorted(labeling.component_sizes):
        size = labeling.component_sizes[cid]
        if size > best_size:
            best_id, best_size = cid, size
    return best_id


def isolate_component(grid: VoxelGrid, component_id: int) -> VoxelGrid:
    """Keep only the cells carrying ``component_id``."""
    labeling = connected_components(grid)
    if component_id not in labeling.component_sizes:
        raise UnknownComponentError(component_id)
    return VoxelGrid(grid.dims, labeling.labels == component_id)


def scale_to_fill(grid: VoxelGrid) -> VoxelGrid:
    """Nearest-neighbor resample of the single component's bbox onto the grid.

    Each axis is scaled independently; the output bounding box spans the full
    grid, which makes the result compliant by construction.
    """
    labeling = connected_components(grid)
    if labeling.component_count == 0:
        raise EmptyGridError("cannot scale an empty grid")
    if labeling.component_count > 1:
        raise MultipleComponentsError(
            f"expected one component, found {labeling.component_count}"
        )
    occ = grid.occupancy
    src_index = []
    for axis, n in enumerate(grid.dims.shape):
        hit = np.any(occ, axis=tuple(a for a in range(3) if a != axis))
        coords = np.nonzero(hit)[0]
        lo, hi = int(coords[0]), int(coords[-1])
        extent = hi - lo + 1
        out = np.arange(n)
        src = lo + np.floor((out + 0.5) / n * extent).astype(int)
        src_index.append(np.clip(src, lo, hi))
    resampled = occ[np.ix_(*src_index)]
    return VoxelGrid(grid.dims, resampled)
