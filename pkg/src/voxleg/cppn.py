"""CPPN genomes: feedforward query over voxel coordinates and grid decoding.

A genome is a DAG of node genes (with per-node activation functions drawn
from six kinds) and weighted connection genes carrying innovation ids.  The
network is queried at normalized cell-center coordinates; the single output,
clamped to [0, 1], is thresholded into voxel occupancy.  Two constraint
repair strategies are provided: adaptive threshold lowering and
largest-component rescaling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from graphlib import CycleError, TopologicalSorter
from typing import Iterable

import numpy as np
from scipy.special import expit

from voxleg.voxels import (
    GridDims,
    VoxelGrid,
    connected_components,
    is_compliant,
    isolate_component,
    largest_component,
    scale_to_fill,
)

THRESHOLD_START = 0.5
THRESHOLD_STEP = 0.05


class CyclicGenomeError(ValueError):
    """Connection genes contain a directed cycle."""


class GenomeValidationError(ValueError):
    """Genome violates a structural invariant."""


class GenomeParseError(ValueError):
    """Genome JSON is malformed; message carries the offending location."""


class ActivationKind(Enum):
    SINE = "sine"
    COSINE = "cosine"
    IDENTITY = "identity"
    GAUSSIAN = "gaussian"
    ABSOLUTE = "absolute"
    SIGMOID = "sigmoid"

    def apply(self, x: np.ndarray) -> np.ndarray:
        if self is ActivationKind.SINE:
            return np.sin(x)
        if self is ActivationKind.COSINE:
            return np.cos(x)
        if self is ActivationKind.IDENTITY:
            return np.asarray(x, dtype=float)
        if self is ActivationKind.GAUSSIAN:
            return np.exp(-np.square(x))
        if self is ActivationKind.ABSOLUTE:
            return np.abs(x)
        return expit(x)


ALL_ACTIVATIONS = tuple(ActivationKind)


@dataclass(frozen=True)
class NodeGene:
    node_id: int
    role: str  # input | hidden | output
    activation: ActivationKind | None = None


@dataclass(frozen=True)
class ConnGene:
    innovation_id: int
    source: int
    target: int
    weight: float
    enabled: bool = True


@dataclass(frozen=True)
class CppnGenome:
    """Immutable CPPN genotype; connections kept sorted by innovation id."""

    nodes: tuple[NodeGene, ...]
    connections: tuple[ConnGene, ...]
    species_id: int | None = field(default=None, compare=False)
    fitness: float | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        ordered = tuple(sorted(self.connections, key=lambda c: c.innovation_id))
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "connections", ordered)

    @property
    def input_ids(self) -> tuple[int, ...]:
        return tuple(
            sorted(n.node_id for n in self.nodes if n.role == "input")
        )

    @property
    def output_id(self) -> int:
        return next(n.node_id for n in self.nodes if n.role == "output")

    def node_map(self) -> dict[int, NodeGene]:
        return {n.node_id: n for n in self.nodes}

    def with_fitness(self, fitness: float) -> "CppnGenome":
        return replace(self, fitness=fitness)


def validate_genome(genome: CppnGenome) -> None:
    """Raise GenomeValidationError on any violated structural invariant."""
    nodes = genome.node_map()
    if len(nodes) != len(genome.nodes):
        raise GenomeValidationError("duplicate node ids")
    inputs = [n for n in genome.nodes if n.role == "input"]
    outputs = [n for n in genome.nodes if n.role == "output"]
    if len(inputs) != 3:
        raise GenomeValidationError(f"expected 3 input nodes, got {len(inputs)}")
    if len(outputs) != 1:
        raise GenomeValidationError(f"expected 1 output node, got {len(outputs)}")
    for n in genome.nodes:
        if n.role == "input" and n.activation is not None:
            raise GenomeValidationError(f"input node {n.node_id} has an activation")
        if n.role != "input" and n.activation is None:
            raise GenomeValidationError(f"node {n.node_id} lacks an activation")
    seen_pairs: set[tuple[int, int]] = set()
    seen_innovations: set[int] = set()
    for c in genome.connections:
        if c.source not in nodes or c.target not in nodes:
            raise GenomeValidationError(f"connection {c.innovation_id} endpoint missing")
        if c.source == c.target:
            raise GenomeValidationError(f"self-loop at node {c.source}")
        if (c.source, c.target) in seen_pairs:
            raise GenomeValidationError(f"duplicate connection {c.source}->{c.target}")
        if c.innovation_id in seen_innovations:
            raise GenomeValidationError(f"duplicate innovation id {c.innovation_id}")
        if nodes[c.target].role == "input":
            raise GenomeValidationError(f"connection targets input node {c.target}")
        seen_pairs.add((c.source, c.target))
        seen_innovations.add(c.innovation_id)
    topo_order(genome)  # raises CyclicGenomeError on a cycle


def topo_order(genome: CppnGenome) -> tuple[int, ...]:
    """Deterministic topological order over all connection genes."""
    graph: dict[int, set[int]] = {n.node_id: set() for n in genome.nodes}
    for c in genome.connections:
        graph[c.target].add(c.source)
    sorter = TopologicalSorter(graph)
    try:
        order = []
        sorter.prepare()
        while sorter.is_active():
            ready = sorted(sorter.get_ready())
            order.extend(ready)
            sorter.done(*ready)
        return tuple(order)
    except CycleError as exc:
        raise CyclicGenomeError("connection genes contain a cycle") from exc


def evaluate_field(
    genome: CppnGenome, xs: np.ndarray, ys: np.ndarray, zs: np.ndarray
) -> np.ndarray:
    """Vectorized feedforward pass; returns the clamped output per coordinate.

    The three input nodes take x, y, z in ascending node-id order.  A
    non-input node with no enabled incoming connection outputs activation(0).
    """
    xs, ys, zs = np.broadcast_arrays(
        np.asarray(xs, dtype=float), np.asarray(ys, dtype=float), np.asarray(zs, dtype=float)
    )
    incoming: dict[int, list[ConnGene]] = {}
    for c in genome.connections:
        if c.enabled:
            incoming.setdefault(c.target, []).append(c)
    nodes = genome.node_map()
    ix, iy, iz = genome.input_ids
    values: dict[int, np.ndarray] = {ix: xs, iy: ys, iz: zs}
    for node_id in topo_order(genome):
        node = nodes[node_id]
        if node.role == "input":
            continue
        total = np.zeros(xs.shape)
        for c in incoming.get(node_id, ()):
            total = total + c.weight * values[c.source]
        values[node_id] = node.activation.apply(total)
    return np.clip(values[genome.output_id], 0.0, 1.0)


def query(genome: CppnGenome, x: float, y: float, z: float) -> float:
    """Single-point network query; coordinates are expected in [-1, 1]."""
    return float(evaluate_field(genome, np.array(x), np.array(y), np.array(z)))


def _cell_center_coords(n: int) -> np.ndarray:
    return 2.0 * (np.arange(n) + 0.5) / n - 1.0


def sample_field(genome: CppnGenome, dims: GridDims) -> np.ndarray:
    """Network output at every cell center, shape (nx, ny, nz)."""
    cx = _cell_center_coords(dims.nx)
    cy = _cell_center_coords(dims.ny)
    cz = _cell_center_coords(dims.nz)
    xs, ys, zs = np.meshgrid(cx, cy, cz, indexing="ij")
    return evaluate_field(genome, xs, ys, zs)


def decode(genome: CppnGenome, dims: GridDims, threshold: float) -> VoxelGrid:
    """Threshold the sampled field into a voxel grid (full iff >= threshold)."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must be in [0, 1]")
    return VoxelGrid(dims, sample_field(genome, dims) >= threshold)


def decode_adaptive_threshold(
    genome: CppnGenome, dims: GridDims
) -> tuple[VoxelGrid, float]:
    """Lower the threshold from 0.5 in 0.05 steps until the grid is compliant.

    At threshold 0 every cell is full (outputs are clamped to be >= 0), so
    the loop always terminates.
    """
    field_values = sample_field(genome, dims)
    for k in range(11):
        threshold = (10 - k) / 20.0
        grid = VoxelGrid(dims, field_values >= threshold)
        if is_compliant(grid):
            return grid, threshold
    raise AssertionError("unreachable: threshold 0 always yields a full grid")


def decode_scaled(genome: CppnGenome, dims: GridDims) -> VoxelGrid:
    """Decode at 0.5 and repair by isolating and rescaling the largest blob.

    An empty 0.5 decode falls back to adaptive thresholding to obtain a
    non-empty grid before the isolate/scale step.
    """
    grid = decode(genome, dims, THRESHOLD_START)
    if is_compliant(grid):
        return grid
    if grid.occupied_count == 0:
        grid, _ = decode_adaptive_threshold(genome, dims)
    labeling = connected_components(grid)
    biggest = isolate_component(grid, largest_component(labeling))
    return scale_to_fill(biggest)


def _node_to_json(node: NodeGene) -> dict:
    return {
        "id": node.node_id,
        "role": node.role,
        "activation": None if node.activation is None else node.activation.value,
    }


def to_json(genome: CppnGenome) -> str:
    """Serialize to the fixed genome schema with full-precision weights."""
    doc = {
        "nodes": [_node_to_json(n) for n in genome.nodes],
        "connections": [
            {
                "innovation": c.innovation_id,
                "source": c.source,
                "target": c.target,
                "weight": c.weight,
                "enabled": c.enabled,
            }
            for c in genome.connections
        ],
    }
    return json.dumps(doc, indent=2)


def from_json(text: str) -> CppnGenome:
    """Parse and validate a genome document produced by :func:`to_json`."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GenomeParseError(
            f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    try:
        nodes = tuple(
            NodeGene(
                node_id=int(n["id"]),
                role=str(n["role"]),
                activation=None
                if n.get("activation") is None
                else ActivationKind(n["activation"]),
            )
            for n in doc["nodes"]
        )
        connections = tuple(
            ConnGene(
                innovation_id=int(c["innovation"]),
                source=int(c["source"]),
                target=int(c["target"]),
                weight=float(c["weight"]),
                enabled=bool(c["enabled"]),
            )
            for c in doc["connections"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise GenomeParseError(f"malformed genome document: {exc}") from exc
    genome = CppnGenome(nodes=nodes, connections=connections)
    validate_genome(genome)
    return genome
