"""Direct representation: 3D Bezier-spline genomes and their GA.

A genome holds 5-10 splines, each with 3-8 control points in continuous
voxel units and an integer thickness of 1-3 voxels.  Spline 0 is pinned so
its first control point sits on the top plane (y = ny) and its last on the
bottom plane (y = 0), which makes every rasterized genome span-compliant by
construction.  Evolution uses tournament selection, two-point crossover at
spline boundaries, and Gaussian control-point perturbation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from voxleg.voxels import GridDims, VoxelGrid

MIN_SPLINES, MAX_SPLINES = 5, 10
MIN_POINTS, MAX_POINTS = 3, 8
MIN_THICKNESS, MAX_THICKNESS = 1, 3

Point3 = tuple[float, float, float]


class InconsistentInputError(ValueError):
    """Fitness list does not match the population."""


class GenomeParseError(ValueError):
    """Genome JSON is malformed."""


@dataclass(frozen=True)
class Spline:
    control_points: tuple[Point3, ...]
    thickness: int

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "control_points",
            tuple(tuple(float(v) for v in p) for p in self.control_points),
        )
        if not MIN_POINTS <= len(self.control_points) <= MAX_POINTS:
            raise ValueError(
                f"spline needs {MIN_POINTS}-{MAX_POINTS} control points, "
                f"got {len(self.control_points)}"
            )
        if not MIN_THICKNESS <= self.thickness <= MAX_THICKNESS:
            raise ValueError(f"thickness {self.thickness} outside 1-3")


@dataclass(frozen=True)
class BezierGenome:
    splines: tuple[Spline, ...]
    fitness: float | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "splines", tuple(self.splines))
        if not MIN_SPLINES <= len(self.splines) <= MAX_SPLINES:
            raise ValueError(
                f"genome needs {MIN_SPLINES}-{MAX_SPLINES} splines, "
                f"got {len(self.splines)}"
            )

    def with_fitness(self, fitness: float) -> "BezierGenome":
        return replace(self, fitness=fitness)


@dataclass
class GaConfig:
    """GA parameters; sigmas default to (axis extent * 0.1) / 4."""

    dims: GridDims = field(default_factory=GridDims)
    population_size: int = 20
    elitism: int = 1
    tournament_size: int = 4
    sigma_x: float | None = None
    sigma_y: float | None = None
    sigma_z: float | None = None
    p_thickness: float = 0.2
    p_ctrl_point: float = 0.2
    p_spline: float = 0.1
    p_add: float = 0.5  # add-vs-remove split for (c) and (d)

    def __post_init__(self) -> None:
        if self.sigma_x is None:
            self.sigma_x = self.dims.nx * 0.1 / 4
        if self.sigma_y is None:
            self.sigma_y = self.dims.ny * 0.1 / 4
        if self.sigma_z is None:
            self.sigma_z = self.dims.nz * 0.1 / 4
        for name in ("p_thickness", "p_ctrl_point", "p_spline", "p_add"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")


def pin_first_spline(genome: BezierGenome, dims: GridDims) -> BezierGenome:
    """Force spline 0 to start on the top plane and end on the bottom plane."""
    first = genome.splines[0]
    points = list(first.control_points)
    x0, _, z0 = points[0]
    xn, _, zn = points[-1]
    points[0] = (x0, float(dims.ny), z0)
    points[-1] = (xn, 0.0, zn)
    pinned = replace(first, control_points=tuple(points))
    return replace(genome, splines=(pinned,) + genome.splines[1:])


def _random_point(dims: GridDims, rng: np.random.Generator) -> Point3:
    return (
        float(rng.uniform(0, dims.nx)),
        float(rng.uniform(0, dims.ny)),
        float(rng.uniform(0, dims.nz)),
    )


def _random_spline(dims: GridDims, rng: np.random.Generator) -> Spline:
    count = int(rng.integers(MIN_POINTS, MAX_POINTS + 1))
    points = tuple(_random_point(dims, rng) for _ in range(count))
    thickness = int(rng.integers(MIN_THICKNESS, MAX_THICKNESS + 1))
    return Spline(points, thickness)


def random_genome(config: GaConfig, rng: np.random.Generator) -> BezierGenome:
    """Uniform random genome within all ranges, with spline-0 pinning applied."""
    count = int(rng.integers(MIN_SPLINES, MAX_SPLINES + 1))
    splines = tuple(_random_spline(config.dims, rng) for _ in range(count))
    return pin_first_spline(BezierGenome(splines), config.dims)


def _de_casteljau(points: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """Evaluate the curve at parameters ``ts``; returns shape (len(ts), 3)."""
    ts = np.asarray(ts, dtype=float)
    levels = np.broadcast_to(points, (ts.shape[0],) + points.shape).copy()
    t = ts[:, None, None]
    while levels.shape[1] > 1:
        levels = (1.0 - t) * levels[:, :-1, :] + t * levels[:, 1:, :]
    return levels[:, 0, :]


def bezier_point(spline: Spline, t: float) -> Point3:
    """De Casteljau evaluation at a single parameter in [0, 1]."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must be in [0, 1]")
    p = _de_casteljau(np.asarray(spline.control_points), np.array([t]))[0]
    return (float(p[0]), float(p[1]), float(p[2]))


def sample_spline(spline: Spline, max_gap: float = 0.5) -> np.ndarray:
    """Adaptively sampled curve points with consecutive gaps <= max_gap.

    Starts from 64 uniform parameters and bisects every over-long segment.
    """
    points = np.asarray(spline.control_points)
    ts = np.linspace(0.0, 1.0, 64)
    samples = _de_casteljau(points, ts)
    for _ in range(40):
        gaps = np.linalg.norm(np.diff(samples, axis=0), axis=1)
        long = np.nonzero(gaps > max_gap)[0]
        if long.size == 0:
            return samples
        mid_ts = (ts[long] + ts[long + 1]) / 2.0
        ts = np.sort(np.concatenate([ts, mid_ts]))
        samples = _de_casteljau(points, ts)
    raise AssertionError("adaptive sampling failed to converge")


def _mark_brush(
    occupancy: np.ndarray, samples: np.ndarray, radius: float, shape: np.ndarray
) -> None:
    """Mark every voxel whose center is within ``radius`` of any sample."""
    reach = int(np.ceil(radius + 0.5))
    off = np.arange(-reach, reach + 1)
    ox, oy, oz = np.meshgrid(off, off, off, indexing="ij")
    offsets = np.stack([ox, oy, oz], axis=-1).reshape(-1, 3)
    base = np.floor(samples).astype(int)
    idx = base[:, None, :] + offsets[None, :, :]  # (S, O, 3)
    centers = idx + 0.5
    dist2 = np.sum((centers - samples[:, None, :]) ** 2, axis=-1)
    inside = dist2 <= radius * radius + 1e-12
    in_bounds = np.all((idx >= 0) & (idx < shape), axis=-1)
    hits = idx[inside & in_bounds]
    occupancy[hits[:, 0], hits[:, 1], hits[:, 2]] = True


def _mark_traversal(
    occupancy: np.ndarray, samples: np.ndarray, shape: np.ndarray
) -> None:
    """Mark the face-connected chain of cells the sampled curve passes through.

    A brush of radius 0.5 alone cannot bridge cells when the curve runs near
    cell edges (centers there are further than half a voxel away), so the
    containing cells are marked too, with single-axis stepping inserted where
    consecutive samples jump diagonally.
    """
    cells = np.floor(samples).astype(int)
    cells = np.clip(cells, 0, shape - 1)
    occupancy[cells[:, 0], cells[:, 1], cells[:, 2]] = True
    deltas = np.abs(np.diff(cells, axis=0)).sum(axis=1)
    for seg in np.nonzero(deltas > 1)[0]:
        c0, c1 = cells[seg], cells[seg + 1]
        p0, p1 = samples[seg], samples[seg + 1]
        crossings = []
        for axis in range(3):
            if c0[axis] != c1[axis]:
                plane = max(c0[axis], c1[axis])
                denom = p1[axis] - p0[axis]
                t = (plane - p0[axis]) / denom if denom != 0 else 0.0
                crossings.append((t, axis, int(np.sign(c1[axis] - c0[axis]))))
        cur = c0.copy()
        for _, axis, step in sorted(crossings):
            cur[axis] += step
            occupancy[tuple(np.clip(cur, 0, shape - 1))] = True


def rasterize(genome: BezierGenome, dims: GridDims) -> VoxelGrid:
    """Union of spherical brushes of radius thickness/2 along each spline.

    A voxel is full iff its center lies within thickness/2 (in voxel units)
    of any curve sample (sampled with <= 0.5 voxel gaps) or the curve passes
    through it; the latter keeps each spline's voxel chain 6-connected at
    thickness 1.
    """
    occupancy = np.zeros(dims.shape, dtype=bool)
    shape = np.array(dims.shape)
    for spline in genome.splines:
        samples = sample_spline(spline)
        _mark_brush(occupancy, samples, spline.thickness / 2.0, shape)
        _mark_traversal(occupancy, samples, shape)
    return VoxelGrid(dims, occupancy)


def two_point_crossover(
    p1: BezierGenome, p2: BezierGenome, dims: GridDims, rng: np.random.Generator
) -> BezierGenome:
    """Swap a contiguous spline segment; cut points bounded by the shorter parent."""
    m = min(len(p1.splines), len(p2.splines))
    i = int(rng.integers(0, m))
    j = int(rng.integers(i + 1, m + 1))
    child = p1.splines[:i] + p2.splines[i:j] + p1.splines[j:]
    return pin_first_spline(BezierGenome(child), dims)


def mutate(
    genome: BezierGenome, config: GaConfig, rng: np.random.Generator
) -> BezierGenome:
    """Gaussian control-point noise plus the three structural mutations."""
    dims = config.dims
    sigmas = np.array([config.sigma_x, config.sigma_y, config.sigma_z])
    bounds = np.array([dims.nx, dims.ny, dims.nz], dtype=float)

    splines = []
    for spline in genome.splines:
        pts = np.asarray(spline.control_points)
        if np.any(sigmas > 0):
            pts = pts + rng.normal(0.0, 1.0, pts.shape) * sigmas
        pts = np.clip(pts, 0.0, bounds)
        splines.append(replace(spline, control_points=tuple(map(tuple, pts))))

    if rng.random() < config.p_thickness:
        idx = int(rng.integers(len(splines)))
        thickness = int(rng.integers(MIN_THICKNESS, MAX_THICKNESS + 1))
        splines[idx] = replace(splines[idx], thickness=thickness)

    if rng.random() < config.p_ctrl_point:
        idx = int(rng.integers(len(splines)))
        points = list(splines[idx].control_points)
        add = rng.random() < config.p_add
        if add and len(points) >= MAX_POINTS:
            add = False
        elif not add and len(points) <= MIN_POINTS:
            add = True
        if add:
            at = int(rng.integers(1, len(points)))  # interior insertion slot
            points.insert(at, _random_point(dims, rng))
        else:
            at = int(rng.integers(1, len(points) - 1))
            points.pop(at)
        splines[idx] = replace(splines[idx], control_points=tuple(points))

    if rng.random() < config.p_spline:
        add = rng.random() < config.p_add
        if add and len(splines) >= MAX_SPLINES:
            add = False
        elif not add and len(splines) <= MIN_SPLINES:
            add = True
        if add:
            splines.append(_random_spline(dims, rng))
        else:
            splines.pop(int(rng.integers(len(splines))))

    return pin_first_spline(BezierGenome(tuple(splines)), dims)


def next_generation_ga(
    population: list[BezierGenome],
    fitnesses: list[float],
    config: GaConfig,
    rng: np.random.Generator,
) -> list[BezierGenome]:
    """Elitism of 1 plus tournament-selected, crossed-over, mutated children."""
    if len(fitnesses) != len(population):
        raise InconsistentInputError(
            f"{len(fitnesses)} fitnesses for {len(population)} genomes"
        )
    scores = np.asarray(fitnesses, dtype=float)

    def tournament() -> BezierGenome:
        entrants = rng.choice(len(population), size=config.tournament_size, replace=False)
        entrants = np.sort(entrants)  # ties resolve to the lowest index
        winner = entrants[int(np.argmax(scores[entrants]))]
        return population[winner]

    elite = population[int(np.argmax(scores))].with_fitness(float(scores.max()))
    children = [elite]
    while len(children) < config.population_size:
        child = two_point_crossover(tournament(), tournament(), config.dims, rng)
        children.append(mutate(child, config, rng))
    return children


def to_json(genome: BezierGenome) -> str:
    doc = {
        "splines": [
            {"points": [list(p) for p in s.control_points], "thickness": s.thickness}
            for s in genome.splines
        ]
    }
    return json.dumps(doc, indent=2)


def from_json(text: str) -> BezierGenome:
    try:
        doc = json.loads(text)
        splines = tuple(
            Spline(
                control_points=tuple(tuple(float(v) for v in p) for p in s["points"]),
                thickness=int(s["thickness"]),
            )
            for s in doc["splines"]
        )
        return BezierGenome(splines)
    except json.JSONDecodeError as exc:
        raise GenomeParseError(
            f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise GenomeParseError(f"malformed genome document: {exc}") from exc
