"""Experiment orchestration: evolutionary runs, archives, stats, comparisons.

A run configuration picks a representation (bezier or cppn), a constraint
repair method (cppn only), an environment, and counts for generations,
population and repeats.  Each repeat gets an independent RNG stream derived
from the master seed, so archives are byte-for-byte reproducible regardless
of how evaluations are scheduled.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from voxleg import bezier, cppn, mesh, neat, plotting
from voxleg.simulate import (
    InvalidLegError,
    LegRig,
    MediumModel,
    StepTrajectory,
    evaluate,
)
from voxleg.stats import mann_whitney_u
from voxleg.voxels import GridDims, VoxelGrid

REPRESENTATIONS = ("bezier", "cppn")
CONSTRAINT_METHODS = ("threshold", "scale")
ENVIRONMENTS = ("soil", "gravel", "fluid")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    representation: str = "cppn"
    constraint_method: str | None = "scale"
    environment: str = "soil"
    generations: int = 50
    population: int = 20
    repeats: int = 10
    master_seed: int = 0
    output_dir: str | None = None
    dims: GridDims = field(default_factory=GridDims)
    rig: LegRig = field(default_factory=LegRig)
    trajectory: StepTrajectory = field(default_factory=StepTrajectory)
    medium_overrides: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.representation not in REPRESENTATIONS:
            raise ConfigError(f"unknown representation {self.representation!r}")
        if self.environment not in ENVIRONMENTS:
            raise ConfigError(f"unknown environment {self.environment!r}")
        if self.representation == "cppn":
            if self.constraint_method not in CONSTRAINT_METHODS:
                raise ConfigError(
                    "cppn runs need constraint_method 'threshold' or 'scale'"
                )
        elif self.constraint_method is not None:
            raise ConfigError("constraint_method only applies to cppn runs")
        if min(self.generations, self.population, self.repeats) < 1:
            raise ConfigError("generations, population and repeats must be >= 1")

    def medium(self) -> MediumModel:
        return MediumModel(kind=self.environment, **self.medium_overrides)


@dataclass
class GenerationStats:
    generation: int
    best: float
    mean: float
    worst: float
    failed: int = 0


@dataclass
class RunResult:
    repeat: int
    seed: list[int]
    stats: list[GenerationStats]
    champions: list[str]  # genome JSON per generation
    final_champion_grid: VoxelGrid


@dataclass
class RunArchive:
    config: ExperimentConfig
    runs: list[RunResult]

    def final_bests(self) -> list[float]:
        return [run.stats[-1].best for run in self.runs]

    def stats_array(self) -> np.ndarray:
        """(repeats, generations, 3) best/mean/worst array."""
        return np.array(
            [[[g.best, g.mean, g.worst] for g in run.stats] for run in self.runs]
        )


def _decode_cppn(genome: cppn.CppnGenome, config: ExperimentConfig) -> VoxelGrid:
    if config.constraint_method == "threshold":
        grid, _ = cppn.decode_adaptive_threshold(genome, config.dims)
        return grid
    return cppn.decode_scaled(genome, config.dims)


def _evaluate_grid(grid: VoxelGrid, config: ExperimentConfig) -> float | None:
    try:
        fitness, _ = evaluate(grid, config.rig, config.trajectory, config.medium())
        return fitness
    except InvalidLegError:
        return None


def _run_single_repeat(config: ExperimentConfig, repeat: int) -> RunResult:
    seed_key = [config.master_seed, repeat]
    rng = np.random.default_rng(np.random.SeedSequence(seed_key))

    if config.representation == "cppn":
        neat_config = neat.NeatConfig(population_size=config.population)
        registry = neat.InnovationRegistry()
        population: list = neat.init_population(neat_config, rng)
        species_state: neat.SpeciesState | None = None
    else:
        ga_config = bezier.GaConfig(dims=config.dims, population_size=config.population)
        population = [bezier.random_genome(ga_config, rng) for _ in range(config.population)]

    stats: list[GenerationStats] = []
    champions: list[str] = []
    champion_grid: VoxelGrid | None = None

    for generation in range(config.generations):
        grids = []
        for genome in population:
            if config.representation == "cppn":
                grids.append(_decode_cppn(genome, config))
            else:
                grids.append(bezier.rasterize(genome, config.dims))
        raw = [_evaluate_grid(grid, config) for grid in grids]
        failed = sum(1 for f in raw if f is None)
        fitnesses = [0.0 if f is None else f for f in raw]

        best_idx = int(np.argmax(fitnesses))
        stats.append(
            GenerationStats(
                generation=generation,
                best=float(fitnesses[best_idx]),
                mean=float(np.mean(fitnesses)),
                worst=float(np.min(fitnesses)),
                failed=failed,
            )
        )
        if config.representation == "cppn":
            champions.append(cppn.to_json(population[best_idx]))
        else:
            champions.append(bezier.to_json(population[best_idx]))
        champion_grid = grids[best_idx]

        if generation < config.generations - 1:
            if config.representation == "cppn":
                population, species_state = neat.next_generation(
                    population, fitnesses, registry, neat_config, rng, species_state
                )
            else:
                population = bezier.next_generation_ga(
                    population, fitnesses, ga_config, rng
                )

    assert champion_grid is not None
    return RunResult(repeat, seed_key, stats, champions, champion_grid)


def run_experiment(config: ExperimentConfig) -> RunArchive:
    """Execute all repeats and (if configured) write the archive directory."""
    runs = [_run_single_repeat(config, r) for r in range(config.repeats)]
    archive = RunArchive(config, runs)
    if config.output_dir is not None:
        write_archive(archive, config.output_dir)
    return archive


def _config_snapshot(config: ExperimentConfig) -> dict:
    doc = asdict(config)
    doc["dims"] = asdict(config.dims)
    doc["rig"] = asdict(config.rig)
    doc["trajectory"] = asdict(config.trajectory)
    return doc


def write_archive(archive: RunArchive, out_dir: str) -> None:
    """Persist config snapshot, seed ledger, stats CSV, plot and champions."""
    os.makedirs(out_dir, exist_ok=True)
    snapshot = _config_snapshot(archive.config)
    snapshot["seed_ledger"] = [run.seed for run in archive.runs]
    with open(os.path.join(out_dir, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(snapshot, fh, indent=2)
    export_stats_csv(archive, os.path.join(out_dir, "stats.csv"))
    plotting.render_fitness_plot(
        archive.stats_array(),
        os.path.join(out_dir, "plot.svg"),
        title=f"{archive.config.representation} / {archive.config.environment}",
    )
    for run in archive.runs:
        run_dir = os.path.join(out_dir, f"run_{run.repeat}")
        for generation, champion in enumerate(run.champions):
            gen_dir = os.path.join(run_dir, f"gen_{generation}")
            os.makedirs(gen_dir, exist_ok=True)
            with open(
                os.path.join(gen_dir, "champion.json"), "w", encoding="utf-8"
            ) as fh:
                fh.write(champion)
        champion_mesh = mesh.voxel_to_mesh(run.final_champion_grid)
        mesh.write_stl(champion_mesh, os.path.join(run_dir, "champion.stl"))
        mesh.write_obj(champion_mesh, os.path.join(run_dir, "champion.obj"))


def export_stats_csv(archive: RunArchive, destination) -> None:
    """One row per (repeat, generation); floats use full-precision repr."""
    with open(destination, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("repeat,generation,best,mean,worst\n")
        for run in archive.runs:
            for g in run.stats:
                fh.write(f"{run.repeat},{g.generation},{g.best!r},{g.mean!r},{g.worst!r}\n")


def read_stats_csv(source) -> dict[int, list[GenerationStats]]:
    """Parse a stats CSV back into per-repeat generation stats."""
    by_repeat: dict[int, list[GenerationStats]] = {}
    with open(source, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "repeat,generation,best,mean,worst":
            raise ValueError(f"unexpected stats header: {header}")
        for line in fh:
            repeat_s, gen_s, best_s, mean_s, worst_s = line.strip().split(",")
            by_repeat.setdefault(int(repeat_s), []).append(
                GenerationStats(int(gen_s), float(best_s), float(mean_s), float(worst_s))
            )
    return by_repeat


def final_bests_from_dir(archive_dir: str) -> list[float]:
    by_repeat = read_stats_csv(os.path.join(archive_dir, "stats.csv"))
    return [stats[-1].best for _, stats in sorted(by_repeat.items())]


def compare_runs(final_bests_a: list[float], final_bests_b: list[float]) -> dict:
    """Mann-Whitney comparison of two sets of per-run final best fitnesses."""
    if len(final_bests_a) < 2 or len(final_bests_b) < 2:
        raise ValueError("each archive set needs at least 2 runs")
    u, p = mann_whitney_u(final_bests_a, final_bests_b)
    return {
        "n_a": len(final_bests_a),
        "n_b": len(final_bests_b),
        "U": u,
        "p": p,
        "significant": p < 0.05,
    }
