"""NEAT evolution over CPPN genomes.

Innovation ids give crossover a gene alignment; speciation with fitness
sharing protects new topology.  Mutation probabilities follow the run
configuration (add node 0.1, add connection 0.25, weight perturbation 0.25,
activation re-draw 0.1); turnover keeps one elite and fills species quotas
by largest-remainder apportionment of adjusted fitness.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from voxleg.cppn import (
    ALL_ACTIVATIONS,
    ConnGene,
    CppnGenome,
    NodeGene,
)

INPUT_NODE_IDS = (0, 1, 2)
OUTPUT_NODE_ID = 3


class InconsistentInputError(ValueError):
    """Fitness list does not match the population."""


@dataclass
class NeatConfig:
    population_size: int = 20
    elitism: int = 1
    p_no_crossover: float = 0.25
    p_interspecies: float = 0.05
    p_add_node: float = 0.1
    p_add_connection: float = 0.25
    p_mutate_weight: float = 0.25
    p_mutate_activation: float = 0.1
    weight_perturb_sigma: float = 0.5
    c1: float = 1.0
    c2: float = 1.0
    c3: float = 0.4
    compatibility_threshold: float = 3.0
    stagnation_limit: int = 15

    def __post_init__(self) -> None:
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        for name in (
            "p_no_crossover",
            "p_interspecies",
            "p_add_node",
            "p_add_connection",
            "p_mutate_weight",
            "p_mutate_activation",
        ):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")


class InnovationRegistry:
    """Monotone id counters plus a per-generation structural-mutation memo.

    Identical structural mutations within one generation receive identical
    ids; the memo is cleared at generation end, the counters never reset.
    """

    def __init__(
        self, next_node_id: int = OUTPUT_NODE_ID + 1, next_innovation_id: int = 3
    ) -> None:
        self.next_node_id = next_node_id
        self.next_innovation_id = next_innovation_id
        self._split_memo: dict[int, tuple[int, int, int]] = {}
        self._conn_memo: dict[tuple[int, int], int] = {}

    def connection_innovation(self, source: int, target: int) -> int:
        key = (source, target)
        if key not in self._conn_memo:
            self._conn_memo[key] = self.next_innovation_id
            self.next_innovation_id += 1
        return self._conn_memo[key]

    def split_ids(self, connection_innovation: int) -> tuple[int, int, int]:
        """(new node id, incoming innovation, outgoing innovation) for a split."""
        if connection_innovation not in self._split_memo:
            node_id = self.next_node_id
            self.next_node_id += 1
            in_id = self.next_innovation_id
            out_id = self.next_innovation_id + 1
            self.next_innovation_id += 2
            self._split_memo[connection_innovation] = (node_id, in_id, out_id)
        return self._split_memo[connection_innovation]

    def clear_generation(self) -> None:
        self._split_memo.clear()
        self._conn_memo.clear()


@dataclass
class Species:
    species_id: int
    representative: CppnGenome
    member_indices: list[int] = field(default_factory=list)
    best_fitness_ever: float = float("-inf")
    stagnation_counter: int = 0


@dataclass
class SpeciesState:
    species: list[Species] = field(default_factory=list)
    next_species_id: int = 1


def init_population(
    config: NeatConfig, rng: np.random.Generator
) -> list[CppnGenome]:
    """Minimal unevolved genomes: 3 inputs fully connected to 1 output.

    All members share the same structure, hence the same innovation ids
    (0, 1, 2); weights are uniform in [-1, 1] and the output activation is
    drawn uniformly from the six kinds.
    """
    population = []
    for _ in range(config.population_size):
        activation = ALL_ACTIVATIONS[rng.integers(len(ALL_ACTIVATIONS))]
        nodes = tuple(NodeGene(i, "input") for i in INPUT_NODE_IDS) + (
            NodeGene(OUTPUT_NODE_ID, "output", activation),
        )
        connections = tuple(
            ConnGene(i, INPUT_NODE_IDS[i], OUTPUT_NODE_ID, float(rng.uniform(-1, 1)))
            for i in range(3)
        )
        population.append(CppnGenome(nodes=nodes, connections=connections))
    return population


def compatibility_distance(
    g1: CppnGenome, g2: CppnGenome, config: NeatConfig
) -> float:
    """delta = c1*E/N + c2*D/N + c3*Wbar over innovation-aligned genes."""
    conns1 = {c.innovation_id: c for c in g1.connections}
    conns2 = {c.innovation_id: c for c in g2.connections}
    if not conns1 and not conns2:
        return 0.0
    max1 = max(conns1, default=-1)
    max2 = max(conns2, default=-1)
    cutoff = min(max1, max2)
    matching = conns1.keys() & conns2.keys()
    excess = disjoint = 0
    for innovation in conns1.keys() ^ conns2.keys():
        if innovation > cutoff:
            excess += 1
        else:
            disjoint += 1
    weight_diff = (
        sum(abs(conns1[i].weight - conns2[i].weight) for i in matching) / len(matching)
        if matching
        else 0.0
    )
    n = max(len(conns1), len(conns2))
    if len(conns1) < 20 and len(conns2) < 20:
        n = 1
    return config.c1 * excess / n + config.c2 * disjoint / n + config.c3 * weight_diff


def crossover(
    fitter: CppnGenome, other: CppnGenome, rng: np.random.Generator
) -> CppnGenome:
    """Innovation-aligned recombination; structure follows the fitter parent.

    Matching genes come from either parent with equal probability; disjoint
    and excess genes come from the fitter only.  A gene disabled in either
    parent stays disabled in the child with probability 0.75.
    """
    other_conns = {c.innovation_id: c for c in other.connections}
    child_conns = []
    for gene in fitter.connections:
        partner = other_conns.get(gene.innovation_id)
        chosen = gene
        if partner is not None and rng.random() < 0.5:
            chosen = replace(partner, enabled=gene.enabled)
        enabled = chosen.enabled
        if partner is not None and (not gene.enabled or not partner.enabled):
            enabled = rng.random() >= 0.75
        elif not gene.enabled:
            enabled = rng.random() >= 0.75
        child_conns.append(replace(chosen, enabled=enabled))
    return CppnGenome(nodes=fitter.nodes, connections=tuple(child_conns))


def _would_cycle(genome: CppnGenome, source: int, target: int) -> bool:
    """True iff adding source->target closes a cycle (target reaches source)."""
    out_edges: dict[int, list[int]] = {}
    for c in genome.connections:
        out_edges.setdefault(c.source, []).append(c.target)
    stack = [target]
    seen = set()
    while stack:
        node = stack.pop()
        if node == source:
            return True
        if node in seen:
            continue
        seen.add(node)
        stack.extend(out_edges.get(node, ()))
    return False


def mutate(
    genome: CppnGenome,
    registry: InnovationRegistry,
    config: NeatConfig,
    rng: np.random.Generator,
) -> CppnGenome:
    """Apply the four independent mutation operators in a fixed order."""
    nodes = list(genome.nodes)
    connections = list(genome.connections)

    if rng.random() < config.p_mutate_weight:
        connections = [
            replace(c, weight=c.weight + float(rng.normal(0, config.weight_perturb_sigma)))
            for c in connections
        ]

    if rng.random() < config.p_mutate_activation:
        candidates = [i for i, n in enumerate(nodes) if n.role != "input"]
        idx = candidates[rng.integers(len(candidates))]
        new_kind = ALL_ACTIVATIONS[rng.integers(len(ALL_ACTIVATIONS))]
        nodes[idx] = replace(nodes[idx], activation=new_kind)

    if rng.random() < config.p_add_connection:
        existing = {(c.source, c.target) for c in connections}
        probe = CppnGenome(nodes=tuple(nodes), connections=tuple(connections))
        node_ids = [n.node_id for n in nodes]
        target_ids = [n.node_id for n in nodes if n.role != "input"]
        for _ in range(20):
            source = node_ids[rng.integers(len(node_ids))]
            target = target_ids[rng.integers(len(target_ids))]
            if source == target or (source, target) in existing:
                continue
            if _would_cycle(probe, source, target):
                continue
            connections.append(
                ConnGene(
                    registry.connection_innovation(source, target),
                    source,
                    target,
                    float(rng.uniform(-1, 1)),
                )
            )
            break

    if rng.random() < config.p_add_node:
        enabled = [i for i, c in enumerate(connections) if c.enabled]
        if enabled:
            idx = enabled[rng.integers(len(enabled))]
            old = connections[idx]
            node_id, in_innov, out_innov = registry.split_ids(old.innovation_id)
            # A same-generation memoized split may already be present via
            # crossover; re-splitting would duplicate the node id.
            if all(n.node_id != node_id for n in nodes):
                activation = ALL_ACTIVATIONS[rng.integers(len(ALL_ACTIVATIONS))]
                connections[idx] = replace(old, enabled=False)
                nodes.append(NodeGene(node_id, "hidden", activation))
                connections.append(ConnGene(in_innov, old.source, node_id, 1.0))
                connections.append(ConnGene(out_innov, node_id, old.target, old.weight))

    return CppnGenome(nodes=tuple(nodes), connections=tuple(connections))


def _largest_remainder(weights: list[float], total: int) -> list[int]:
    """Integer apportionment of ``total`` proportional to ``weights``."""
    if not weights:
        return []
    weight_sum = sum(weights)
    if weight_sum <= 0:
        weights = [1.0] * len(weights)
        weight_sum = float(len(weights))
    shares = [w / weight_sum * total for w in weights]
    counts = [int(np.floor(s)) for s in shares]
    remainders = [(s - c, -i) for i, (s, c) in enumerate(zip(shares, counts))]
    short = total - sum(counts)
    for _, neg_i in sorted(remainders, reverse=True)[:short]:
        counts[-neg_i] += 1
    return counts


def _fitness_proportionate(
    indices: list[int], weights: list[float], rng: np.random.Generator
) -> int:
    total = sum(weights)
    if total <= 0:
        return indices[rng.integers(len(indices))]
    pick = rng.random() * total
    acc = 0.0
    for idx, w in zip(indices, weights):
        acc += w
        if pick < acc:
            return idx
    return indices[-1]


def next_generation(
    population: list[CppnGenome],
    fitnesses: list[float],
    registry: InnovationRegistry,
    config: NeatConfig,
    rng: np.random.Generator,
    state: SpeciesState | None = None,
) -> tuple[list[CppnGenome], SpeciesState]:
    """One NEAT generation turnover; returns the new population and species.

    Speciates against previous-generation representatives, shares fitness
    within species, apportions offspring by summed adjusted fitness, copies
    the global best unchanged, and mutates every other offspring.  Stagnant
    species are excluded from reproduction unless they hold the global best.
    """
    if len(fitnesses) != len(population):
        raise InconsistentInputError(
            f"{len(fitnesses)} fitnesses for {len(population)} genomes"
        )
    state = state or SpeciesState()
    population = [
        replace(g, fitness=float(f)) for g, f in zip(population, fitnesses)
    ]

    # --- speciation against previous representatives -----------------------
    for sp in state.species:
        sp.member_indices = []
    for idx, genome in enumerate(population):
        home = None
        for sp in state.species:
            if (
                compatibility_distance(genome, sp.representative, config)
                < config.compatibility_threshold
            ):
                home = sp
                break
        if home is None:
            home = Species(state.next_species_id, representative=genome)
            state.next_species_id += 1
            state.species.append(home)
        home.member_indices.append(idx)
    state.species = [sp for sp in state.species if sp.member_indices]
    for sp in state.species:
        for idx in sp.member_indices:
            population[idx] = replace(population[idx], species_id=sp.species_id)

    # --- stagnation bookkeeping --------------------------------------------
    for sp in state.species:
        best = max(fitnesses[i] for i in sp.member_indices)
        if best > sp.best_fitness_ever:
            sp.best_fitness_ever = best
            sp.stagnation_counter = 0
        else:
            sp.stagnation_counter += 1

    best_idx = int(np.argmax(fitnesses))
    eligible = [
        sp
        for sp in state.species
        if sp.stagnation_counter < config.stagnation_limit
        or best_idx in sp.member_indices
    ]

    # --- fitness sharing and offspring quotas -------------------------------
    adjusted = {
        sp.species_id: [fitnesses[i] / len(sp.member_indices) for i in sp.member_indices]
        for sp in eligible
    }
    quotas = _largest_remainder(
        [sum(adjusted[sp.species_id]) for sp in eligible], config.population_size
    )
    quota_by_id = {sp.species_id: q for sp, q in zip(eligible, quotas)}
    best_species = next(sp for sp in state.species if best_idx in sp.member_indices)
    if quota_by_id.get(best_species.species_id, 0) == 0:
        donor = max(quota_by_id, key=lambda sid: (quota_by_id[sid], -sid))
        quota_by_id[donor] -= 1
        quota_by_id[best_species.species_id] = 1

    # --- reproduction --------------------------------------------------------
    new_population: list[CppnGenome] = [population[best_idx]]

    def pick_parent(sp: Species) -> CppnGenome:
        idx = _fitness_proportionate(sp.member_indices, adjusted[sp.species_id], rng)
        return population[idx]

    for sp in eligible:
        count = quota_by_id.get(sp.species_id, 0)
        if sp.species_id == best_species.species_id:
            count -= 1  # the elite already fills one slot
        for _ in range(count):
            if rng.random() < config.p_no_crossover or len(sp.member_indices) == 1:
                child = pick_parent(sp)
            else:
                p1 = pick_parent(sp)
                mates = [s for s in eligible if s.species_id != sp.species_id]
                if mates and rng.random() < config.p_interspecies:
                    p2 = pick_parent(mates[rng.integers(len(mates))])
                else:
                    p2 = pick_parent(sp)
                f1 = p1.fitness if p1.fitness is not None else 0.0
                f2 = p2.fitness if p2.fitness is not None else 0.0
                child = crossover(p1, p2, rng) if f1 >= f2 else crossover(p2, p1, rng)
            new_population.append(mutate(child, registry, config, rng))

    # --- representatives for next generation come from this generation ------
    for sp in state.species:
        sp.representative = population[sp.member_indices[0]]
    registry.clear_generation()
    return new_population, state
