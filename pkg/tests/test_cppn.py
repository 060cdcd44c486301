"""CPPN query semantics, decoding, constraint repair, and JSON round-trips."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import oracle_is_compliant, random_cppn_genome
from voxleg.cppn import (
    ALL_ACTIVATIONS,
    ActivationKind,
    ConnGene,
    CppnGenome,
    CyclicGenomeError,
    GenomeParseError,
    GenomeValidationError,
    NodeGene,
    decode,
    decode_adaptive_threshold,
    decode_scaled,
    evaluate_field,
    from_json,
    query,
    sample_field,
    to_json,
    topo_order,
    validate_genome,
)
from voxleg.voxels import GridDims, connected_components, is_compliant

DIMS = GridDims(16, 32, 16)


def minimal_genome(
    output_activation=ActivationKind.SIGMOID, weights=(0.0, 0.0, 0.0)
) -> CppnGenome:
    """Three inputs wired straight to one output node."""
    return CppnGenome(
        nodes=(
            NodeGene(0, "input"),
            NodeGene(1, "input"),
            NodeGene(2, "input"),
            NodeGene(3, "output", output_activation),
        ),
        connections=tuple(
            ConnGene(i, i, 3, w) for i, w in enumerate(weights)
        ),
    )


def constant_genome(value: float) -> CppnGenome:
    """Genome whose output field is the constant ``value`` everywhere.

    A hidden sigmoid node with no inputs emits sigmoid(0) = 0.5; an identity
    output scales it by 2 * value.
    """
    return CppnGenome(
        nodes=(
            NodeGene(0, "input"),
            NodeGene(1, "input"),
            NodeGene(2, "input"),
            NodeGene(3, "output", ActivationKind.IDENTITY),
            NodeGene(4, "hidden", ActivationKind.SIGMOID),
        ),
        connections=(ConnGene(0, 4, 3, 2.0 * value),),
    )


class TestActivations:
    def test_formulas(self):
        x = np.array([-1.2, 0.0, 0.7])
        assert np.allclose(ActivationKind.SINE.apply(x), np.sin(x))
        assert np.allclose(ActivationKind.COSINE.apply(x), np.cos(x))
        assert np.allclose(ActivationKind.IDENTITY.apply(x), x)
        assert np.allclose(ActivationKind.GAUSSIAN.apply(x), np.exp(-(x**2)))
        assert np.allclose(ActivationKind.ABSOLUTE.apply(x), np.abs(x))
        assert np.allclose(
            ActivationKind.SIGMOID.apply(x), 1.0 / (1.0 + np.exp(-x))
        )

    def test_six_kinds(self):
        assert len(ALL_ACTIVATIONS) == 6


class TestQuery:
    def test_sigmoid_of_zero_sum(self):
        # All weights zero: the output node sees 0 and sigmoid(0) = 0.5.
        assert query(minimal_genome(), 0.3, -0.8, 0.1) == 0.5

    def test_absolute_negative_weight(self):
        g = minimal_genome(ActivationKind.ABSOLUTE, weights=(-1.0, 0.0, 0.0))
        assert query(g, 0.3, 0.0, 0.0) == pytest.approx(0.3, abs=1e-15)

    def test_output_clamped_to_unit_interval(self):
        high = minimal_genome(ActivationKind.IDENTITY, weights=(5.0, 0.0, 0.0))
        low = minimal_genome(ActivationKind.IDENTITY, weights=(5.0, 0.0, 0.0))
        assert query(high, 1.0, 0.0, 0.0) == 1.0
        assert query(low, -1.0, 0.0, 0.0) == 0.0

    def test_inputs_feed_by_ascending_node_id(self):
        gx = minimal_genome(ActivationKind.IDENTITY, weights=(1.0, 0.0, 0.0))
        gy = minimal_genome(ActivationKind.IDENTITY, weights=(0.0, 1.0, 0.0))
        gz = minimal_genome(ActivationKind.IDENTITY, weights=(0.0, 0.0, 1.0))
        assert query(gx, 0.25, 0.5, 0.75) == pytest.approx(0.25)
        assert query(gy, 0.25, 0.5, 0.75) == pytest.approx(0.5)
        assert query(gz, 0.25, 0.5, 0.75) == pytest.approx(0.75)

    def test_disabled_connection_contributes_nothing(self):
        g = minimal_genome(ActivationKind.IDENTITY, weights=(1.0, 0.0, 0.0))
        g = CppnGenome(
            nodes=g.nodes,
            connections=tuple(
                ConnGene(c.innovation_id, c.source, c.target, c.weight, enabled=False)
                if c.innovation_id == 0
                else c
                for c in g.connections
            ),
        )
        assert query(g, 1.0, 0.0, 0.0) == 0.0

    def test_hidden_chain_hand_computed(self):
        # x -> gaussian hidden (w=2) -> output sine (w=0.5)
        g = CppnGenome(
            nodes=(
                NodeGene(0, "input"),
                NodeGene(1, "input"),
                NodeGene(2, "input"),
                NodeGene(3, "output", ActivationKind.SINE),
                NodeGene(4, "hidden", ActivationKind.GAUSSIAN),
            ),
            connections=(ConnGene(0, 0, 4, 2.0), ConnGene(1, 4, 3, 0.5)),
        )
        x = 0.4
        expected = math.sin(0.5 * math.exp(-((2.0 * x) ** 2)))
        assert query(g, x, 0.0, 0.0) == pytest.approx(expected, abs=1e-15)

    def test_field_matches_pointwise_queries(self, rng):
        g = random_cppn_genome(rng)
        dims = GridDims(4, 5, 3)
        field = sample_field(g, dims)
        for i in (0, 3):
            for j in (0, 4):
                for k in (0, 2):
                    x = 2.0 * (i + 0.5) / dims.nx - 1.0
                    y = 2.0 * (j + 0.5) / dims.ny - 1.0
                    z = 2.0 * (k + 0.5) / dims.nz - 1.0
                    assert field[i, j, k] == query(g, x, y, z)

    def test_resolution_independence(self, rng):
        # The same normalized coordinate gives the same value regardless of
        # which grid resolution originally motivated the query.
        g = random_cppn_genome(rng)
        coords = rng.uniform(-1, 1, size=(20, 3))
        a = evaluate_field(g, coords[:, 0], coords[:, 1], coords[:, 2])
        b = np.array([query(g, *c) for c in coords])
        assert np.array_equal(a, b)


class TestValidationAndTopoOrder:
    def test_minimal_genome_is_valid(self):
        validate_genome(minimal_genome())

    def test_wrong_input_count(self):
        g = minimal_genome()
        bad = CppnGenome(nodes=g.nodes[1:], connections=())
        with pytest.raises(GenomeValidationError):
            validate_genome(bad)

    def test_input_with_activation_rejected(self):
        g = minimal_genome()
        nodes = (NodeGene(0, "input", ActivationKind.SINE),) + g.nodes[1:]
        with pytest.raises(GenomeValidationError):
            validate_genome(CppnGenome(nodes=nodes, connections=g.connections))

    def test_duplicate_connection_rejected(self):
        g = minimal_genome()
        conns = g.connections + (ConnGene(9, 0, 3, 1.0),)
        with pytest.raises(GenomeValidationError):
            validate_genome(CppnGenome(nodes=g.nodes, connections=conns))

    def test_cycle_rejected(self):
        nodes = (
            NodeGene(0, "input"),
            NodeGene(1, "input"),
            NodeGene(2, "input"),
            NodeGene(3, "output", ActivationKind.IDENTITY),
            NodeGene(4, "hidden", ActivationKind.IDENTITY),
            NodeGene(5, "hidden", ActivationKind.IDENTITY),
        )
        conns = (
            ConnGene(0, 4, 5, 1.0),
            ConnGene(1, 5, 4, 1.0),
            ConnGene(2, 4, 3, 1.0),
        )
        with pytest.raises(CyclicGenomeError):
            validate_genome(CppnGenome(nodes=nodes, connections=conns))

    def test_topo_order_visits_each_node_once(self, rng):
        for _ in range(25):
            g = random_cppn_genome(rng)
            order = topo_order(g)
            assert sorted(order) == sorted(n.node_id for n in g.nodes)
            pos = {n: i for i, n in enumerate(order)}
            for c in g.connections:
                assert pos[c.source] < pos[c.target]


class TestDecoding:
    def test_constant_above_threshold_fills_grid(self):
        grid = decode(constant_genome(0.5), DIMS, 0.5)
        assert grid.occupied_count == DIMS.cell_count

    def test_constant_below_threshold_empties_grid(self):
        grid = decode(constant_genome(0.49), DIMS, 0.5)
        assert grid.occupied_count == 0

    def test_threshold_range_checked(self):
        with pytest.raises(ValueError):
            decode(constant_genome(0.5), DIMS, 1.5)

    def test_decode_deterministic(self, rng):
        g = random_cppn_genome(rng)
        assert decode(g, DIMS, 0.5) == decode(g, DIMS, 0.5)

    @settings(max_examples=30, deadline=None)
    @given(
        seed=st.integers(0, 2**32 - 1),
        t1=st.floats(0.0, 1.0),
        t2=st.floats(0.0, 1.0),
    )
    def test_threshold_monotonicity(self, seed, t1, t2):
        lo, hi = sorted((t1, t2))
        g = random_cppn_genome(np.random.default_rng(seed))
        grid_lo = decode(g, GridDims(6, 8, 6), lo)
        grid_hi = decode(g, GridDims(6, 8, 6), hi)
        assert bool(np.all(grid_lo.occupancy >= grid_hi.occupancy))


class TestAdaptiveThreshold:
    def test_compliant_at_half_stops_immediately(self):
        grid, threshold = decode_adaptive_threshold(constant_genome(0.6), DIMS)
        assert threshold == 0.5
        assert grid.occupied_count == DIMS.cell_count

    def test_constant_point_two_terminates_at_exactly_0_20(self):
        grid, threshold = decode_adaptive_threshold(constant_genome(0.2), DIMS)
        assert threshold == 0.20
        assert grid.occupied_count == DIMS.cell_count

    def test_always_compliant(self, rng):
        for _ in range(40):
            g = random_cppn_genome(rng)
            grid, threshold = decode_adaptive_threshold(g, DIMS)
            assert is_compliant(grid)
            assert oracle_is_compliant(grid)
            assert 0.0 <= threshold <= 0.5
            # The schedule only visits multiples of 0.05.
            assert round(threshold * 20) == pytest.approx(threshold * 20)


class TestDecodeScaled:
    def test_compliant_decode_is_untouched(self):
        g = constant_genome(0.7)
        assert decode_scaled(g, DIMS) == decode(g, DIMS, 0.5)

    def test_blob_scaled_to_span_height(self):
        # Field is high only in a y-band; the blob gets rescaled vertically.
        g = CppnGenome(
            nodes=(
                NodeGene(0, "input"),
                NodeGene(1, "input"),
                NodeGene(2, "input"),
                NodeGene(3, "output", ActivationKind.GAUSSIAN),
            ),
            connections=(ConnGene(0, 1, 3, 3.0),),
        )
        raw = decode(g, DIMS, 0.5)
        assert 0 < raw.occupied_count < DIMS.cell_count
        assert not is_compliant(raw)
        repaired = decode_scaled(g, DIMS)
        assert bool(repaired.occupancy[:, 0, :].any())
        assert bool(repaired.occupancy[:, DIMS.ny - 1, :].any())
        assert is_compliant(repaired)

    def test_empty_decode_falls_back_and_repairs(self):
        repaired = decode_scaled(constant_genome(0.1), DIMS)
        assert is_compliant(repaired)

    def test_always_compliant_single_component(self, rng):
        for _ in range(40):
            g = random_cppn_genome(rng)
            grid = decode_scaled(g, DIMS)
            assert oracle_is_compliant(grid)
            if not is_compliant(decode(g, DIMS, 0.5)):
                assert connected_components(grid).component_count == 1


class TestJson:
    def test_round_trip_minimal(self):
        g = minimal_genome(ActivationKind.COSINE, weights=(0.25, -1.5, 1e-17))
        assert from_json(to_json(g)) == g

    def test_round_trip_preserves_disabled_flags(self):
        g = minimal_genome()
        g = CppnGenome(
            nodes=g.nodes,
            connections=(
                ConnGene(0, 0, 3, 0.5, enabled=False),
                ConnGene(1, 1, 3, -0.5, enabled=True),
                ConnGene(2, 2, 3, 0.125, enabled=True),
            ),
        )
        back = from_json(to_json(g))
        assert back == g
        assert back.connections[0].enabled is False

    def test_round_trip_random_genomes(self, rng):
        for _ in range(100):
            g = random_cppn_genome(rng)
            assert from_json(to_json(g)) == g

    def test_parse_error_carries_location(self):
        with pytest.raises(GenomeParseError, match=r"line \d+ column \d+"):
            from_json('{"nodes": [,]}')

    def test_missing_field_is_parse_error(self):
        with pytest.raises(GenomeParseError):
            from_json('{"nodes": [{"id": 0}], "connections": []}')

    def test_invalid_genome_is_validation_error(self):
        doc = (
            '{"nodes": [{"id": 0, "role": "input", "activation": null}],'
            ' "connections": []}'
        )
        with pytest.raises(GenomeValidationError):
            from_json(doc)
