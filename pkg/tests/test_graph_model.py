import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thetacover.graphs import (
    CliquePartition,
    Graph,
    GraphFileError,
    HoeffdingBound,
    PlantedInstance,
    complement,
    cross_edge_count,
    generate_planted,
    hoeffding_bound,
    read_graph,
    recovery_threshold,
    recovery_threshold_fraction,
    scc_parameter,
    write_graph,
)


# --- generation -----------------------------------------------------------


def test_p_zero_gives_disjoint_triangles():
    inst = generate_planted([3, 3], 0.0, 0)
    assert len(inst.graph.edges) == 6
    assert inst.partition.blocks == ((0, 1, 2), (3, 4, 5))
    assert scc_parameter(inst.graph, inst.partition) == 0


def test_p_one_gives_complete_graph():
    inst = generate_planted([3, 3], 1.0, 0)
    assert len(inst.graph.edges) == 15  # K6
    assert scc_parameter(inst.graph, inst.partition) == 1


def test_generation_is_deterministic():
    a = generate_planted([8] * 8, 0.2, 1234)
    b = generate_planted([8] * 8, 0.2, 1234)
    assert a.graph.edges == b.graph.edges
    c = generate_planted([8] * 8, 0.2, 1235)
    assert a.graph.edges != c.graph.edges


def test_blocks_are_contiguous_ranges():
    inst = generate_planted([2, 3, 4], 0.5, 7)
    assert inst.partition.blocks == ((0, 1), (2, 3, 4), (5, 6, 7, 8))


def test_within_block_pairs_always_present():
    inst = generate_planted([4, 5], 0.3, 99)
    for block in inst.partition.blocks:
        for i in block:
            for j in block:
                if i < j:
                    assert inst.graph.has_edge(i, j)


@pytest.mark.parametrize(
    "sizes,p",
    [([], 0.5), ([0, 3], 0.5), ([3], -0.1), ([3], 1.5)],
)
def test_generation_rejects_bad_inputs(sizes, p):
    with pytest.raises(ValueError):
        generate_planted(sizes, p, 0)


def test_planted_instance_validates_cliques():
    g = Graph.from_edges(4, [(0, 1), (2, 3)])
    part = CliquePartition.from_blocks([[0, 1, 2], [3]])
    with pytest.raises(ValueError):
        PlantedInstance(g, part, 0.0, 0)


# --- complement -----------------------------------------------------------


def test_complement_of_complete_is_empty():
    k6 = generate_planted([6], 1.0, 0).graph
    assert complement(k6).edges == frozenset()


def test_complement_of_empty_is_complete():
    g = Graph(4, frozenset())
    assert len(complement(g).edges) == 6


def test_five_cycle_complement_is_enumerated_five_cycle():
    c5 = Graph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)])
    # direct enumeration of the missing pairs of C5
    assert complement(c5).edges == frozenset({(0, 2), (0, 3), (1, 3), (1, 4), (2, 4)})


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 9), st.data())
def test_complement_is_an_involution(n, data):
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    chosen = data.draw(st.lists(st.sampled_from(pairs), unique=True))
    g = Graph.from_edges(n, chosen)
    assert complement(complement(g)).edges == g.edges


# --- structure measurements -------------------------------------------------


def _two_block_fixture():
    """Blocks {0,1,2} and {3,4,5}, cross edges (0,3) and (0,4) only."""
    edges = [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5), (0, 3), (0, 4)]
    return Graph.from_edges(6, edges), CliquePartition.contiguous([3, 3])


def test_cross_edge_count_on_fixture():
    g, part = _two_block_fixture()
    assert cross_edge_count(g, part, 0, 1) == 2
    assert cross_edge_count(g, part, 1, 1) == 0
    assert cross_edge_count(g, part, 3, 0) == 1


def test_cross_edge_count_disjoint_and_complete():
    dj = generate_planted([4, 5], 0.0, 0)
    assert cross_edge_count(dj.graph, dj.partition, 0, 1) == 0
    full = generate_planted([4, 5], 1.0, 0)
    assert cross_edge_count(full.graph, full.partition, 0, 1) == 5


def test_cross_edge_count_rejects_own_block():
    g, part = _two_block_fixture()
    with pytest.raises(ValueError):
        cross_edge_count(g, part, 0, 0)


def test_scc_parameter_values():
    g, part = _two_block_fixture()
    assert scc_parameter(g, part) == Fraction(2, 3)
    dj = generate_planted([3, 4], 0.0, 0)
    assert scc_parameter(dj.graph, dj.partition) == 0
    full = generate_planted([3, 3], 1.0, 0)
    assert scc_parameter(full.graph, full.partition) == 1


def test_scc_parameter_rejects_non_clique_partition():
    g = Graph.from_edges(4, [(0, 1)])
    part = CliquePartition.from_blocks([[0, 1, 2], [3]])
    with pytest.raises(ValueError):
        scc_parameter(g, part)


def test_scc_parameter_monotone_under_cross_edge_addition():
    rng = np.random.default_rng(5)
    inst = generate_planted([5, 6, 4], 0.1, 3)
    g, part = inst.graph, inst.partition
    block_of = part.block_of()
    current = scc_parameter(g, part)
    missing = [
        (i, j)
        for i in range(g.n)
        for j in range(i + 1, g.n)
        if block_of[i] != block_of[j] and not g.has_edge(i, j)
    ]
    for idx in rng.choice(len(missing), size=8, replace=False):
        g = Graph(g.n, g.edges | {missing[int(idx)]})
        nxt = scc_parameter(g, part)
        assert nxt >= current
        current = nxt


# --- recovery threshold and tail bound --------------------------------------


def test_recovery_threshold_examples():
    # ten equal blocks: (1/4) * (1/10)^2 = 1/400 < 1/100
    p10 = CliquePartition.contiguous([7] * 10)
    assert recovery_threshold(p10) == pytest.approx(0.0025, abs=0)
    assert recovery_threshold_fraction(p10) == Fraction(1, 400)
    # two equal blocks: (1/4) * (1/2)^2 = 1/16, capped by 1/100
    p2 = CliquePartition.contiguous([5, 5])
    assert recovery_threshold(p2) == pytest.approx(0.01, abs=0)
    # sizes [2, 4]: (1/4) * ((1/4)/(3/4))^2 = 1/36 > 1/100 -> 0.01
    p24 = CliquePartition.contiguous([2, 4])
    assert recovery_threshold_fraction(p24) == Fraction(1, 100)


def test_hoeffding_bound_large_blocks():
    # direct formula evaluation: 1 - 2 * 5000 * exp(-2 * 5000 * 0.05^2)
    expected = 1.0 - 10_000 * math.exp(-25.0)
    got = hoeffding_bound([5000, 5000], 0.2, 0.25)
    assert got.raw == pytest.approx(expected, rel=1e-12)
    assert got.raw == pytest.approx(0.9999998611205614, rel=1e-12)
    assert got.clamped == got.raw


def test_hoeffding_bound_vacuous_at_desk_scale():
    # 1 - 10 * 10 * 9 * exp(-2 * 10 * 0.05^2) = 1 - 900 exp(-0.05)
    expected = 1.0 - 900.0 * math.exp(-0.05)
    got = hoeffding_bound([10] * 10, 0.2, 0.25)
    assert got.raw == pytest.approx(expected, rel=1e-12)
    assert got.raw == pytest.approx(-855.1064820506426, rel=1e-12)
    assert got.clamped == 0.0


def test_hoeffding_bound_tends_to_one():
    small = hoeffding_bound([50, 50], 0.1, 0.3).clamped
    large = hoeffding_bound([5000, 5000], 0.1, 0.3).clamped
    assert large > small or large == 1.0
    assert large > 0.999999


def test_hoeffding_bound_requires_p_below_c():
    with pytest.raises(ValueError):
        hoeffding_bound([10, 10], 0.3, 0.3)
    assert isinstance(hoeffding_bound([10, 10], 0.1, 0.2), HoeffdingBound)


# --- file format -------------------------------------------------------------


def test_round_trip(tmp_path):
    inst = generate_planted([3, 4, 2], 0.4, 11)
    path = tmp_path / "g.json"
    write_graph(path, inst.graph, inst.partition, inst.p, inst.seed)
    g, part = read_graph(path)
    assert g.edges == inst.graph.edges
    assert g.n == inst.graph.n
    assert part.blocks == inst.partition.blocks


def test_round_trip_without_blocks(tmp_path):
    g0 = Graph.from_edges(4, [(0, 1), (2, 3)])
    path = tmp_path / "g.json"
    write_graph(path, g0)
    g, part = read_graph(path)
    assert g.edges == g0.edges and part is None


def test_canonical_edge_order(tmp_path):
    g0 = Graph.from_edges(4, [(3, 2), (1, 0)])
    path = tmp_path / "g.json"
    write_graph(path, g0)
    doc = json.loads(path.read_text())
    assert doc["edges"] == [[0, 1], [2, 3]]


@pytest.mark.parametrize(
    "doc",
    [
        {"n": 3, "edges": [[0, 1], [1, 0]]},  # duplicate edge
        {"n": 3, "edges": [[0, 0]]},  # self loop
        {"n": 3, "edges": [[0, 5]]},  # out of range
        {"n": 3, "edges": [], "blocks": [[0, 1], [1, 2]]},  # overlap
        {"n": 3, "edges": [], "blocks": [[0], [1]]},  # not covering
        {"n": 3, "edges": [], "extra": 1},  # unknown key
        {"edges": []},  # missing n
    ],
)
def test_malformed_documents_rejected(tmp_path, doc):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(GraphFileError):
        read_graph(path)


def test_trailing_data_rejected(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"n": 2, "edges": []}\n{"more": 1}')
    with pytest.raises(GraphFileError):
        read_graph(path)


def test_not_json_rejected(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("p edge 5 3")
    with pytest.raises(GraphFileError):
        read_graph(path)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**63 - 1), st.floats(0.0, 1.0))
def test_round_trip_random_instances(tmp_path_factory, seed, p):
    inst = generate_planted([3, 2, 4], p, seed)
    path = tmp_path_factory.mktemp("io") / "g.json"
    write_graph(path, inst.graph, inst.partition)
    g, part = read_graph(path)
    assert g.edges == inst.graph.edges
    assert part.blocks == inst.partition.blocks
