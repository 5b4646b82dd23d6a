import math

import numpy as np
import pytest
from _oracles import all_partitions, brute_force_mst_weight, coth_decimal, modularity, random_correlation

from rps.graph import (
    DEFAULT_CAP,
    LOUVAIN_EPS,
    SpanningTree,
    WeightedGraph,
    build_rps_graph,
    coth_weight,
    coth_weights,
    kruskal_mst,
    louvain_communities,
    mantegna_distance,
)
from rps.market_data import CorrelationMatrix


def _cm(values):
    values = np.asarray(values, dtype=float)
    return CorrelationMatrix([f"a{i}" for i in range(len(values))], values)


def test_coth_weight_examples():
    assert coth_weight(1.0) == 0.0
    assert coth_weight(-1.0) == 0.0
    assert coth_weight(1e-9, cap=1e6) == 1e6
    assert coth_weight(0.0) == DEFAULT_CAP


def test_coth_weight_against_decimal_oracle():
    expected = float(coth_decimal("0.5") - coth_decimal("1"))
    assert coth_weight(0.5) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(0.850918, abs=1e-6)


def test_coth_weight_rejects_out_of_range():
    with pytest.raises(ValueError):
        coth_weight(1.01)
    with pytest.raises(ValueError):
        coth_weights(np.array([0.2, -1.5]))


def test_coth_weight_strictly_decreasing_and_even():
    grid = np.linspace(1e-3, 1.0, 1000)
    w = coth_weights(grid)
    assert np.all(np.diff(w) < 0)
    np.testing.assert_array_equal(coth_weights(-grid), w)
    for r in grid[::97]:
        assert coth_weight(float(r)) == pytest.approx(float(coth_weights(np.array([r]))[0]), rel=1e-15)


def test_build_rps_graph_examples():
    g = build_rps_graph(_cm([[1, 1], [1, 1]]))
    assert g.edge_weights[0, 1] == 0.0
    g = build_rps_graph(_cm(np.eye(3)), cap=50.0)
    off = g.edge_weights[~np.eye(3, dtype=bool)]
    assert np.all(off == 50.0) and np.all(np.diag(g.edge_weights) == 0)
    g = build_rps_graph(_cm([[1, 0.2, 0.9], [0.2, 1, 0.0], [0.9, 0.0, 1]]))
    assert g.edge_weights[0, 1] > g.edge_weights[0, 2]


def test_weighted_graph_validation():
    with pytest.raises(ValueError):
        WeightedGraph(["a", "b"], np.array([[0, 1.0], [2.0, 0]]))
    with pytest.raises(ValueError):
        WeightedGraph(["a", "b"], np.array([[0, -1.0], [-1.0, 0]]))


def test_graph_dump(tmp_path):
    g = build_rps_graph(_cm([[1, 0.5], [0.5, 1]]))
    g.dump(tmp_path / "g.csv")
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines[0] == "i,j,weight" and lines[1].startswith("a0,a1,")


def test_mantegna_distance_examples():
    assert mantegna_distance(1.0) == 0.0
    assert mantegna_distance(-1.0) == 2.0
    assert abs(mantegna_distance(0.0) - math.sqrt(2)) <= 1e-12
    with pytest.raises(ValueError):
        mantegna_distance(-1.2)


def test_mantegna_triangle_inequality(rng):
    for _ in range(20):
        d = mantegna_distance(random_correlation(rng, 8))
        for i, j, k in rng.integers(0, 8, size=(50, 3)):
            assert d[i, k] <= d[i, j] + d[j, k] + 1e-12


def test_kruskal_small_examples():
    t = kruskal_mst(_cm([[1, 0.3], [0.3, 1]]))
    assert [(i, j) for i, j, _ in t.edges] == [(0, 1)]
    t = kruskal_mst(_cm([[1, 0.9, 0.8], [0.9, 1, 0.1], [0.8, 0.1, 1]]))
    assert sorted((i, j) for i, j, _ in t.edges) == [(0, 1), (0, 2)]


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_kruskal_matches_prufer_enumeration(n):
    rng = np.random.default_rng(n)
    for _ in range(20):
        c = random_correlation(rng, n)
        tree = kruskal_mst(_cm(c))
        assert len(tree.edges) == n - 1
        assert tree.total_distance == pytest.approx(brute_force_mst_weight(mantegna_distance(c)), abs=1e-12)


def test_kruskal_tie_break_lexicographic():
    # every pair equally correlated: first n-1 edges in (i, j) order that avoid cycles
    t = kruskal_mst(_cm(np.full((4, 4), 0.5) + 0.5 * np.eye(4)))
    assert [(i, j) for i, j, _ in t.edges] == [(0, 1), (0, 2), (0, 3)]


def _two_stars():
    """Stars {0:1,2} and {3:4,5} with short spokes and a long 2-3 bridge."""
    nodes = [f"n{i}" for i in range(6)]
    edges = [(0, 1, 0.1), (0, 2, 0.1), (3, 4, 0.1), (3, 5, 0.1), (2, 3, 1.9)]
    return SpanningTree(nodes, edges)


def test_louvain_two_stars_matches_modularity_optimum():
    tree = _two_stars()
    parts = louvain_communities(tree, seed=0)
    got = {frozenset(int(a[1:]) for a in c) for c in parts.communities}
    assert got == {frozenset({0, 1, 2}), frozenset({3, 4, 5})}

    adj = np.zeros((6, 6))
    for i, j, d in tree.edges:
        adj[i, j] = adj[j, i] = 1.0 / (d + LOUVAIN_EPS)
    best = max(all_partitions(list(range(6))), key=lambda p: modularity(adj, p))
    assert {frozenset(c) for c in best} == got


def test_louvain_degenerate_and_deterministic(rng):
    t = kruskal_mst(_cm([[1, 0.4], [0.4, 1]]))
    parts = louvain_communities(t, seed=3)
    assert set().union(*parts.communities) == {"a0", "a1"}
    c = _cm(random_correlation(rng, 12))
    t = kruskal_mst(c)
    a, b = louvain_communities(t, seed=5), louvain_communities(t, seed=5)
    assert a.communities == b.communities
    assert sorted(x for s in a.communities for x in s) == sorted(c.assets)
