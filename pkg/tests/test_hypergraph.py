from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from hypernet.errors import DisconnectedError, ParseError, ValidationError
from hypernet.hypergraph import (
    CombinatorialHypergraph,
    ModelParams,
    build_hypernetwork,
    dump_hypergraph_text,
    hyperedge_distances,
    hyperedge_overlap_sp,
    line_graph_weights,
    load_hypergraph,
    parse_hypergraph_json,
    parse_hypergraph_text,
    weighted_line_graph,
)

from oracles import floyd_warshall

FIVE_NODE_FILE = Path(__file__).resolve().parent.parent / "fixtures" / "five_node.txt"

FIVE_NODE_INCIDENCE = np.array([
    [1, 1, 0, 0],
    [1, 0, 1, 0],
    [0, 1, 0, 1],
    [0, 1, 1, 1],
    [0, 0, 1, 0],
], float)
FIVE_NODE_SHORTEST_PATH = np.array([
    [0, 0, 1, 2],
    [0, 1, 0, 1],
    [1, 0, 1, 0],
    [1, 0, 0, 0],
    [1, 1, 0, 1],
], float)


def _random_hypergraph(rng, n=7, m=6, connected=True):
    while True:
        edges = {}
        for j in range(m):
            k = int(rng.integers(1, 4))
            edges[f"e{j}"] = [f"v{i}" for i in rng.choice(n, size=k, replace=False)]
        G = CombinatorialHypergraph(edges, nodes=[f"v{i}" for i in range(n)])
        if not connected:
            return G
        if np.all(G.degree() > 0):
            try:
                hyperedge_distances(G)
                return G
            except DisconnectedError:
                pass


def test_five_node_incidence_bitwise():
    H = build_hypernetwork(load_hypergraph(FIVE_NODE_FILE), ModelParams("uniform", "uniform", "incidence"))
    assert np.array_equal(H.omega, FIVE_NODE_INCIDENCE)
    assert np.array_equal(H.mu, np.full(5, 0.2)) and np.array_equal(H.nu, np.full(4, 0.25))
    assert H.node_ids == ("1", "2", "3", "4", "5") and H.hyperedge_ids == ("a", "b", "c", "d")


def test_five_node_shortest_path_bitwise():
    G = load_hypergraph(FIVE_NODE_FILE)
    H = build_hypernetwork(G, ModelParams("uniform", "uniform", "overlap_sp"))
    assert np.array_equal(H.omega, FIVE_NODE_SHORTEST_PATH)
    assert np.array_equal(hyperedge_overlap_sp(G), FIVE_NODE_SHORTEST_PATH)
    assert H.omega[0, 2] == 1 and H.omega[0, 3] == 2


def test_members_have_zero_sp():
    rng = np.random.default_rng(0)
    for scheme in ("jaccard_sp", "intersection_sp", "overlap_sp"):
        G = _random_hypergraph(rng)
        H = build_hypernetwork(G, ModelParams(omega_scheme=scheme))
        inc = G.incidence() > 0
        assert np.all(H.omega[inc] == 0)
        assert np.all(H.omega[~inc] > 0)


def test_single_hyperedge_all_zero():
    G = CombinatorialHypergraph({"y": ["1", "2", "3"]})
    assert np.array_equal(hyperedge_overlap_sp(G), np.zeros((3, 1)))


def test_jaccard_identical_sets_weight_one():
    G = CombinatorialHypergraph({"a": ["1", "2"], "b": ["1", "2"]})
    N = weighted_line_graph(G, "jaccard")
    assert N.omega[0, 1] == 1.0 and N.omega[0, 0] == 0.0
    assert np.array_equal(N.mu, [0.5, 0.5])


def test_line_graph_edge_set_five_node():
    W = line_graph_weights(load_hypergraph(FIVE_NODE_FILE), "jaccard")
    edges = {(i, j) for i in range(4) for j in range(i + 1, 4) if W[i, j] > 0}
    assert edges == {(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)}


@pytest.mark.parametrize("weight", ["jaccard", "intersection", "overlap"])
def test_line_graph_weights_set_algebra(weight):
    rng = np.random.default_rng(1)
    G = _random_hypergraph(rng, 8, 7, connected=False)
    W = line_graph_weights(G, weight)
    sets = list(G.hyperedges.values())
    for i, s in enumerate(sets):
        for j, t in enumerate(sets):
            inter, union = len(s & t), len(s | t)
            if i == j or inter == 0:
                assert W[i, j] == 0
            elif weight == "jaccard":
                assert W[i, j] == float(Fraction(union, inter))
            elif weight == "intersection":
                assert W[i, j] == float(Fraction(1, inter))
            else:
                assert W[i, j] == inter


@pytest.mark.parametrize("weight", ["jaccard", "intersection", "overlap"])
def test_shortest_paths_match_floyd_warshall(weight):
    rng = np.random.default_rng(2)
    for _ in range(5):
        G = _random_hypergraph(rng)
        D = hyperedge_distances(G, weight)
        ref = floyd_warshall(line_graph_weights(G, weight))
        assert np.abs(D - ref).max() < 1e-12
        H = build_hypernetwork(G, ModelParams(omega_scheme=f"{weight}_sp"))
        inc = G.incidence() > 0
        for i in range(len(G.nodes)):
            assert np.abs(H.omega[i] - ref[inc[i]].min(axis=0)).max() < 1e-12


def test_degree_measures_rational_crosscheck():
    rng = np.random.default_rng(3)
    for _ in range(5):
        G = _random_hypergraph(rng)
        H = build_hypernetwork(G, ModelParams("degree", "degree_sum", "incidence"))
        deg = {x: sum(1 for s in G.hyperedges.values() if x in s) for x in G.nodes}
        tot = sum(deg.values())
        for i, x in enumerate(G.nodes):
            assert abs(H.mu[i] - float(Fraction(deg[x], tot))) < 1e-15
        hat = {y: sum(deg[x] for x in s) for y, s in G.hyperedges.items()}
        tot = sum(hat.values())
        for j, y in enumerate(G.hyperedges):
            assert abs(H.nu[j] - float(Fraction(hat[y], tot))) < 1e-15
        assert abs(H.mu.sum() - 1) < 1e-12 and abs(H.nu.sum() - 1) < 1e-12


def test_uniform_measures():
    G = _random_hypergraph(np.random.default_rng(4))
    H = build_hypernetwork(G, ModelParams("uniform", "uniform", "incidence"))
    assert np.allclose(H.mu, 1 / len(G.nodes), rtol=0, atol=1e-15)
    assert np.allclose(H.nu, 1 / len(G.hyperedges), rtol=0, atol=1e-15)


def test_declaration_order_invariance():
    rng = np.random.default_rng(5)
    G = _random_hypergraph(rng)
    H = build_hypernetwork(G)
    nodes = list(G.nodes)[::-1]
    labels = list(G.hyperedges)[::-1]
    G2 = CombinatorialHypergraph({y: G.hyperedges[y] for y in labels}, nodes=nodes)
    H2 = build_hypernetwork(G2)
    r = [nodes.index(x) for x in G.nodes]
    c = [labels.index(y) for y in G.hyperedges]
    assert np.array_equal(H.omega, H2.omega[np.ix_(r, c)])
    assert np.allclose(H.mu, H2.mu[r], rtol=0, atol=1e-15)
    assert np.allclose(H.nu, H2.nu[c], rtol=0, atol=1e-15)


def test_disconnected_error_and_fill():
    G = CombinatorialHypergraph({"a": ["1", "2"], "b": ["2", "3"], "c": ["4", "5"]})
    with pytest.raises(DisconnectedError) as exc:
        build_hypernetwork(G)
    assert exc.value.code == "E_DISCONNECTED"
    assert exc.value.components == [["a", "b"], ["c"]]
    H = build_hypernetwork(G, ModelParams(disconnected="fill"))
    # jaccard a-b = |{1,2,3}| / |{2}| = 3 is the largest finite distance, so gaps become 3 + 1
    assert H.omega[0, 2] == 4.0


def test_isolated_node_rejected_under_degree():
    G = CombinatorialHypergraph({"a": ["1", "2"]}, nodes=["1", "2", "3"])
    with pytest.raises(ValidationError):
        build_hypernetwork(G, ModelParams("degree", "uniform", "incidence"))
    H = build_hypernetwork(G, ModelParams("uniform", "uniform", "incidence"))
    assert H.omega.tolist() == [[1.0], [1.0], [0.0]]


def test_invalid_hypergraphs():
    with pytest.raises(ValidationError):
        CombinatorialHypergraph({"a": []})
    with pytest.raises(ValidationError):
        CombinatorialHypergraph({"a": ["1", "9"]}, nodes=["1"])
    with pytest.raises(ValidationError):
        ModelParams(mu_scheme="bogus")


def test_text_parse_errors_have_line_numbers():
    with pytest.raises(ParseError, match="line 2"):
        parse_hypergraph_text("a: 1 2\nb:\n")
    with pytest.raises(ParseError, match="empty hyperedge 'b'"):
        parse_hypergraph_text("a: 1 2\nb:\n")
    with pytest.raises(ParseError, match="line 3"):
        parse_hypergraph_text("# c\na: 1\nnocolon\n")
    with pytest.raises(ParseError, match="duplicate"):
        parse_hypergraph_text("a: 1\na: 2\n")


def test_json_parse():
    G = parse_hypergraph_json('{"hyperedges": {"a": ["1", "2"], "b": ["2"]}}')
    assert G.nodes == ("1", "2")
    with pytest.raises(ParseError, match="empty hyperedge 'b'"):
        parse_hypergraph_json('{"hyperedges": {"a": ["1"], "b": []}}')
    with pytest.raises(ParseError):
        parse_hypergraph_json("{not json")


def test_text_roundtrip():
    G = _random_hypergraph(np.random.default_rng(6))
    assert parse_hypergraph_text(dump_hypergraph_text(G)) == G


def test_dual_roundtrip():
    G = load_hypergraph(FIVE_NODE_FILE)
    D = G.dual()
    assert D.nodes == ("a", "b", "c", "d")
    assert D.hyperedges["4"] == frozenset({"b", "c", "d"})
    assert D.dual() == G
