import io

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dense_laplacian, random_digraph
from digraphwave.errors import GraphFormatError, GraphValidationError
from digraphwave.graph import (
    Graph,
    build_operator,
    degrees,
    joint_neighborhood_matrix,
    load_edge_list,
    load_graph,
    permute,
    read_graph_cache,
    transpose,
    write_edge_list,
    write_graph_cache,
)


def edge_lists(max_n=12):
    return st.integers(1, max_n).flatmap(lambda n: st.tuples(
        st.just(n),
        st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1),
                           st.floats(0.1, 10.0)), max_size=40)))


def test_from_edges_merges_duplicates_and_sorts():
    g = Graph.from_edges([2, 0, 0, 0], [1, 2, 1, 2], [1.0, 2.0, 3.0, 4.0], n=3)
    src, dst, w = g.edges()
    assert src.tolist() == [0, 0, 2]
    assert dst.tolist() == [1, 2, 1]
    assert w.tolist() == [3.0, 6.0, 1.0]


def test_unweighted_duplicates_collapse():
    g = Graph.from_edges([0, 0], [1, 1], n=2, merge="one")
    assert g.m == 1 and g.weights.tolist() == [1.0]


def test_self_loops_dropped_with_warning(caplog):
    g = Graph.from_edges([0, 1, 1], [0, 1, 0], n=2)
    assert g.m == 1
    assert g.self_loops_dropped == 2
    assert "self-loop" in caplog.text


def test_graph_arrays_are_read_only():
    g = Graph.from_edges([0], [1], n=2)
    with pytest.raises(ValueError):
        g.indices[0] = 0


def test_invalid_weights_rejected():
    with pytest.raises(GraphValidationError):
        Graph.from_edges([0], [1], [-1.0], n=2)


def test_load_edge_list_comments_and_line_numbers():
    g = load_edge_list(b"# header\n0\t1\n\n1\t2\t5.0\n")
    assert g.n == 3 and g.m == 2
    assert not g.is_weighted()
    with pytest.raises(GraphFormatError, match="line 2"):
        load_edge_list(b"0\t1\n0\tx\n")
    with pytest.raises(GraphFormatError, match="line 1"):
        load_edge_list(b"0 1 2 3\n")


def test_load_weighted_edge_list():
    g = load_edge_list(io.StringIO("0\t1\t2.5\n0\t1\t0.5\n"), weighted=True)
    assert g.weights.tolist() == [3.0]
    with pytest.raises(GraphValidationError, match="line 1"):
        load_edge_list(b"0\t1\t-2\n", weighted=True)


def test_edge_list_roundtrip(tmp_path, rng):
    g = random_digraph(rng, 15, 0.3)
    p = tmp_path / "g.tsv"
    write_edge_list(g, p, weighted=True)
    h = load_edge_list(p, weighted=True, n=15)
    assert h == g


def test_graph_cache_roundtrip(tmp_path, rng):
    g = random_digraph(rng, 20, 0.2)
    p = tmp_path / "g.dgwg"
    write_graph_cache(g, p)
    assert p.read_bytes()[:4] == b"DGWG"
    assert read_graph_cache(p) == g
    assert load_graph(p) == g


def test_graph_cache_errors(tmp_path, rng):
    g = random_digraph(rng, 10, 0.3)
    p = tmp_path / "g.dgwg"
    write_graph_cache(g, p)
    p.write_bytes(p.read_bytes()[:-3])
    with pytest.raises(GraphFormatError, match="truncated"):
        read_graph_cache(p)
    p.write_bytes(b"XXXX" + b"\0" * 40)
    with pytest.raises(GraphFormatError, match="magic"):
        read_graph_cache(p)


def test_operator_matches_dense_laplacian(rng):
    for _ in range(10):
        g = random_digraph(rng, int(rng.integers(2, 25)), rng.uniform(0.05, 0.5))
        op = build_operator(g)
        L = dense_laplacian(g)
        np.testing.assert_allclose(op.laplacian().toarray(), L, atol=1e-14)
        x = rng.standard_normal((g.n, 3))
        np.testing.assert_allclose(op.apply(x), (L - np.eye(g.n)) @ x, atol=1e-13)


def test_transition_column_stochastic(rng):
    g = random_digraph(rng, 30, 0.1, n_sinks=4)
    P = build_operator(g).transition().toarray()
    np.testing.assert_allclose(P.sum(axis=0), 1.0, atol=1e-14)
    assert P.min() >= 0


def test_sink_mask_and_degrees():
    g = Graph.from_edges([0, 0, 1], [1, 2, 2], [2.0, 1.0, 1.0], n=4)
    op = build_operator(g)
    assert op.sink_mask.tolist() == [False, False, True, True]
    d = degrees(g)
    assert d.out_unweighted.tolist() == [2, 1, 0, 0]
    assert d.out_weighted.tolist() == [3.0, 1.0, 0.0, 0.0]
    assert d.in_unweighted.tolist() == [0, 1, 2, 0]


def test_transpose_involution(rng):
    g = random_digraph(rng, 12, 0.3)
    t = transpose(g)
    assert t.orientation == "transposed"
    np.testing.assert_array_equal(t.adjacency().toarray(), g.adjacency().toarray().T)
    assert transpose(t) == g
    assert transpose(t).orientation == "normal"


def test_joint_neighborhood_matches_networkx(rng):
    g = random_digraph(rng, 15, 0.2)
    G = nx.DiGraph()
    G.add_nodes_from(range(g.n))
    G.add_edges_from(zip(*g.edges()[:2]))
    N = joint_neighborhood_matrix(g).toarray()
    for v in range(g.n):
        expected = set(G.successors(v)) | set(G.predecessors(v))
        assert set(np.flatnonzero(N[v])) == expected
    assert set(np.unique(N)) <= {0.0, 1.0}


def test_permute_relabels_laplacian(rng):
    g = random_digraph(rng, 10, 0.3)
    perm = rng.permutation(g.n)
    h = permute(g, perm)
    L, M = dense_laplacian(g), dense_laplacian(h)
    P = np.zeros((g.n, g.n))
    P[perm, np.arange(g.n)] = 1
    np.testing.assert_allclose(M, P @ L @ P.T, atol=1e-14)


@settings(max_examples=60, deadline=None)
@given(edge_lists())
def test_laplacian_columns_sum_to_zero(data):
    n, edges = data
    src = [e[0] for e in edges]
    dst = [e[1] for e in edges]
    w = [e[2] for e in edges]
    g = Graph.from_edges(src, dst, w, n=n)
    L = build_operator(g).laplacian().toarray()
    np.testing.assert_allclose(L.sum(axis=0), 0.0, atol=1e-12)
    # off-diagonal entries nonpositive, diagonal is 1 except for sinks
    off = L - np.diag(np.diag(L))
    assert off.max() <= 0
    np.testing.assert_array_equal(np.diag(L), np.where(np.diff(g.indptr) > 0, 1.0, 0.0))
