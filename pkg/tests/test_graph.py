import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavegcn.graph import DataError, Graph, gcn_propagation, knn_graph, load_graph

from conftest import random_graph


def write(tmp_path, text, name="g.txt"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_smallest_graph(tmp_path):
    g = load_graph(write(tmp_path, "2 1\n0 1"))
    assert g.n == 2
    assert g.edges.tolist() == [[0, 1]]


def test_load_triangle(tmp_path):
    g = load_graph(write(tmp_path, "3 3\n0 1\n1 2\n0 2"))
    assert g.edges.tolist() == [[0, 1], [0, 2], [1, 2]]
    assert g.adjacency == [[1, 2], [0, 2], [0, 1]]


def test_load_rejects_self_loop_with_line(tmp_path):
    with pytest.raises(DataError, match="self-loop at line 2"):
        load_graph(write(tmp_path, "3 2\n0 0\n1 2"))


@pytest.mark.parametrize("text,msg", [
    ("3 2\n0 1\n1 0", "duplicate edge at line 3"),
    ("3 1\n0 5", "out of range at line 2"),
    ("3 2\n0 1", "declares 2 edges"),
    ("3 1\n0 x", "line 2"),
])
def test_load_errors(tmp_path, text, msg):
    with pytest.raises(DataError, match=msg):
        load_graph(write(tmp_path, text))


def test_edges_normalized_and_symmetric():
    g = Graph.from_edges(4, [(3, 1), (2, 0), (1, 0)])
    assert g.edges.tolist() == [[0, 1], [0, 2], [1, 3]]
    for u in range(g.n):
        for v in g.neighbors(u):
            assert u in g.neighbors(v)


def test_knn_collinear():
    # brute force: d(0,1)=1, d(1,2)=9, d(0,2)=10
    pts = np.array([[0.0], [1.0], [10.0]])
    d = np.abs(pts - pts.T)
    np.fill_diagonal(d, np.inf)
    nn = d.argmin(axis=1)
    expected = sorted({tuple(sorted((i, int(j)))) for i, j in enumerate(nn)})
    assert expected == [(0, 1), (1, 2)]
    assert [tuple(e) for e in knn_graph(pts, 1).edges.tolist()] == expected


def test_knn_complete():
    pts = np.random.default_rng(0).normal(size=(6, 2))
    g = knn_graph(pts, 5)
    assert g.m == 15


def test_knn_duplicates_tie_to_lower_index():
    pts = np.zeros((3, 2))
    g = knn_graph(pts, 1)
    # each node picks the lowest other index: 0->1, 1->0, 2->0
    assert g.edges.tolist() == [[0, 1], [0, 2]]


def test_knn_rejects_large_k():
    with pytest.raises(DataError):
        knn_graph(np.zeros((3, 1)), 3)


def test_knn_matches_brute_force():
    rng = np.random.default_rng(1)
    pts = rng.random((40, 3))
    k = 4
    expected = set()
    for i in range(40):
        d = [(float(np.sum((pts[i] - pts[j]) ** 2)), j) for j in range(40) if j != i]
        for _, j in sorted(d)[:k]:
            expected.add((min(i, j), max(i, j)))
    g = knn_graph(pts, k)
    assert {tuple(e) for e in g.edges.tolist()} == expected
    assert np.array_equal(knn_graph(pts, k).edges, g.edges)


def test_propagation_single_node():
    P = gcn_propagation(Graph.from_edges(1, []))
    assert P.toarray().tolist() == [[1.0]]


def test_propagation_single_edge():
    P = gcn_propagation(Graph.from_edges(2, [(0, 1)])).toarray()
    np.testing.assert_allclose(P, np.full((2, 2), 0.5), rtol=0, atol=1e-15)


@pytest.mark.parametrize("n,k", [(6, 1), (8, 2), (10, 3)])
def test_propagation_preserves_constants_on_regular_rings(n, k):
    # ring where each node links to k neighbors on either side: degree 2k
    edges = {tuple(sorted((i, (i + s) % n))) for i in range(n) for s in range(1, k + 1)}
    g = Graph.from_edges(n, sorted(edges))
    assert set(g.degrees().tolist()) == {2 * k}
    P = gcn_propagation(g)
    np.testing.assert_allclose(P @ np.ones(n), np.ones(n), rtol=0, atol=1e-15)


def test_propagation_matches_dense_formula():
    g = random_graph(9, np.random.default_rng(2))
    A = g.adjacency_matrix().toarray() + np.eye(9)
    dinv = np.diag(1 / np.sqrt(A.sum(1)))
    np.testing.assert_allclose(gcn_propagation(g).toarray(), dinv @ A @ dinv, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(0, 10_000))
def test_propagation_symmetric_and_spectrally_bounded(n, seed):
    g = random_graph(n, np.random.default_rng(seed), p=0.4)
    P = gcn_propagation(g).toarray()
    assert np.array_equal(P, P.T)
    ev = np.linalg.eigvalsh(P)
    assert ev.min() >= -1 - 1e-12 and ev.max() <= 1 + 1e-12
    pattern = (g.adjacency_matrix().toarray() + np.eye(n)) > 0
    assert np.array_equal(P != 0, pattern)


def test_components_small():
    g = Graph.from_edges(5, [(0, 1), (2, 3)])
    assert g.n_components() == 3
    assert list(itertools.chain.from_iterable(g.adjacency)) == [1, 0, 3, 2]
