"""Undirected graphs, text I/O, kNN construction and the GCN propagation matrix."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class DataError(ValueError):
    """Malformed input data or a violated data invariant."""


@dataclass(frozen=True)
class Graph:
    """Immutable undirected simple graph.

    ``edges`` is an (m, 2) int64 array with ``u < v`` in every row, sorted
    lexicographically. ``indptr``/``indices`` hold the symmetric adjacency in
    CSR form with each neighbor list sorted.
    """

    n: int
    edges: np.ndarray
    indptr: np.ndarray = field(repr=False)
    indices: np.ndarray = field(repr=False)

    @classmethod
    def from_edges(cls, n, edges) -> "Graph":
        n = int(n)
        if n < 0:
            raise DataError("node count must be non-negative")
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if len(e) and (e.min() < 0 or e.max() >= n):
            raise DataError(f"edge endpoint out of range [0, {n})")
        if np.any(e[:, 0] == e[:, 1]):
            k = int(np.flatnonzero(e[:, 0] == e[:, 1])[0])
            raise DataError(f"self-loop at edge {k} ({e[k, 0]}, {e[k, 1]})")
        e = np.sort(e, axis=1)
        order = np.lexsort((e[:, 1], e[:, 0]))
        e = e[order]
        if len(e) > 1:
            dup = np.all(e[1:] == e[:-1], axis=1)
            if dup.any():
                k = int(np.flatnonzero(dup)[0]) + 1
                raise DataError(f"duplicate edge ({e[k, 0]}, {e[k, 1]})")
        indptr, indices = _csr(n, e)
        for arr in (e, indptr, indices):
            arr.setflags(write=False)
        return cls(n, e, indptr, indices)

    @property
    def m(self) -> int:
        return len(self.edges)

    def neighbors(self, i) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    @property
    def adjacency(self) -> list[list[int]]:
        return [self.neighbors(i).tolist() for i in range(self.n)]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def directed_edges(self):
        """(src, dst) arrays of both orientations, grouped by ``src``."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees())
        return src, self.indices

    def adjacency_matrix(self) -> sp.csr_matrix:
        data = np.ones(len(self.indices))
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def n_components(self) -> int:
        from scipy.sparse.csgraph import connected_components

        return connected_components(self.adjacency_matrix(), directed=False)[0]


def _csr(n, edges):
    both = np.concatenate([edges, edges[:, ::-1]]) if len(edges) else edges
    if len(both):
        order = np.lexsort((both[:, 1], both[:, 0]))
        both = both[order]
    counts = np.bincount(both[:, 0], minlength=n) if len(both) else np.zeros(n, np.int64)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    indices = np.ascontiguousarray(both[:, 1], dtype=np.int64)
    return indptr, indices


def _read_lines(path):
    with open(path) as fh:
        return [(k + 1, line.split()) for k, line in enumerate(fh) if line.strip()]


def _ints(tokens, count, lineno, what):
    if len(tokens) != count:
        raise DataError(f"line {lineno}: expected {count} integers for {what}, got {len(tokens)}")
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise DataError(f"line {lineno}: non-integer token in {what}") from None


def load_graph(path) -> Graph:
    """Read the ``n m`` header plus ``m`` lines of ``u v``."""
    lines = _read_lines(path)
    if not lines:
        raise DataError("empty graph file")
    lineno, head = lines[0]
    n, m = _ints(head, 2, lineno, "header 'n m'")
    if len(lines) - 1 != m:
        raise DataError(f"header declares {m} edges but file has {len(lines) - 1}")
    seen = set()
    edges = []
    for lineno, tok in lines[1:]:
        u, v = _ints(tok, 2, lineno, "edge 'u v'")
        if not (0 <= u < n and 0 <= v < n):
            raise DataError(f"node index out of range at line {lineno}")
        if u == v:
            raise DataError(f"self-loop at line {lineno}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise DataError(f"duplicate edge at line {lineno}")
        seen.add(key)
        edges.append(key)
    return Graph.from_edges(n, edges)


def save_graph(g: Graph, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(f"{g.n} {g.m}\n")
        for u, v in g.edges.tolist():
            fh.write(f"{u} {v}\n")


def load_features(path) -> np.ndarray:
    """Read the ``n c`` header plus ``n`` rows of ``c`` floats."""
    lines = _read_lines(path)
    if not lines:
        raise DataError("empty feature file")
    lineno, head = lines[0]
    n, c = _ints(head, 2, lineno, "header 'n c'")
    if len(lines) - 1 != n:
        raise DataError(f"header declares {n} rows but file has {len(lines) - 1}")
    out = np.empty((n, c), dtype=np.float64)
    for r, (lineno, tok) in enumerate(lines[1:]):
        if len(tok) != c:
            raise DataError(f"line {lineno}: expected {c} values, got {len(tok)}")
        try:
            out[r] = [float(t) for t in tok]
        except ValueError:
            raise DataError(f"line {lineno}: non-numeric value") from None
    if not np.all(np.isfinite(out)):
        raise DataError("non-finite feature value")
    return out


def format_features(f) -> str:
    f = np.atleast_2d(np.asarray(f, dtype=np.float64))
    rows = [f"{f.shape[0]} {f.shape[1]}"]
    rows += [" ".join(repr(float(x)) for x in row) for row in f]
    return "\n".join(rows) + "\n"


def save_features(f, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(format_features(f))


def knn_graph(points, k: int) -> Graph:
    """Symmetrized (union) k-nearest-neighbor graph under Euclidean distance.

    Ties are broken toward the lower node index; a node never selects itself.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if k < 1:
        raise DataError("k must be positive")
    if k >= n:
        raise DataError(f"k={k} must be smaller than the number of points n={n}")
    if not np.all(np.isfinite(x)):
        raise DataError("non-finite point coordinate")
    d = x.shape[1]
    chunk = max(1, 2**22 // max(n * d, 1))
    src, dst = [], []
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        # direct differences, so equal distances compare exactly equal
        d2 = np.sum((x[lo:hi, None, :] - x[None, :, :]) ** 2, axis=-1)
        d2[np.arange(hi - lo), np.arange(lo, hi)] = np.inf
        # stable sort keeps lower index first among equal distances
        nn = np.argsort(d2, axis=1, kind="stable")[:, :k]
        src.append(np.repeat(np.arange(lo, hi), k))
        dst.append(nn.ravel())
    e = np.stack([np.concatenate(src), np.concatenate(dst)], axis=1)
    e = np.unique(np.sort(e, axis=1), axis=0)
    return Graph.from_edges(n, e)


def gcn_propagation(g: Graph) -> sp.csr_matrix:
    """Renormalized adjacency D^-1/2 (A + I) D^-1/2 with D the degree of A + I."""
    dinv = 1.0 / np.sqrt(g.degrees() + 1.0)
    src, dst = g.directed_edges()
    rows = np.concatenate([src, np.arange(g.n)])
    cols = np.concatenate([dst, np.arange(g.n)])
    vals = dinv[rows] * dinv[cols]
    return sp.csr_matrix((vals, (rows, cols)), shape=(g.n, g.n))
