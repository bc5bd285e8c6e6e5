"""Pair-graph construction: greedy minimum-dissimilarity matching and contraction."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .graph import DataError, Graph


@dataclass(frozen=True)
class PairGraph:
    """Disjoint node pairs covering every node except at most one orphan.

    Pair ``k`` becomes coarse node ``k``; the orphan (if any) becomes coarse
    node ``len(pairs)``.
    """

    n: int
    pairs: np.ndarray  # (n // 2, 2) int64, i < j in every row
    orphan: int | None = None
    n_random: int = 0  # nodes left unmatched by the greedy scan and paired at random

    @property
    def n_coarse(self) -> int:
        return len(self.pairs) + (self.orphan is not None)

    @property
    def parent_map(self) -> np.ndarray:
        parent = np.empty(self.n, dtype=np.int64)
        k = np.arange(len(self.pairs), dtype=np.int64)
        parent[self.pairs[:, 0]] = k
        parent[self.pairs[:, 1]] = k
        if self.orphan is not None:
            parent[self.orphan] = len(self.pairs)
        return parent

    @property
    def orphan_index(self) -> int:
        return -1 if self.orphan is None else self.orphan

    def validate(self) -> None:
        seen = np.zeros(self.n, dtype=np.int64)
        np.add.at(seen, self.pairs.ravel(), 1)
        if self.orphan is not None:
            seen[self.orphan] += 1
        if len(self.pairs) != self.n // 2 or not np.all(seen == 1):
            raise DataError("pair graph does not cover every node exactly once")
        if (self.orphan is None) != (self.n % 2 == 0):
            raise DataError("orphan must be present exactly when n is odd")


def edge_dissimilarity(g: Graph, f) -> np.ndarray:
    """Euclidean distance between the feature rows at the two ends of each edge."""
    f = np.asarray(f, dtype=np.float64)
    if f.ndim == 1:
        f = f[:, None]
    if f.shape[0] != g.n:
        raise DataError(f"feature rows {f.shape[0]} != graph nodes {g.n}")
    if g.m == 0:
        return np.zeros(0)
    return np.linalg.norm(f[g.edges[:, 0]] - f[g.edges[:, 1]], axis=1)


def greedy_match(g: Graph, weights, seed: int = 0) -> PairGraph:
    """Accept edges in ascending weight order while both ends are free.

    Equal weights keep the lexicographic (u, v) order of ``g.edges``. Nodes
    still free afterwards are paired at random (seeded), ignoring adjacency;
    one leftover node becomes the orphan.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (g.m,):
        raise DataError(f"expected {g.m} edge weights, got shape {w.shape}")
    order = np.argsort(w, kind="stable")
    u = np.ascontiguousarray(g.edges[order, 0])
    v = np.ascontiguousarray(g.edges[order, 1])
    mate = _backend.kernels.greedy_scan(u, v, g.n)

    idx = np.arange(g.n)
    matched = mate >= 0
    first = matched & (idx < mate)
    pairs = [np.stack([idx[first], mate[first]], axis=1)]

    free = idx[~matched]
    rng = np.random.default_rng(seed)
    free = rng.permutation(free)
    orphan = None
    if len(free) % 2:
        orphan = int(free[-1])
        free = free[:-1]
    if len(free):
        pairs.append(np.sort(free.reshape(-1, 2), axis=1))
    p = np.concatenate(pairs).astype(np.int64)
    p = p[np.lexsort((p[:, 1], p[:, 0]))]
    return PairGraph(g.n, p, orphan, int((~matched).sum()))


def coarsen_graph(g: Graph, pg: PairGraph) -> Graph:
    """Contract each pair (and the orphan) to a supernode, merging parallel edges."""
    if pg.n != g.n:
        raise DataError("pair graph and graph sizes differ")
    parent = pg.parent_map
    e = parent[g.edges] if g.m else np.zeros((0, 2), np.int64)
    e = e[e[:, 0] != e[:, 1]]
    e = np.unique(np.sort(e, axis=1), axis=0)
    return Graph.from_edges(pg.n_coarse, e)
