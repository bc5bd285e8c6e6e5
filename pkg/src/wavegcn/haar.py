"""Multi-level graph Haar transform built on pair-graphs.

Each level maps paired rows ``(f_i, f_j)`` to a detail ``(f_i - f_j)/sqrt2``
and an average ``(f_i + f_j)/sqrt2``; an orphan row is copied through to the
coarse level. The transformed matrix stacks the detail blocks of every level
followed by the coarsest averages, so it has exactly as many rows as the input.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .graph import DataError, Graph
from .matching import PairGraph, coarsen_graph, edge_dissimilarity, greedy_match

INV_SQRT2 = 0.7071067811865476
DEFAULT_LEVELS = 3


@dataclass(frozen=True)
class HaarLevel:
    pair_graph: PairGraph

    @property
    def n_fine(self) -> int:
        return self.pair_graph.n

    @property
    def n_coarse(self) -> int:
        return self.pair_graph.n_coarse

    @property
    def n_pairs(self) -> int:
        return len(self.pair_graph.pairs)


@dataclass(frozen=True)
class HaarHierarchy:
    n: int
    levels: tuple[HaarLevel, ...]

    @property
    def block_sizes(self) -> list[int]:
        """Row counts of ``[p1, ..., pL, fL]``."""
        last = self.levels[-1].n_coarse if self.levels else self.n
        return [lv.n_pairs for lv in self.levels] + [last]

    @property
    def offsets(self) -> list[int]:
        return [0] + np.cumsum(self.block_sizes).tolist()

    @property
    def n_final(self) -> int:
        return self.block_sizes[-1]


def build_hierarchy(g: Graph, f, levels: int = DEFAULT_LEVELS, seed: int = 0) -> HaarHierarchy:
    """Match and coarsen ``levels`` times, re-weighting edges with averaged features.

    Level ``l`` (0-based) uses seed ``seed + l`` for its random leftover pairing.
    Construction stops early once a single node remains.
    """
    if levels < 1:
        raise DataError("the number of levels must be at least 1")
    f = _as_matrix(f)
    if f.shape[0] != g.n:
        raise DataError(f"feature rows {f.shape[0]} != graph nodes {g.n}")
    out = []
    cur_g, cur_f = g, f
    for lvl in range(levels):
        if cur_g.n <= 1:
            break
        pg = greedy_match(cur_g, edge_dissimilarity(cur_g, cur_f), seed + lvl)
        out.append(HaarLevel(pg))
        if lvl + 1 < levels:
            _, cur_f = _backend.kernels.haar_forward_level(cur_f, pg.pairs, pg.orphan_index)
            cur_g = coarsen_graph(cur_g, pg)
    return HaarHierarchy(g.n, tuple(out))


def _as_matrix(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    return np.ascontiguousarray(x)


def forward(h: HaarHierarchy, f) -> np.ndarray:
    """Coefficients ``W f`` laid out as ``[p1, ..., pL, fL]``."""
    f = _as_matrix(f)
    if f.shape[0] != h.n:
        raise DataError(f"expected {h.n} rows, got {f.shape[0]}")
    blocks = []
    cur = f
    for lv in h.levels:
        pg = lv.pair_graph
        detail, cur = _backend.kernels.haar_forward_level(cur, pg.pairs, pg.orphan_index)
        blocks.append(detail)
    blocks.append(cur)
    return np.concatenate(blocks, axis=0)


def inverse(h: HaarHierarchy, p) -> np.ndarray:
    """``W^T p``, applied coarse-to-fine."""
    p = _as_matrix(p)
    if p.shape[0] != h.n:
        raise DataError(f"expected {h.n} rows, got {p.shape[0]}")
    off = h.offsets
    cur = p[off[-2]:off[-1]]
    for k in range(len(h.levels) - 1, -1, -1):
        pg = h.levels[k].pair_graph
        detail = np.ascontiguousarray(p[off[k]:off[k + 1]])
        cur = _backend.kernels.haar_inverse_level(
            detail, np.ascontiguousarray(cur), pg.pairs, pg.orphan_index, pg.n)
    return np.array(cur, copy=True) if not h.levels else cur


def level_operators(level: HaarLevel):
    """Dense ``(D, A)`` for one level: D is pairs x n_fine, A is n_coarse x n_fine."""
    pg = level.pair_graph
    k = np.arange(level.n_pairs)
    D = np.zeros((level.n_pairs, level.n_fine))
    A = np.zeros((level.n_coarse, level.n_fine))
    D[k, pg.pairs[:, 0]] = INV_SQRT2
    D[k, pg.pairs[:, 1]] = -INV_SQRT2
    A[k, pg.pairs[:, 0]] = INV_SQRT2
    A[k, pg.pairs[:, 1]] = INV_SQRT2
    if pg.orphan is not None:
        A[level.n_pairs, pg.orphan] = 1.0
    return D, A


def dense_matrix(h: HaarHierarchy) -> np.ndarray:
    """The full n x n transform, for small-graph inspection."""
    return forward(h, np.eye(h.n))


def format_hierarchy(h: HaarHierarchy) -> str:
    """Text form: ``hierarchy n L``, then per level ``level n_fine n_pairs orphan``
    followed by its pair lines. ``orphan`` is -1 when absent."""
    out = [f"hierarchy {h.n} {len(h.levels)}"]
    for lv in h.levels:
        pg = lv.pair_graph
        out.append(f"level {pg.n} {len(pg.pairs)} {pg.orphan_index}")
        out += [f"{i} {j}" for i, j in pg.pairs.tolist()]
    return "\n".join(out) + "\n"


def format_layout(h: HaarHierarchy) -> str:
    """Block name, first row and row count of each coefficient block."""
    names = [f"detail{k + 1}" for k in range(len(h.levels))] + ["average"]
    off = h.offsets
    lines = ["block start rows"]
    lines += [f"{name} {off[k]} {off[k + 1] - off[k]}" for k, name in enumerate(names)]
    return "\n".join(lines) + "\n"


def load_hierarchy(path) -> HaarHierarchy:
    with open(path) as fh:
        lines = [(k + 1, ln.split()) for k, ln in enumerate(fh) if ln.strip()]
    try:
        lineno, tok = lines[0]
        if tok[0] != "hierarchy":
            raise DataError(f"line {lineno}: expected 'hierarchy n L'")
        n, nlev = int(tok[1]), int(tok[2])
        pos = 1
        levels = []
        expect = n
        for _ in range(nlev):
            lineno, tok = lines[pos]
            if tok[0] != "level":
                raise DataError(f"line {lineno}: expected 'level n_fine n_pairs orphan'")
            nf, npairs, orphan = int(tok[1]), int(tok[2]), int(tok[3])
            if nf != expect:
                raise DataError(f"line {lineno}: level size {nf} does not follow previous level")
            pairs = np.array([[int(a), int(b)] for _, (a, b) in lines[pos + 1:pos + 1 + npairs]],
                             dtype=np.int64).reshape(-1, 2)
            pos += 1 + npairs
            pg = PairGraph(nf, pairs, None if orphan < 0 else orphan)
            pg.validate()
            levels.append(HaarLevel(pg))
            expect = pg.n_coarse
    except (IndexError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"malformed hierarchy file: {exc}") from None
    return HaarHierarchy(n, tuple(levels))
