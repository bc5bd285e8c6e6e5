"""Joint-channel top-k shrinkage of transform coefficients (gather / scatter)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import haar
from .graph import DataError


@dataclass(frozen=True)
class ShrinkagePlan:
    """One sorted list of kept coefficient rows, shared by all channels."""

    alpha: float
    n: int
    kept: np.ndarray

    @property
    def k(self) -> int:
        return len(self.kept)


@dataclass(frozen=True)
class CompressedSignal:
    dense: np.ndarray
    plan: ShrinkagePlan


def kept_count(alpha: float, n: int) -> int:
    """ceil(alpha * n), guarded against products like 0.1 * 30 = 3.0000000000000004."""
    _check_alpha(alpha)
    return min(n, math.ceil(round(alpha * n, 9)))


def _check_alpha(alpha):
    if not (0.0 < alpha <= 1.0):
        raise DataError(f"alpha must lie in (0, 1], got {alpha}")


def row_scores(p, norm: str = "l2") -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim == 1:
        p = p[:, None]
    if norm == "l2":
        # squared norm: same ordering, no sqrt rounding
        return np.einsum("ij,ij->i", p, p)
    if norm == "l1":
        return np.abs(p).sum(axis=1)
    raise ValueError(f"unknown norm {norm!r}")


def select_topk(p, alpha: float, norm: str = "l2") -> ShrinkagePlan:
    """Keep the ceil(alpha*n) rows of largest norm; boundary ties go to the lower index."""
    scores = row_scores(p, norm)
    n = len(scores)
    k = kept_count(alpha, n)
    order = np.lexsort((np.arange(n), -scores))
    kept = np.sort(order[:k]).astype(np.int64)
    kept.setflags(write=False)
    return ShrinkagePlan(float(alpha), n, kept)


def gather(p, plan: ShrinkagePlan) -> CompressedSignal:
    p = haar._as_matrix(p)
    if p.shape[0] != plan.n:
        raise DataError(f"plan expects {plan.n} rows, got {p.shape[0]}")
    return CompressedSignal(p[plan.kept], plan)


def scatter(cs: CompressedSignal) -> np.ndarray:
    dense = haar._as_matrix(cs.dense)
    out = np.zeros((cs.plan.n, dense.shape[1]))
    out[cs.plan.kept] = dense
    return out


def compress_reconstruct(h: haar.HaarHierarchy, f, alpha: float, norm: str = "l2"):
    """Return ``(W^T T^T T W f, mse)`` with mse = ||f - out||^2 / (n c)."""
    f = haar._as_matrix(f)
    p = haar.forward(h, f)
    plan = select_topk(p, alpha, norm)
    out = haar.inverse(h, scatter(gather(p, plan)))
    return out, mse(f, out)


def mse(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    d = a - np.asarray(b, dtype=np.float64)
    return float(np.sum(d * d) / a.size)


def shrink_per_channel(p, alpha: float) -> np.ndarray:
    """Per-channel top-k by magnitude; each column keeps its own ceil(alpha*n) rows.

    Reference point for joint shrinkage only: it needs one index list per channel.
    """
    p = haar._as_matrix(p)
    n, c = p.shape
    k = kept_count(alpha, n)
    out = np.zeros_like(p)
    idx = np.arange(n)
    for ch in range(c):
        order = np.lexsort((idx, -np.abs(p[:, ch])))[:k]
        out[order, ch] = p[order, ch]
    return out
