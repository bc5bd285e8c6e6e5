"""Pure numpy versions of the compiled kernels in ``_ckernels.pyx``."""
import numpy as np

INV_SQRT2 = 0.7071067811865476


def greedy_scan(u, v, n):
    mate = [-1] * n
    for a, b in zip(u.tolist(), v.tolist()):
        if mate[a] < 0 and mate[b] < 0:
            mate[a] = b
            mate[b] = a
    return np.asarray(mate, dtype=np.int64)


def haar_forward_level(f, pairs, orphan):
    a = f[pairs[:, 0]]
    b = f[pairs[:, 1]]
    detail = (a - b) * INV_SQRT2
    coarse = (a + b) * INV_SQRT2
    if orphan >= 0:
        coarse = np.vstack([coarse, f[orphan][None, :]])
    return detail, coarse


def haar_inverse_level(detail, coarse, pairs, orphan, n_fine):
    npairs = pairs.shape[0]
    fine = np.empty((n_fine, coarse.shape[1]), dtype=np.float64)
    avg = coarse[:npairs]
    fine[pairs[:, 0]] = (avg + detail) * INV_SQRT2
    fine[pairs[:, 1]] = (avg - detail) * INV_SQRT2
    if orphan >= 0:
        fine[orphan] = coarse[npairs]
    return fine


def segment_max(values, indptr):
    nseg = len(indptr) - 1
    out = np.zeros((nseg, values.shape[1]), dtype=np.float64)
    nonempty = np.flatnonzero(np.diff(indptr) > 0)
    if len(nonempty):
        # reduceat over the starts of non-empty segments only
        out[nonempty] = np.maximum.reduceat(values, indptr[nonempty], axis=0)
    return out
