# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Signatures mirror ``_pykernels``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef double INV_SQRT2 = 0.7071067811865476


def greedy_scan(const cnp.int64_t[:] u, const cnp.int64_t[:] v, Py_ssize_t n):
    cdef cnp.int64_t[:] mate
    cdef Py_ssize_t e, a, b
    out = np.full(n, -1, dtype=np.int64)
    mate = out
    for e in range(u.shape[0]):
        a = u[e]
        b = v[e]
        if mate[a] < 0 and mate[b] < 0:
            mate[a] = b
            mate[b] = a
    return out


def haar_forward_level(const double[:, :] f, const cnp.int64_t[:, :] pairs, Py_ssize_t orphan):
    cdef Py_ssize_t npairs = pairs.shape[0], c = f.shape[1]
    cdef Py_ssize_t k, ch, i, j
    cdef double a, b
    detail_arr = np.empty((npairs, c), dtype=np.float64)
    coarse_arr = np.empty((npairs + (1 if orphan >= 0 else 0), c), dtype=np.float64)
    cdef double[:, :] detail = detail_arr
    cdef double[:, :] coarse = coarse_arr
    for k in range(npairs):
        i = pairs[k, 0]
        j = pairs[k, 1]
        for ch in range(c):
            a = f[i, ch]
            b = f[j, ch]
            detail[k, ch] = (a - b) * INV_SQRT2
            coarse[k, ch] = (a + b) * INV_SQRT2
    if orphan >= 0:
        for ch in range(c):
            coarse[npairs, ch] = f[orphan, ch]
    return detail_arr, coarse_arr


def haar_inverse_level(const double[:, :] detail, const double[:, :] coarse,
                       const cnp.int64_t[:, :] pairs, Py_ssize_t orphan, Py_ssize_t n_fine):
    cdef Py_ssize_t npairs = pairs.shape[0], c = coarse.shape[1]
    cdef Py_ssize_t k, ch, i, j
    cdef double avg, det
    fine_arr = np.empty((n_fine, c), dtype=np.float64)
    cdef double[:, :] fine = fine_arr
    for k in range(npairs):
        i = pairs[k, 0]
        j = pairs[k, 1]
        for ch in range(c):
            avg = coarse[k, ch]
            det = detail[k, ch]
            fine[i, ch] = (avg + det) * INV_SQRT2
            fine[j, ch] = (avg - det) * INV_SQRT2
    if orphan >= 0:
        for ch in range(c):
            fine[orphan, ch] = coarse[npairs, ch]
    return fine_arr


def segment_max(const double[:, :] values, const cnp.int64_t[:] indptr):
    cdef Py_ssize_t nseg = indptr.shape[0] - 1, c = values.shape[1]
    cdef Py_ssize_t s, r, ch
    cdef double x
    out_arr = np.zeros((nseg, c), dtype=np.float64)
    cdef double[:, :] out = out_arr
    for s in range(nseg):
        if indptr[s] == indptr[s + 1]:
            continue
        for ch in range(c):
            out[s, ch] = values[indptr[s], ch]
        for r in range(indptr[s] + 1, indptr[s + 1]):
            for ch in range(c):
                x = values[r, ch]
                if x > out[s, ch]:
                    out[s, ch] = x
    return out_arr
