# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Semantics must match ``_fallback`` exactly."""
import numpy as np

from libc.math cimport fabs
from libc.stdlib cimport malloc, free


def hard_threshold(double[:, :] a, Py_ssize_t tau):
    cdef Py_ssize_t d = a.shape[0], n = a.shape[1]
    cdef Py_ssize_t i, j, k, count
    cdef double mag
    out_arr = np.zeros((d, n), dtype=np.float64)
    if d == 0 or n == 0 or tau <= 0:
        return out_arr
    # one contiguous row per column of ``a``
    cdef double[:, ::1] cols = np.ascontiguousarray(np.asarray(a).T)
    cdef double[:, ::1] out = out_arr
    # top-tau buffer, sorted by descending magnitude; rows arrive in
    # ascending order so an equal magnitude never displaces an earlier row
    cdef double* top_mag = <double*>malloc(tau * sizeof(double))
    cdef Py_ssize_t* top_idx = <Py_ssize_t*>malloc(tau * sizeof(Py_ssize_t))
    if top_mag == NULL or top_idx == NULL:
        free(top_mag)
        free(top_idx)
        raise MemoryError()
    try:
        with nogil:
            for j in range(n):
                count = 0
                for i in range(d):
                    mag = fabs(cols[j, i])
                    if count == tau:
                        if not mag > top_mag[tau - 1]:
                            continue
                        k = tau - 1
                    else:
                        k = count
                        count += 1
                    while k > 0 and top_mag[k - 1] < mag:
                        top_mag[k] = top_mag[k - 1]
                        top_idx[k] = top_idx[k - 1]
                        k -= 1
                    top_mag[k] = mag
                    top_idx[k] = i
                for k in range(count):
                    out[top_idx[k], j] = cols[j, top_idx[k]]
    finally:
        free(top_mag)
        free(top_idx)
    return out_arr


def label_min(double[:, :] dist, Py_ssize_t[:] label_idx, Py_ssize_t n_labels):
    cdef Py_ssize_t n_probe = dist.shape[0], n_cols = dist.shape[1]
    cdef Py_ssize_t p, c, lab
    cdef double v
    out_arr = np.full((n_probe, n_labels), np.inf, dtype=np.float64)
    cdef double[:, :] out = out_arr
    with nogil:
        for p in range(n_probe):
            for c in range(n_cols):
                lab = label_idx[c]
                v = dist[p, c]
                if v < out[p, lab]:
                    out[p, lab] = v
    return out_arr
