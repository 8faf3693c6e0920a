# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: per-pixel softmax top-k selection and weighted
spatial pooling over dense or sparse label maps."""

from libc.math cimport exp

import numpy as np

BACKEND = "native"


def softmax_topk(const double[:, :, ::1] scores, int k):
    """Per-pixel softmax over the class axis, then the k largest entries.

    Returns (indices uint16 (H, W, k), probs float64 (H, W, k)), values
    sorted non-increasing, ties broken by the lower class index.
    """
    cdef Py_ssize_t H = scores.shape[0]
    cdef Py_ssize_t W = scores.shape[1]
    cdef Py_ssize_t C = scores.shape[2]
    if k < 1 or k > C:
        raise ValueError("k out of range")

    idx_arr = np.empty((H, W, k), dtype=np.uint16)
    val_arr = np.empty((H, W, k), dtype=np.float64)
    cdef unsigned short[:, :, ::1] idx = idx_arr
    cdef double[:, :, ::1] vals = val_arr
    buf_arr = np.empty(C, dtype=np.float64)
    cdef double[::1] buf = buf_arr

    cdef Py_ssize_t i, j, c, t, best
    cdef double m, s, v, best_v
    with nogil:
        for i in range(H):
            for j in range(W):
                m = scores[i, j, 0]
                for c in range(1, C):
                    if scores[i, j, c] > m:
                        m = scores[i, j, c]
                s = 0.0
                for c in range(C):
                    v = exp(scores[i, j, c] - m)
                    buf[c] = v
                    s += v
                for c in range(C):
                    buf[c] /= s
                # partial selection sort; strict > keeps the first (lowest)
                # index among ties
                for t in range(k):
                    best = 0
                    best_v = -1.0
                    for c in range(C):
                        if buf[c] > best_v:
                            best_v = buf[c]
                            best = c
                    idx[i, j, t] = <unsigned short> best
                    vals[i, j, t] = best_v
                    buf[best] = -1.0
    return idx_arr, val_arr


def pool_dense(const double[:, :, ::1] values, const double[::1] row_w, const double[::1] col_w):
    """sum_ij row_w[i] col_w[j] values[i, j, :], skipping zero weights."""
    cdef Py_ssize_t H = values.shape[0]
    cdef Py_ssize_t W = values.shape[1]
    cdef Py_ssize_t C = values.shape[2]
    out_arr = np.zeros(C, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j, c
    cdef double wi, w
    with nogil:
        for i in range(H):
            wi = row_w[i]
            if wi == 0.0:
                continue
            for j in range(W):
                w = wi * col_w[j]
                if w == 0.0:
                    continue
                for c in range(C):
                    out[c] += w * values[i, j, c]
    return out_arr


def pool_sparse(
    const unsigned short[:, :, ::1] indices,
    const float[:, :, ::1] values,
    int num_classes,
    const double[::1] row_w,
    const double[::1] col_w,
):
    """Scatter-accumulating variant of pool_dense for sparse top-k maps."""
    cdef Py_ssize_t H = indices.shape[0]
    cdef Py_ssize_t W = indices.shape[1]
    cdef Py_ssize_t K = indices.shape[2]
    out_arr = np.zeros(num_classes, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j, t
    cdef double wi, w
    with nogil:
        for i in range(H):
            wi = row_w[i]
            if wi == 0.0:
                continue
            for j in range(W):
                w = wi * col_w[j]
                if w == 0.0:
                    continue
                for t in range(K):
                    out[indices[i, j, t]] += w * <double> values[i, j, t]
    return out_arr
