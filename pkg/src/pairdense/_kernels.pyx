# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops for the convolution and neighbour-gather primitives.

Signatures mirror :mod:`pairdense._kernels_py` exactly; ``pairdense.kernels``
picks one of the two at import time.
"""
import numpy as np
cimport numpy as cnp
from cython cimport floating

cnp.import_array()


def im2col(floating[:, :, :, ::1] x, int kh, int kw):
    """Unfold ``x`` (B, H, W, C) into (B*H*W, kh*kw*C) rows, zero padded to keep H, W."""
    cdef Py_ssize_t B = x.shape[0], H = x.shape[1], W = x.shape[2], C = x.shape[3]
    cdef Py_ssize_t ph = kh // 2, pw = kw // 2
    cdef Py_ssize_t b, i, j, di, dj, c, si, sj, row, col
    dtype = np.float64 if floating is double else np.float32
    out_arr = np.zeros((B * H * W, kh * kw * C), dtype=dtype)
    cdef floating[:, ::1] out = out_arr
    with nogil:
        for b in range(B):
            for i in range(H):
                for j in range(W):
                    row = (b * H + i) * W + j
                    for di in range(kh):
                        si = i + di - ph
                        if si < 0 or si >= H:
                            continue
                        for dj in range(kw):
                            sj = j + dj - pw
                            if sj < 0 or sj >= W:
                                continue
                            col = (di * kw + dj) * C
                            for c in range(C):
                                out[row, col + c] = x[b, si, sj, c]
    return out_arr


def col2im(floating[:, ::1] cols, Py_ssize_t B, Py_ssize_t H, Py_ssize_t W,
           Py_ssize_t C, int kh, int kw):
    """Adjoint of :func:`im2col`: fold rows back, summing overlapping taps."""
    cdef Py_ssize_t ph = kh // 2, pw = kw // 2
    cdef Py_ssize_t b, i, j, di, dj, c, si, sj, row, col
    dtype = np.float64 if floating is double else np.float32
    out_arr = np.zeros((B, H, W, C), dtype=dtype)
    cdef floating[:, :, :, ::1] out = out_arr
    with nogil:
        for b in range(B):
            for i in range(H):
                for j in range(W):
                    row = (b * H + i) * W + j
                    for di in range(kh):
                        si = i + di - ph
                        if si < 0 or si >= H:
                            continue
                        for dj in range(kw):
                            sj = j + dj - pw
                            if sj < 0 or sj >= W:
                                continue
                            col = (di * kw + dj) * C
                            for c in range(C):
                                out[b, si, sj, c] += cols[row, col + c]
    return out_arr


def scatter_add_rows(floating[:, ::1] src, cnp.int64_t[::1] index, Py_ssize_t n_rows):
    """``out[index[r]] += src[r]`` for every row ``r``; fixed (ascending) reduction order."""
    cdef Py_ssize_t r, c, t
    cdef Py_ssize_t R = src.shape[0], D = src.shape[1]
    dtype = np.float64 if floating is double else np.float32
    out_arr = np.zeros((n_rows, D), dtype=dtype)
    cdef floating[:, ::1] out = out_arr
    with nogil:
        for r in range(R):
            t = index[r]
            for c in range(D):
                out[t, c] += src[r, c]
    return out_arr
