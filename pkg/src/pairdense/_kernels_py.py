"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np


def im2col(x, kh, kw):
    B, H, W, C = x.shape
    ph, pw = kh // 2, kw // 2
    padded = np.zeros((B, H + 2 * ph, W + 2 * pw, C), dtype=x.dtype)
    padded[:, ph:ph + H, pw:pw + W] = x
    out = np.empty((B, H, W, kh, kw, C), dtype=x.dtype)
    for di in range(kh):
        for dj in range(kw):
            out[:, :, :, di, dj] = padded[:, di:di + H, dj:dj + W]
    return out.reshape(B * H * W, kh * kw * C)


def col2im(cols, B, H, W, C, kh, kw):
    ph, pw = kh // 2, kw // 2
    taps = cols.reshape(B, H, W, kh, kw, C)
    padded = np.zeros((B, H + 2 * ph, W + 2 * pw, C), dtype=cols.dtype)
    for di in range(kh):
        for dj in range(kw):
            padded[:, di:di + H, dj:dj + W] += taps[:, :, :, di, dj]
    return np.ascontiguousarray(padded[:, ph:ph + H, pw:pw + W])


def scatter_add_rows(src, index, n_rows):
    out = np.zeros((n_rows, src.shape[1]), dtype=src.dtype)
    np.add.at(out, index, src)
    return out
