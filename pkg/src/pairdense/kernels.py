"""Kernel backend selection.

The compiled extension is used when it was built and ``PAIRDENSE_PURE_PYTHON``
is unset; otherwise the numpy fallback is loaded. Both expose ``im2col``,
``col2im`` and ``scatter_add_rows`` with identical semantics.
"""

import os

import numpy as np

from . import _kernels_py

_compiled = None
if not os.environ.get("PAIRDENSE_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"


def _impl(name):
    return getattr(_compiled if _compiled is not None else _kernels_py, name)


def im2col(x, kh, kw):
    x = np.ascontiguousarray(x)
    return _impl("im2col")(x, kh, kw)


def col2im(cols, shape, kh, kw):
    B, H, W, C = shape
    return _impl("col2im")(np.ascontiguousarray(cols), B, H, W, C, kh, kw)


def scatter_add_rows(src, index, n_rows):
    src = np.ascontiguousarray(src)
    index = np.ascontiguousarray(index, dtype=np.int64)
    return _impl("scatter_add_rows")(src, index, n_rows)
