"""Restore chain order of per-residue feature rows."""

from __future__ import annotations

import numpy as np

from .numerics import ops


def check_order(order, m=None) -> np.ndarray:
    order = np.asarray(order, dtype=np.int64)
    m = len(order) if m is None else m
    if order.shape != (m,) or not np.array_equal(np.sort(order), np.arange(m)):
        raise ValueError(f"order is not a permutation of 0..{m - 1}")
    return order


def inverse(order) -> np.ndarray:
    order = check_order(order)
    inv = np.empty_like(order)
    inv[order] = np.arange(len(order))
    return inv


def reorder(features, order):
    """Place stored row ``s`` at chain position ``order[s]``.

    ``features`` is (m, d) with one row per stored node (a Tensor or array).
    Row ``p`` of the result is the stored row whose order entry equals ``p``.
    """
    m = features.shape[0]
    inv = inverse(check_order(order, m))
    if isinstance(features, ops.Tensor):
        return ops.take_rows(features, inv)
    return np.asarray(features)[inv]
