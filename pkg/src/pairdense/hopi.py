"""Pairwise interaction tensor Q built from two per-residue feature matrices."""

from __future__ import annotations

from dataclasses import dataclass

from .numerics import ShapeError, Tensor, ops

CONCAT = "concat"
SUM = "sum"
CROSS = "cross"
JOINT = "joint"

DEFAULT_ELEMENT_BUDGET = 50_000_000


class TensorBudgetError(MemoryError):
    pass


@dataclass
class PairTensor:
    q: Tensor  # (rows, cols, c)
    mode: str
    combine: str
    n_l: int
    n_r: int

    @property
    def shape(self):
        return self.q.shape

    def ligand_block(self):
        return slice(0, self.n_l)

    def receptor_block(self):
        """Index range of the receptor in Joint mode (ligand first)."""
        return slice(self.n_l, self.n_l + self.n_r) if self.mode == JOINT else slice(0, self.n_r)


def channels(d, combine):
    return 2 * d if combine == CONCAT else d


def _pair(rows, cols, combine, budget):
    rows, cols = ops.as_tensor(rows), ops.as_tensor(cols)
    if rows.ndim != 2 or cols.ndim != 2 or rows.shape[1] != cols.shape[1]:
        raise ShapeError(f"pair tensor: feature widths differ, {rows.shape} vs {cols.shape}")
    if combine not in (CONCAT, SUM):
        raise ValueError(f"unknown combine mode {combine!r}")
    a, b, d = rows.shape[0], cols.shape[0], rows.shape[1]
    n_elem = a * b * channels(d, combine)
    if budget is not None and n_elem > budget:
        raise TensorBudgetError(f"pair tensor of {a}x{b}x{channels(d, combine)} = {n_elem} "
                                f"elements exceeds the budget of {budget}")
    left = ops.broadcast_to(ops.reshape(rows, (a, 1, d)), (a, b, d))
    right = ops.broadcast_to(ops.reshape(cols, (1, b, d)), (a, b, d))
    if combine == CONCAT:
        return ops.concat([left, right], axis=2)
    return left + right


def build_cross_tensor(h_l, h_r, combine=CONCAT, budget=DEFAULT_ELEMENT_BUDGET) -> PairTensor:
    """Q[i, j] = combine(h_l[i], h_r[j]); inputs are (n, d) in chain order."""
    q = _pair(h_l, h_r, combine, budget)
    return PairTensor(q, CROSS, combine, h_l.shape[0], h_r.shape[0])


def build_joint_tensor(h_l, h_r, combine=CONCAT, budget=DEFAULT_ELEMENT_BUDGET) -> PairTensor:
    """Q over the stacked residue list [ligand; receptor], ligand block first."""
    h_l, h_r = ops.as_tensor(h_l), ops.as_tensor(h_r)
    if h_l.ndim != 2 or h_r.ndim != 2 or h_l.shape[1] != h_r.shape[1]:
        raise ShapeError(f"pair tensor: feature widths differ, {h_l.shape} vs {h_r.shape}")
    g = ops.concat([h_l, h_r], axis=0)
    q = _pair(g, g, combine, budget)
    return PairTensor(q, JOINT, combine, h_l.shape[0], h_r.shape[0])
