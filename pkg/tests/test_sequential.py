import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pairdense.numerics import ParameterStore, Tensor, gradcheck, ops
from pairdense.sequential import inverse, reorder


def test_identity_order(rng):
    h = rng.normal(size=(5, 3))
    np.testing.assert_array_equal(reorder(h, np.arange(5)), h)


def test_three_column_example():
    a, b, c = [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]
    stored = np.array([a, b, c])
    order = np.array([3, 1, 2]) - 1  # 1-based (3, 1, 2) as stored in files
    np.testing.assert_array_equal(reorder(stored, order), np.array([b, c, a]))


def brute_force_inverse(order):
    m = len(order)
    return np.array([next(s for s in range(m) if order[s] == p) for p in range(m)])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 30), st.integers(0, 2**31))
def test_reorder_then_inverse_recovers(m, seed):
    r = np.random.default_rng(seed)
    h = r.normal(size=(m, 4))
    order = r.permutation(m)
    inv = brute_force_inverse(order)
    assert np.array_equal(inverse(order), inv)
    chain = reorder(h, order)
    np.testing.assert_array_equal(reorder(chain, inv), h)
    # exactly rounded sums so the comparison is independent of row order
    assert math.fsum((chain**2).ravel()) == math.fsum((h**2).ravel())
    assert sorted(map(tuple, chain)) == sorted(map(tuple, h))


def test_rejects_non_permutation():
    with pytest.raises(ValueError, match="permutation"):
        reorder(np.ones((3, 2)), [0, 0, 1])
    with pytest.raises(ValueError):
        reorder(np.ones((3, 2)), [0, 1])


def test_gradient_is_inverse_permuted(rng):
    order = rng.permutation(6)
    h = Tensor(rng.normal(size=(6, 2)), requires_grad=True)
    w = rng.normal(size=(6, 2))
    ops.sum(reorder(h, order) * w).backward()
    # d/dh[s] of sum(H * w) is w at chain position order[s]
    np.testing.assert_array_equal(h.grad, w[order])
    store = ParameterStore({"h": rng.normal(size=(6, 2))})
    rep = gradcheck(lambda: ops.sum(reorder(store["h"], order) * w), store)
    assert rep["h"].passed
