import numpy as np
import pytest

from pairdense import hopi
from pairdense.numerics import ParameterStore, ShapeError, gradcheck, ops


def test_four_by_five_concat_shape(rng):
    pt = hopi.build_cross_tensor(rng.normal(size=(4, 2)), rng.normal(size=(5, 2)))
    assert pt.shape == (4, 5, 4)
    assert pt.mode == hopi.CROSS and pt.combine == hopi.CONCAT


def test_pair_values():
    hl = np.array([[1.0, 2.0], [0.0, 0.0]])
    hr = np.array([[3.0, 4.0], [9.0, 9.0]])
    assert hopi.build_cross_tensor(hl, hr, hopi.CONCAT).q.data[0, 0].tolist() == [1, 2, 3, 4]
    assert hopi.build_cross_tensor(hl, hr, hopi.SUM).q.data[0, 0].tolist() == [4, 6]


def test_concat_is_orientation_sensitive():
    hl = np.array([[1.0], [2.0]])
    q = hopi.build_cross_tensor(hl, hl, hopi.CONCAT).q.data
    assert q[0, 1].tolist() == [1, 2] and q[1, 0].tolist() == [2, 1]


def test_sum_symmetric_when_inputs_equal(rng):
    h = rng.normal(size=(5, 3))
    q = hopi.build_cross_tensor(h, h, hopi.SUM).q.data
    np.testing.assert_array_equal(q, q.transpose(1, 0, 2))


def test_joint_shape_and_cross_block(rng):
    hl, hr = rng.normal(size=(4, 2)), rng.normal(size=(5, 2))
    for combine in (hopi.CONCAT, hopi.SUM):
        joint = hopi.build_joint_tensor(hl, hr, combine)
        assert joint.shape == (9, 9, hopi.channels(2, combine))
        cross = hopi.build_cross_tensor(hl, hr, combine).q.data
        np.testing.assert_array_equal(joint.q.data[:4, 4:], cross)
        assert joint.receptor_block() == slice(4, 9)
    q = hopi.build_joint_tensor(hl, hr, hopi.CONCAT).q.data
    np.testing.assert_array_equal(q[:4, :4, :2], np.repeat(hl[:, None], 4, axis=1))  # ligand block
    np.testing.assert_array_equal(q[4:, 4:, 2:], np.repeat(hr[None], 5, axis=0))  # receptor block


def test_joint_sum_fully_symmetric(rng):
    q = hopi.build_joint_tensor(rng.normal(size=(3, 2)), rng.normal(size=(4, 2)), hopi.SUM).q.data
    np.testing.assert_array_equal(q, q.transpose(1, 0, 2))


@pytest.mark.parametrize("combine", [hopi.CONCAT, hopi.SUM])
def test_pointwise_construction(rng, combine):
    hl, hr = rng.normal(size=(4, 3)), rng.normal(size=(5, 3))
    base = hopi.build_cross_tensor(hl, hr, combine).q.data
    hl2 = hl.copy()
    hl2[2] += 1.0
    changed = np.any(hopi.build_cross_tensor(hl2, hr, combine).q.data != base, axis=2)
    assert changed[2].all() and not np.delete(changed, 2, axis=0).any()

    jbase = hopi.build_joint_tensor(hl, hr, combine).q.data
    jchanged = np.any(hopi.build_joint_tensor(hl2, hr, combine).q.data != jbase, axis=2)
    expect = np.zeros_like(jchanged)
    expect[2, :] = expect[:, 2] = True
    np.testing.assert_array_equal(jchanged, expect)


def test_width_mismatch_and_budget(rng):
    with pytest.raises(ShapeError):
        hopi.build_cross_tensor(np.ones((3, 2)), np.ones((3, 3)))
    with pytest.raises(ShapeError):
        hopi.build_joint_tensor(np.ones((3, 2)), np.ones((3, 3)))
    with pytest.raises(hopi.TensorBudgetError, match="exceeds the budget"):
        hopi.build_cross_tensor(np.ones((100, 4)), np.ones((100, 4)), budget=10_000)


@pytest.mark.parametrize("build", [hopi.build_cross_tensor, hopi.build_joint_tensor])
@pytest.mark.parametrize("combine", [hopi.CONCAT, hopi.SUM])
def test_gradcheck_through_construction(rng, build, combine):
    store = ParameterStore({"hl": rng.normal(size=(3, 2)), "hr": rng.normal(size=(4, 2))})
    w = rng.normal(size=build(store["hl"].data, store["hr"].data, combine).shape)
    rep = gradcheck(lambda: ops.sum(build(store["hl"], store["hr"], combine).q * w), store)
    assert all(r.passed for r in rep.values())
