import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pairdense import hopi
from pairdense.evaluation import (UndefinedAUC, config_digest, evaluate, med_auc, midranks,
                                  roc_auc, roc_points, score_complex)
from pairdense.model import ModelConfig, PairDenseModel
from pairdense.protein_graph import synth_complex


def brute_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return total / (len(pos) * len(neg))


def test_worked_examples():
    assert roc_auc([0.9, 0.8, 0.3, 0.1], [1, 1, 0, 0]) == 1.0
    assert roc_auc([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0]) == 0.5
    assert roc_auc([0.8, 0.8, 0.2, 0.1], [1, 0, 1, 0]) == 0.625
    assert roc_auc([0.9, 0.4, 0.4, 0.1], [1, 0, 1, 0]) == pytest.approx(0.875)
    assert roc_auc([0.2, 0.6, 0.6, 0.9], [1, 1, 0, 0]) == pytest.approx(0.125)


def test_midranks():
    np.testing.assert_array_equal(midranks([3.0, 1.0, 3.0, 2.0]), [3.5, 1, 3.5, 2])


@pytest.mark.parametrize("n", [2, 10, 200, 2000])
def test_matches_brute_force(n, rng):
    scores = np.round(rng.normal(size=n), 1)  # plenty of ties
    labels = (rng.uniform(size=n) < 0.3).astype(int)
    labels[0], labels[1] = 1, 0
    assert roc_auc(scores, labels) == pytest.approx(brute_auc(scores, labels), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(-5, 5), st.booleans()), min_size=2, max_size=40))
def test_invariant_under_monotone_transform(pairs):
    scores = np.array([p[0] for p in pairs], float)
    labels = np.array([p[1] for p in pairs], int)
    if labels.min() == labels.max():
        with pytest.raises(UndefinedAUC):
            roc_auc(scores, labels)
        return
    a = roc_auc(scores, labels)
    assert roc_auc(np.exp(scores) * 3 + 1, labels) == a
    assert roc_auc(-scores, labels) == pytest.approx(1 - a, abs=1e-12)
    assert a == pytest.approx(brute_auc(scores, labels), abs=1e-12)


def test_roc_points_end_at_corners(rng):
    fpr, tpr = roc_points(rng.normal(size=50), rng.integers(0, 2, size=50))
    assert (fpr[0], tpr[0], fpr[-1], tpr[-1]) == (0, 0, 1, 1)
    assert (np.diff(fpr) >= 0).all() and (np.diff(tpr) >= 0).all()
    # trapezoid area equals the rank estimate
    s = rng.normal(size=60)
    y = rng.integers(0, 2, size=60)
    f, t = roc_points(s, y)
    assert float(np.sum(np.diff(f) * (t[1:] + t[:-1]) / 2)) == pytest.approx(roc_auc(s, y), abs=1e-12)


def test_med_auc():
    assert med_auc([0.7, 0.9, 0.8]) == 0.8
    assert med_auc([0.6, 0.9, 0.8, 0.7]) == pytest.approx(0.75)
    assert med_auc([0.4]) == 0.4
    with pytest.raises(ValueError):
        med_auc([])


def test_mismatched_lengths():
    with pytest.raises(ValueError):
        roc_auc([0.1, 0.2], [1])


def zero_model(c, mode=hopi.CROSS):
    cfg = ModelConfig(c.ligand.d, c.ligand.d_e, blocks=1, channels=4, mode=mode)
    return PairDenseModel(cfg, seed=0, zero_head=True)


def test_zero_head_scores_one_half():
    data = [synth_complex(s, 12, 14, d=4, k=3, complex_id=f"c{s}") for s in range(3)]
    report = evaluate(zero_model(data[0]), data)
    assert report["medauc"] == 0.5
    assert [r["complex_id"] for r in report["per_complex"]] == ["c0", "c1", "c2"]


def test_single_class_complex_excluded(small_complex):
    model = zero_model(small_complex)
    empty = synth_complex(3, 12, 14, d=4, k=3)
    empty.cross_positives = np.zeros((0, 2), dtype=np.int64)
    with pytest.warns(UserWarning, match="single-class"):
        assert score_complex(model, empty) is None
    with pytest.warns(UserWarning):
        report = evaluate(model, [small_complex, empty])
    assert len(report["per_complex"]) == 1


def test_evaluate_deterministic_and_digest(small_complex):
    model = PairDenseModel(ModelConfig(4, 2, blocks=1, channels=4), seed=1)
    a = evaluate(model, [small_complex], config_digest=config_digest({"x": 1}), roc_dump=True)
    b = evaluate(model, [small_complex], config_digest=config_digest({"x": 1}), roc_dump=True)
    assert a == b
    assert len(a["config_digest"]) == 16 and "roc" in a


def test_joint_mode_scores_cross_block_only(small_complex):
    model = PairDenseModel(ModelConfig(4, 2, blocks=1, channels=4, mode=hopi.JOINT), seed=1)
    full = model.forward(small_complex).data
    pred = model.predict(small_complex).logits
    n_l, n_r = small_complex.n_l, small_complex.n_r
    assert full.shape == (n_l + n_r, n_l + n_r) and pred.shape == (n_l, n_r)
    np.testing.assert_array_equal(pred, full[:n_l, n_l:])
    s = score_complex(model, small_complex)
    assert s.auc == roc_auc(full[:n_l, n_l:], small_complex.cross_label_map())
    assert s.n_pairs == n_l * n_r
