"""Acceptance gate. Each criterion prints one PASS/FAIL line; criterion 8 is logged only."""

import json
import math
import time

import numpy as np
import pytest

from pairdense import checks, dense_head, gnn, hopi
from pairdense.cli import main
from pairdense.evaluation import roc_auc, score_complex
from pairdense.model import ModelConfig, PairDenseModel
from pairdense.numerics import ParameterStore, Tensor
from pairdense.protein_graph import load_dataset, synth_complex
from pairdense.training import SamplingConfig, TrainConfig, model_config_for, sample_pairs, train

from test_evaluation import brute_auc
from test_training import make_complex

E2E_EPOCHS = 30
RUN_LIMIT_S = 600


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}", flush=True)
    return emit


def test_c1_gradient_correctness(report):
    t0 = time.perf_counter()
    rows = checks.run_all(seed=0)
    elapsed = time.perf_counter() - t0
    prim = [r for r in rows if r.tol == checks.PRIMITIVE_TOL]
    e2e = [r for r in rows if r.name.startswith("end_to_end")]
    ok = all(r.passed for r in rows) and e2e and prim and elapsed < 60
    worst = max(r.max_rel_error for r in rows)
    report(1, ok, f"{len(rows)} checks, worst rel err {worst:.2e}, {elapsed:.1f}s")
    assert all(r.passed for r in rows), [r.name for r in rows if not r.passed]
    assert e2e and all(r.tol == checks.PIPELINE_TOL for r in e2e)
    assert elapsed < 60


def test_c2_layer_oracles(report):
    z1 = math.tanh(1.0)
    layer = gnn.GnnLayerParams(Tensor([[1.0]]), Tensor([[0.0]]))
    z = gnn.aggregate_neighborhood([[1.0, 0.0]], [[0.0, 0.0]], layer).data
    neia = gnn.neia_forward([0.5], z).data[0]
    e = math.exp(z1)
    a_ref = e / (e + 1.0)
    a = gnn.attention_weights(z, [1.0]).data
    neiwa = gnn.neiwa_forward([0.5], z, [1.0]).data[0]
    errs = [abs(z[0, 0] - z1), abs(neia - (0.5 + z1 / 2)), abs(a[0] - a_ref),
            abs(neiwa - (0.5 + 0.5 * z1 * a_ref))]
    rng = np.random.default_rng(0)
    h, zz = rng.normal(size=4), np.tanh(rng.normal(size=(4, 5)))
    ratio_err = np.max(np.abs((gnn.neiwa_forward(h, zz, np.zeros(4)).data - h)
                              - (gnn.neia_forward(h, zz).data - h) / 5))
    ok = max(errs) <= 1e-9 and ratio_err <= 1e-15
    report(2, ok, f"max oracle err {max(errs):.1e}, q=0 ratio err {ratio_err:.1e}")
    assert ok


def test_c3_shape_contract(report):
    rng = np.random.default_rng(0)
    q = hopi.build_cross_tensor(rng.normal(size=(4, 2)), rng.normal(size=(5, 2)), hopi.CONCAT)
    store = ParameterStore()
    head = dense_head.init_head(store, rng, 4, 8, 3)
    out = dense_head.head_forward(q.q, head)
    c = synth_complex(0, 4, 5, d=2, k=2, contact_radius=4.0)
    model = PairDenseModel(ModelConfig(2, 2, blocks=3, channels=8), seed=0)
    ok = (q.shape == (4, 5, 4) and out.shape == (4, 5)
          and model.pair_tensor(c).shape == (4, 5, 4) and model.predict(c).logits.shape == (4, 5))
    report(3, ok, f"Q {q.shape}, map {out.shape}")
    assert ok


def test_c4_auc_oracle(report):
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 60))
        scores = np.round(rng.normal(size=n), int(rng.integers(0, 3)))
        labels = rng.integers(0, 2, size=n)
        labels[0], labels[1] = 1, 0
        worst = max(worst, abs(roc_auc(scores, labels) - brute_auc(scores, labels)))
    tie = roc_auc([0.8, 0.8, 0.2, 0.1], [1, 0, 1, 0])
    ok = worst <= 1e-12 and tie == 0.625
    report(4, ok, f"max |fast - brute| {worst:.1e} over 1000 instances, tie example {tie}")
    assert ok


def test_c5_receptive_field(report):
    rng = np.random.default_rng(2)
    details, ok = [], True
    for blocks in (1, 3, 5):
        store = ParameterStore()
        head = dense_head.init_head(store, rng, 3, 4, blocks)
        side = 4 * blocks + 7
        q = rng.normal(size=(side, side, 3))
        base = dense_head.head_forward(q, head).data
        q[side // 2, side // 2] += 1.0
        rows, cols = np.nonzero(dense_head.head_forward(q, head).data != base)
        reach = int(np.max(np.maximum(np.abs(rows - side // 2), np.abs(cols - side // 2))))
        ok &= reach <= 2 * blocks and head.receptive_radius == 2 * blocks
        details.append(f"B={blocks} reach {reach}<={2 * blocks}")
    report(5, ok, ", ".join(details))
    assert ok


def test_c6_sampler_contracts(report):
    c = make_complex(5, 101, 5)
    s = sample_pairs(c, SamplingConfig(pn_ratio=10, seed=1))
    ok = len(s.negatives) == 50 and len(s.cross_positives) == 5
    rich = make_complex(15, 15, 10, 60, 60)
    for ratio in (7, 5, 3, 1):
        s = sample_pairs(rich, SamplingConfig(pn_ratio=10, inprotein_ratio=ratio, seed=3))
        target = math.floor(100 / ratio)
        need = target - 10
        ok &= s.n_positive == target
        ok &= len(s.ligand_positives) - len(s.receptor_positives) == need % 2
        again = sample_pairs(rich, SamplingConfig(pn_ratio=10, inprotein_ratio=ratio, seed=3))
        ok &= np.array_equal(s.coords, again.coords)
    report(6, ok, "PN floor counts, in-protein targets 1:7/1:5/1:3/1:1, equal split, seeded")
    assert ok


@pytest.fixture(scope="module")
def synthetic_set(tmp_path_factory):
    d = tmp_path_factory.mktemp("accept")
    assert main(["synth", "--complexes", "20", "--seed", "7", "--out", str(d)]) == 0
    assert main(["split", "--data", str(d), "--seed", "0"]) == 0
    return d


def cli_run(data_dir, out_dir, variant):
    t0 = time.perf_counter()
    assert main(["train", "--data", str(data_dir), "--out", str(out_dir), "--gnn", variant,
                 "--layers", "1", "--epochs", str(E2E_EPOCHS), "--seed", "0"]) == 0
    assert main(["evaluate", "--data", str(data_dir), "--checkpoint", str(out_dir / "model.ckpt"),
                 "--out", str(out_dir / "report.json")]) == 0
    elapsed = time.perf_counter() - t0
    return json.loads((out_dir / "report.json").read_text())["medauc"], elapsed


@pytest.fixture(scope="module")
def neia_run(synthetic_set, tmp_path_factory):
    return cli_run(synthetic_set, tmp_path_factory.mktemp("neia"), gnn.NEIA)


@pytest.mark.slow
def test_c7_synthetic_end_to_end(report, synthetic_set, neia_run):
    sizes = [c.n_l + c.n_r for c in load_dataset(synthetic_set).values()]
    medauc, elapsed = neia_run

    c = synth_complex(1, 40, 50)
    cfg = TrainConfig(epochs=1000, dropout=0.0, weight_decay=0.0, batch_size=128)
    model = PairDenseModel(model_config_for(cfg, c.ligand.d, c.ligand.d_e), seed=0)
    t0 = time.perf_counter()
    train([c], model, cfg, SamplingConfig(), max_iterations=200)
    overfit_s = time.perf_counter() - t0
    train_auc = score_complex(model, c).auc

    ok = (medauc >= 0.85 and train_auc >= 0.99 and elapsed <= RUN_LIMIT_S
          and overfit_s <= RUN_LIMIT_S and len(sizes) == 20 and 40 <= min(sizes) <= max(sizes) <= 80)
    report(7, ok, f"test MedAUC {medauc:.3f} ({E2E_EPOCHS} epochs, {elapsed:.0f}s); "
                  f"overfit train AUC {train_auc:.4f} in 200 iters ({overfit_s:.0f}s)")
    assert medauc >= 0.85
    assert train_auc >= 0.99
    assert elapsed <= RUN_LIMIT_S and overfit_s <= RUN_LIMIT_S


@pytest.mark.slow
def test_c8_neiwa_trend_logged(capsys, synthetic_set, neia_run, tmp_path):
    neiwa, elapsed = cli_run(synthetic_set, tmp_path, gnn.NEIWA)
    neia = neia_run[0]
    holds = neiwa >= neia - 0.01
    with capsys.disabled():
        print(f"\nCRITERION 8: {'PASS' if holds else 'FAIL'} (soft, not gating) "
              f"NeiWA {neiwa:.3f} vs NeiA {neia:.3f} ({elapsed:.0f}s)", flush=True)
