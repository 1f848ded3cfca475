"""Gradient checks over every differentiable piece of the pipeline.

Each entry builds a small randomized problem and returns the gradcheck
report. Used by ``pairdense gradcheck`` and by the test suite.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import dense_head, gnn, hopi
from .model import ModelConfig, PairDenseModel
from .numerics import ParameterStore, gradcheck, ops
from .protein_graph import synth_complex
from .sequential import reorder
from .training import SamplingConfig, masked_loss, sample_pairs

PRIMITIVE_TOL = 1e-5
PIPELINE_TOL = 1e-4


@dataclass
class CheckRow:
    name: str
    max_rel_error: float
    tol: float
    seconds: float

    @property
    def passed(self):
        return self.max_rel_error <= self.tol


def _shape(rng, rank, lo=1, hi=4):
    return tuple(int(v) for v in rng.integers(lo, hi + 1, size=rank))


def _away_from_zero(rng, shape, margin=0.05):
    x = rng.normal(size=shape)
    return np.where(np.abs(x) < margin, np.sign(x + 1e-300) * margin, x)


def _weighted(out, rng):
    """Scalar sum(out * w) with a fixed random w so every output coordinate matters."""
    w = rng.normal(size=out.shape)
    return ops.sum(out * w)


def primitive_problems(rng):
    """Yield (name, store, f) triples covering each primitive at random ranks up to 4."""
    def unary(name, op, positive_margin=False):
        rank = int(rng.integers(1, 5))
        shp = _shape(rng, rank)
        x = _away_from_zero(rng, shp) if positive_margin else rng.normal(size=shp)
        ps = ParameterStore({"x": x})
        w = rng.normal(size=shp)
        return name, ps, lambda: ops.sum(op(ps["x"]) * w)

    yield unary("tanh", ops.tanh)
    yield unary("relu", ops.relu, positive_margin=True)
    yield unary("sigmoid", ops.sigmoid)
    yield unary("scale", lambda t: ops.scale(t, -1.7))

    for name, op in (("add", ops.add), ("sub", ops.sub), ("mul", ops.mul)):
        rank = int(rng.integers(1, 5))
        shp = _shape(rng, rank)
        bshape = tuple(1 if rng.random() < 0.3 else s for s in shp)
        ps = ParameterStore({"a": rng.normal(size=shp), "b": rng.normal(size=bshape)})
        w = rng.normal(size=shp)
        yield name + "(broadcast)", ps, (lambda op=op, ps=ps, w=w: ops.sum(op(ps["a"], ps["b"]) * w))

    rank = int(rng.integers(2, 5))
    shp = _shape(rng, rank)
    axis = int(rng.integers(0, rank))
    ps = ParameterStore({"x": rng.normal(size=shp)})
    w = rng.normal(size=shp)
    yield "softmax", ps, (lambda ps=ps, w=w, axis=axis: ops.sum(ops.softmax(ps["x"], axis=axis) * w))

    ps = ParameterStore({"x": rng.normal(size=shp)})
    wm = rng.normal(size=tuple(s for i, s in enumerate(shp) if i != axis))
    yield "mean", ps, (lambda ps=ps, wm=wm, axis=axis: ops.sum(ops.mean(ps["x"], axis=axis) * wm))

    shp2 = list(shp)
    shp2[axis] = int(rng.integers(1, 4))
    ps = ParameterStore({"a": rng.normal(size=shp), "b": rng.normal(size=tuple(shp2))})
    yield "concat", ps, (lambda ps=ps, axis=axis: _weighted(ops.concat([ps["a"], ps["b"]], axis=axis),
                                                            np.random.default_rng(1)))

    m, k, n = _shape(rng, 3, 1, 5)
    batch = _shape(rng, int(rng.integers(0, 3)), 1, 3)
    ps = ParameterStore({"a": rng.normal(size=batch + (m, k)), "b": rng.normal(size=(k, n))})
    yield "matmul", ps, (lambda ps=ps: _weighted(ps["a"] @ ps["b"], np.random.default_rng(2)))

    ps = ParameterStore({"x": rng.normal(size=(6, 3))})
    idx = rng.integers(0, 6, size=(4, 5))
    yield "take_rows", ps, (lambda ps=ps, idx=idx: _weighted(ops.take_rows(ps["x"], idx),
                                                              np.random.default_rng(3)))

    H, W = _shape(rng, 2, 2, 6)
    cin, cout = _shape(rng, 2, 1, 4)
    ps = ParameterStore({"x": rng.normal(size=(2, H, W, cin)), "w": rng.normal(size=(3, 3, cin, cout)),
                         "b": rng.normal(size=cout)})
    yield "conv2d", ps, (lambda ps=ps: _weighted(ops.conv2d(ps["x"], ps["w"], ps["b"]),
                                                  np.random.default_rng(4)))

    n = int(rng.integers(2, 20))
    labels = rng.integers(0, 2, size=n)
    ps = ParameterStore({"z": rng.normal(size=n) * 3})
    yield "bce_with_logits", ps, (lambda ps=ps, labels=labels: ops.bce_with_logits(ps["z"], labels))


def _graph_problem(rng, variant):
    c = synth_complex(int(rng.integers(1 << 30)), 5, 6, d=3, k=2, contact_radius=3.0)
    ps = ParameterStore()
    layers = gnn.init_layers(ps, rng, 1, 3, 2, variant)
    if variant == gnn.NEIWA:
        ps["gnn/0/q"].data = rng.normal(size=3)
    x = ps.add("x", c.ligand.node_features)
    g = c.ligand
    w = rng.normal(size=(g.m, 3))
    return ps, lambda: ops.sum(gnn.layer_forward(x, g.neighbors, g.edge_features, layers[0]) * w)


def pipeline_problems(rng):
    for variant in gnn.VARIANTS:
        ps, f = _graph_problem(rng, variant)
        yield f"gnn[{variant}]", ps, f

    order = rng.permutation(7)
    ps = ParameterStore({"h": rng.normal(size=(7, 3))})
    w = rng.normal(size=(7, 3))
    yield "reorder", ps, (lambda: ops.sum(reorder(ps["h"], order) * w))

    for build in (hopi.build_cross_tensor, hopi.build_joint_tensor):
        for combine in (hopi.CONCAT, hopi.SUM):
            ps2 = ParameterStore({"hl": rng.normal(size=(3, 2)), "hr": rng.normal(size=(4, 2))})
            probe = build(ps2["hl"].data, ps2["hr"].data, combine).q
            wq = rng.normal(size=probe.shape)
            yield (f"{build.__name__}[{combine}]", ps2,
                   (lambda ps2=ps2, build=build, combine=combine, wq=wq:
                    ops.sum(build(ps2["hl"], ps2["hr"], combine).q * wq)))

    ps3 = ParameterStore()
    head = dense_head.init_head(ps3, rng, 4, 5, 2)
    for _, t in ps3.items():
        t.data = t.data + 0.1 * rng.normal(size=t.shape)
    xin = ps3.add("q", rng.normal(size=(5, 6, 4)))
    wl = rng.normal(size=(5, 6))
    yield "residual_head", ps3, (lambda: ops.sum(dense_head.head_forward(xin, head) * wl))


def end_to_end_problem(seed=0, variant=gnn.NEIA, mode=hopi.CROSS):
    """Loss of the full model on a 4x5 synthetic complex."""
    for radius in (2.0, 2.5, 3.0, 4.0, 6.0):
        try:
            c = synth_complex(seed, 4, 5, d=2, k=2, contact_radius=radius)
            break
        except ValueError:
            continue
    cfg = ModelConfig(d_node=2, d_edge=2, gnn_layers=2, gnn_variant=variant, mode=mode,
                      blocks=2, channels=6)
    model = PairDenseModel(cfg, seed=seed)
    rng = np.random.default_rng(seed)
    for name, t in model.params.items():
        t.data = t.data + 0.1 * rng.normal(size=t.shape)
    n_pos = len(c.cross_positives)
    ratio = min(2.0, (20 - n_pos) / n_pos)
    samples = sample_pairs(c, SamplingConfig(pn_ratio=ratio, seed=seed), mode=mode)
    coords, labels = samples.coords, samples.labels
    return model.params, lambda: masked_loss(model.forward(c), coords, labels)


def run_all(seed=0, step=1e-5):
    rng = np.random.default_rng(seed)
    rows = []

    def record(name, ps, f, tol):
        t = time.perf_counter()
        rep = gradcheck(f, ps, step=step, tol=tol)
        worst = max(r.max_rel_error for r in rep.values())
        rows.append(CheckRow(name, worst, tol, time.perf_counter() - t))

    for name, ps, f in primitive_problems(rng):
        record(name, ps, f, PRIMITIVE_TOL)
    for name, ps, f in pipeline_problems(rng):
        record(name, ps, f, PRIMITIVE_TOL)
    for variant in gnn.VARIANTS:
        for mode in (hopi.CROSS, hopi.JOINT):
            ps, f = end_to_end_problem(seed, variant, mode)
            record(f"end_to_end[{variant},{mode}]", ps, f, PIPELINE_TOL)
    return rows


def format_table(rows) -> str:
    lines = [f"{'check':40s} {'max rel err':>12s} {'tol':>8s} {'status':>6s}"]
    for r in rows:
        lines.append(f"{r.name:40s} {r.max_rel_error:12.3e} {r.tol:8.0e} "
                     f"{'PASS' if r.passed else 'FAIL':>6s}")
    return "\n".join(lines)
