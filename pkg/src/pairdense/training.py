"""Pair sampling, masked loss and the training loop."""

from __future__ import annotations

import json
import logging
import math
import time
import warnings
import zlib
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import gnn, hopi
from .evaluation import evaluate
from .model import ModelConfig, PairDenseModel
from .numerics import AdamState, ParameterStore, adam_step, ops, save_checkpoint

log = logging.getLogger(__name__)

INPROTEIN_RATIOS = (7, 5, 3, 1)

SEARCH_SPACE = {
    "blocks": (3, 4, 5),
    "channels": (128, 192, 256),
    "lr": (1e-1, 1e-2, 5e-3, 1e-3),
    "batch_size": (32, 64, 128),
    "epochs": (50, 80, 100),
    "weight_decay": (1e-3, 1e-4, 1e-5),
    "dropout": (0.3, 0.5, 0.8),
}


class TrainingDiverged(FloatingPointError):
    pass


@dataclass
class SamplingConfig:
    pn_ratio: float = 10.0  # negatives per positive, i.e. 1:pn_ratio
    inprotein_ratio: float | None = None  # final 1:r after in-protein positives, or None
    seed: int = 0

    def __post_init__(self):
        if self.pn_ratio <= 0:
            raise ValueError("pn_ratio must be > 0")
        if self.inprotein_ratio is not None and self.inprotein_ratio <= 0:
            raise ValueError("inprotein_ratio must be > 0")


@dataclass
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 128
    epochs: int = 50
    weight_decay: float = 1e-5
    dropout: float = 0.3
    blocks: int = 3
    channels: int = 128
    gnn_layers: int = 1
    gnn_variant: str = gnn.NEIA
    combine: str = hopi.CONCAT
    patch_threshold: int = 256
    seed: int = 0
    strict: bool = False  # reject values outside SEARCH_SPACE

    def __post_init__(self):
        if self.gnn_variant not in gnn.VARIANTS:
            raise ValueError(f"gnn_variant must be one of {gnn.VARIANTS}")
        if self.combine not in (hopi.CONCAT, hopi.SUM):
            raise ValueError("combine must be 'concat' or 'sum'")
        if self.epochs < 0 or self.batch_size < 1 or self.lr <= 0 or self.blocks < 0:
            raise ValueError("epochs >= 0, batch_size >= 1, lr > 0, blocks >= 0 required")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")
        if self.strict:
            for name, domain in SEARCH_SPACE.items():
                if getattr(self, name) not in domain:
                    raise ValueError(f"{name}={getattr(self, name)} outside search space {domain}")


def config_from_mapping(cls, mapping: dict):
    known = {f.name for f in fields(cls)}
    unknown = set(mapping) - known
    if unknown:
        raise ValueError(f"unknown {cls.__name__} fields: {sorted(unknown)}")
    return cls(**mapping)


@dataclass
class TrainingSampleSet:
    """Sampled pairs for one complex, in pair-tensor coordinates."""

    complex_id: str
    cross_positives: np.ndarray
    ligand_positives: np.ndarray
    receptor_positives: np.ndarray
    negatives: np.ndarray

    @property
    def n_positive(self):
        return len(self.cross_positives) + len(self.ligand_positives) + len(self.receptor_positives)

    @property
    def coords(self):
        return np.concatenate([self.cross_positives, self.ligand_positives,
                               self.receptor_positives, self.negatives]).astype(np.int64)

    @property
    def labels(self):
        return np.r_[np.ones(self.n_positive), np.zeros(len(self.negatives))]


def _rng_for(cfg: SamplingConfig, complex_id: str, epoch: int):
    return np.random.default_rng([cfg.seed, epoch, zlib.crc32(complex_id.encode())])


def _chain_pairs(pairs, order_a, order_b):
    if len(pairs) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    return np.column_stack([order_a[pairs[:, 0]], order_b[pairs[:, 1]]]).astype(np.int64)


def sample_pairs(c, cfg: SamplingConfig, epoch: int = 0, mode: str | None = None):
    """Keep all cross positives, down-sample cross negatives to 1:pn_ratio, and
    optionally add in-protein positives up to the final 1:inprotein_ratio.

    Returns ``None`` (with a warning) for a complex without cross positives.
    """
    mode = mode or (hopi.JOINT if cfg.inprotein_ratio is not None else hopi.CROSS)
    if cfg.inprotein_ratio is not None and mode != hopi.JOINT:
        raise ValueError("in-protein augmentation requires the joint pair tensor")
    rng = _rng_for(cfg, c.complex_id, epoch)
    n_l, n_r = c.n_l, c.n_r
    pos = _chain_pairs(c.cross_positives, c.ligand.order, c.receptor.order)
    if len(pos) == 0:
        warnings.warn(f"{c.complex_id}: no cross positives, skipped", stacklevel=2)
        return None

    is_pos = np.zeros(n_l * n_r, dtype=bool)
    is_pos[pos[:, 0] * n_r + pos[:, 1]] = True
    neg_pool = np.flatnonzero(~is_pos)
    n_neg = math.floor(len(pos) * cfg.pn_ratio + 1e-9)
    if n_neg > len(neg_pool):
        warnings.warn(f"{c.complex_id}: only {len(neg_pool)} negatives for {n_neg} requested",
                      stacklevel=2)
        n_neg = len(neg_pool)
    picked = np.sort(rng.choice(neg_pool, size=n_neg, replace=False))
    neg = np.column_stack([picked // n_r, picked % n_r]).astype(np.int64)

    lig_pos = np.zeros((0, 2), dtype=np.int64)
    rec_pos = np.zeros((0, 2), dtype=np.int64)
    if cfg.inprotein_ratio is not None:
        target = math.floor(n_neg / cfg.inprotein_ratio + 1e-9)
        need = max(0, target - len(pos))
        lig_pool = np.sort(_chain_pairs(c.inprotein_positives_ligand, c.ligand.order, c.ligand.order), axis=1)
        rec_pool = np.sort(_chain_pairs(c.inprotein_positives_receptor, c.receptor.order, c.receptor.order), axis=1)
        want_l, want_r = need - need // 2, need // 2
        take_l, take_r = min(want_l, len(lig_pool)), min(want_r, len(rec_pool))
        # a short side is topped up from the other side's surplus
        short_l, short_r = want_l - take_l, want_r - take_r
        take_l = min(len(lig_pool), take_l + short_r)
        take_r = min(len(rec_pool), take_r + short_l)
        if take_l + take_r < need:
            warnings.warn(f"{c.complex_id}: in-protein supply {len(lig_pool) + len(rec_pool)} "
                          f"below the {need} positives needed", stacklevel=2)
        lig_pos = lig_pool[np.sort(rng.choice(len(lig_pool), size=take_l, replace=False))]
        rec_pos = rec_pool[np.sort(rng.choice(len(rec_pool), size=take_r, replace=False))] + n_l

    if mode == hopi.JOINT:
        pos = pos + np.array([0, n_l])
        neg = neg + np.array([0, n_l])
    return TrainingSampleSet(c.complex_id, pos, lig_pos, rec_pos, neg)


def masked_loss(logits, coords, labels):
    """Mean BCE-with-logits over the sampled coordinates only."""
    coords = np.asarray(coords, dtype=np.int64).reshape(-1, 2)
    if len(coords) == 0:
        raise ValueError("masked_loss: empty sample set")
    rows, cols = logits.shape[-2:]
    if coords[:, 0].min() < 0 or coords[:, 0].max() >= rows or coords[:, 1].min() < 0 \
            or coords[:, 1].max() >= cols:
        raise IndexError(f"masked_loss: sample coordinates outside the {rows}x{cols} map")
    picked = ops.getitem(logits, (coords[:, 0], coords[:, 1]))
    return ops.bce_with_logits(picked, labels)


def samples_loss(logits, samples: TrainingSampleSet):
    return masked_loss(logits, samples.coords, samples.labels)


def model_config_for(train_cfg: TrainConfig, d_node, d_edge, mode=hopi.CROSS) -> ModelConfig:
    return ModelConfig(d_node=d_node, d_edge=d_edge, gnn_layers=train_cfg.gnn_layers,
                       gnn_variant=train_cfg.gnn_variant, combine=train_cfg.combine, mode=mode,
                       blocks=train_cfg.blocks, channels=train_cfg.channels)


@dataclass
class TrainResult:
    model: PairDenseModel
    log: list = field(default_factory=list)
    best_epoch: int | None = None
    best_val_medauc: float | None = None


def _batch_loss(model, c, coords, labels, cfg: TrainConfig, rng):
    rows, cols = (c.n_l + c.n_r,) * 2 if model.config.mode == hopi.JOINT else (c.n_l, c.n_r)
    side = 2 * model.receptive_radius + 1
    if max(rows, cols) <= cfg.patch_threshold or min(rows, cols) < side:
        logits = model.forward(c, dropout=cfg.dropout, rng=rng)
        return masked_loss(logits, coords, labels)
    picked = model.forward_patches(c, coords, dropout=cfg.dropout, rng=rng)
    return ops.bce_with_logits(picked, labels)


def train(train_set, model: PairDenseModel, cfg: TrainConfig, sampling: SamplingConfig,
          val_set=(), metrics_path=None, checkpoint_path=None, max_iterations=None,
          progress=None) -> TrainResult:
    """Sub-epoch training: each complex contributes minibatches of its sampled pairs.

    The best parameters by validation MedAUC (or the last ones when there is no
    validation set) are restored into ``model`` at the end.
    """
    train_set = list(train_set)
    if not train_set:
        raise ValueError("train: empty training set")
    result = TrainResult(model)
    if cfg.epochs == 0:
        return result
    rng = np.random.default_rng(cfg.seed)
    state = AdamState(lr=cfg.lr)
    params: ParameterStore = model.params
    best_state = params.state_dict()
    t0 = time.perf_counter()
    iteration = 0
    out = open(metrics_path, "w", encoding="utf-8") if metrics_path else None
    try:
        for epoch in range(cfg.epochs):
            losses = []
            for ci in rng.permutation(len(train_set)):
                c = train_set[ci]
                samples = sample_pairs(c, sampling, epoch=epoch, mode=model.config.mode)
                if samples is None:
                    continue
                coords, labels = samples.coords, samples.labels
                perm = rng.permutation(len(coords))
                for start in range(0, len(perm), cfg.batch_size):
                    idx = perm[start:start + cfg.batch_size]
                    params.zero_grad()
                    loss = _batch_loss(model, c, coords[idx], labels[idx], cfg, rng)
                    value = float(loss.data)
                    if not math.isfinite(value):
                        raise TrainingDiverged(f"non-finite loss at epoch {epoch}, complex "
                                               f"{c.complex_id}, iteration {iteration}")
                    loss.backward()
                    grads = params.grads()
                    if cfg.weight_decay:
                        value += 0.5 * cfg.weight_decay * params.sq_norm()
                        for name, g in grads.items():
                            g += cfg.weight_decay * params[name].data
                    adam_step(params, grads, state)
                    losses.append(value)
                    iteration += 1
                    if max_iterations is not None and iteration >= max_iterations:
                        break
                if max_iterations is not None and iteration >= max_iterations:
                    break
            val = evaluate(model, val_set)["medauc"] if val_set else None
            row = {"epoch": epoch, "train_loss": float(np.mean(losses)) if losses else None,
                   "val_medauc": val, "wallclock": round(time.perf_counter() - t0, 3)}
            result.log.append(row)
            if out:
                out.write(json.dumps(row) + "\n")
                out.flush()
            if progress:
                progress(row)
            log.info("epoch %d loss %.4f val %s", epoch, row["train_loss"] or float("nan"), val)
            if val is None or result.best_val_medauc is None or val > result.best_val_medauc:
                result.best_val_medauc = val
                result.best_epoch = epoch
                best_state = params.state_dict()
            if max_iterations is not None and iteration >= max_iterations:
                break
    finally:
        if out:
            out.close()
    params.load_state_dict(best_state)
    if checkpoint_path:
        save_model(model, checkpoint_path, extra={"train": asdict(cfg), "sampling": asdict(sampling),
                                                  "best_epoch": result.best_epoch})
    return result


def save_model(model: PairDenseModel, path, extra=None):
    save_checkpoint(path, model.params.state_dict(),
                    meta={"model": model.config.to_json(), **(extra or {})})


def load_model(path) -> PairDenseModel:
    from .numerics import load_checkpoint

    arrays, meta = load_checkpoint(path)
    cfg = ModelConfig(**meta["model"])
    store = ParameterStore({k: v for k, v in arrays.items()})
    return PairDenseModel(cfg, params=store)
