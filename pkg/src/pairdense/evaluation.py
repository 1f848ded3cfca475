"""Per-complex ROC AUC and the dataset-level median AUC."""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import asdict, dataclass

import numpy as np


class UndefinedAUC(ValueError):
    """Labels contain a single class."""


def midranks(values) -> np.ndarray:
    """1-based ranks with ties sharing the mean of their positions."""
    values = np.asarray(values)
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    n = len(values)
    starts = np.flatnonzero(np.r_[True, sorted_vals[1:] != sorted_vals[:-1]])
    ends = np.r_[starts[1:], n]
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = np.repeat((starts + ends + 1) / 2.0, ends - starts)
    return ranks


def roc_auc(scores, labels) -> float:
    """Mann-Whitney estimate of P(score_pos > score_neg), ties counted 1/2."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ValueError(f"roc_auc: {scores.shape[0]} scores vs {labels.shape[0]} labels")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUC("roc_auc: labels contain a single class")
    rank_sum = midranks(scores)[pos].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_points(scores, labels):
    """(fpr, tpr) arrays, one point per distinct threshold, descending."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(bool)
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], labels[order]
    cut = np.r_[np.flatnonzero(s[1:] != s[:-1]), len(s) - 1]
    tp = np.cumsum(y)[cut]
    fp = np.cumsum(~y)[cut]
    return np.r_[0.0, fp / max(fp[-1], 1)], np.r_[0.0, tp / max(tp[-1], 1)]


@dataclass
class ComplexScore:
    complex_id: str
    auc: float
    n_positive: int
    n_pairs: int


def med_auc(scores) -> float:
    """Median AUC; an even count averages the two middle values."""
    aucs = sorted(s.auc if isinstance(s, ComplexScore) else float(s) for s in scores)
    if not aucs:
        raise ValueError("med_auc: no scored complexes")
    mid = len(aucs) // 2
    if len(aucs) % 2:
        return aucs[mid]
    return (aucs[mid - 1] + aucs[mid]) / 2.0


def score_complex(model, c) -> ComplexScore | None:
    """AUC over every cross pair of ``c``; ``None`` (with a warning) when undefined."""
    logits = model.predict(c).logits
    labels = c.cross_label_map()
    try:
        auc = roc_auc(logits, labels)
    except UndefinedAUC:
        warnings.warn(f"{c.complex_id}: single-class labels, excluded from MedAUC", stacklevel=2)
        return None
    return ComplexScore(c.complex_id, auc, int(labels.sum()), int(labels.size))


def evaluate(model, complexes, config_digest: str = "", roc_dump: bool = False) -> dict:
    """Score each complex and aggregate; deterministic for a fixed model."""
    per = []
    rocs = {}
    for c in complexes:
        s = score_complex(model, c)
        if s is None:
            continue
        per.append(s)
        if roc_dump:
            fpr, tpr = roc_points(model.predict(c).logits, c.cross_label_map())
            rocs[c.complex_id] = {"fpr": fpr.tolist(), "tpr": tpr.tolist()}
    report = {
        "per_complex": [asdict(s) for s in per],
        "medauc": med_auc(per) if per else None,
        "config_digest": config_digest,
    }
    if roc_dump:
        report["roc"] = rocs
    return report


def config_digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()[:16]
