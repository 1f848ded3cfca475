"""Protein graphs, complexes, dataset files and the synthetic complex generator.

In memory every index is 0-based. The JSON dataset format is 1-based: node
ids, neighbour ids, ``order`` entries and positive pairs all start at 1.

``order[s]`` is the chain position of stored node ``s``. Positive pairs refer
to stored node ids, the same ids used by ``neighbors``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DatasetError(ValueError):
    """A dataset file or in-memory complex violates the schema."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(eq=False)
class ProteinGraph:
    node_features: np.ndarray  # (m, d)
    neighbors: np.ndarray  # (m, k) int, stored node ids
    edge_features: np.ndarray  # (m, k, d_e), row-aligned with neighbors
    order: np.ndarray  # (m,) chain position of each stored node

    @property
    def m(self) -> int:
        return self.node_features.shape[0]

    @property
    def d(self) -> int:
        return self.node_features.shape[1]

    @property
    def k(self) -> int:
        return self.neighbors.shape[1]

    @property
    def d_e(self) -> int:
        return self.edge_features.shape[2]

    def problems(self, where="graph") -> list[str]:
        out = []
        m = self.node_features.shape[0]
        if self.node_features.ndim != 2:
            return [f"{where}.node_features: expected a 2-D matrix"]
        if self.neighbors.ndim != 2 or self.neighbors.shape[0] != m:
            out.append(f"{where}.neighbors: expected {m} rows")
        elif self.neighbors.shape[1] < 1:
            out.append(f"{where}.neighbors: every node needs at least one neighbour")
        else:
            for node, row in enumerate(self.neighbors):
                bad = [int(v) for v in row if v < 0 or v >= m or v == node]
                if bad:
                    out.append(f"{where}.neighbors: node {node + 1} has invalid neighbour ids "
                               f"{[b + 1 for b in bad]} (must be in 1..{m} and not itself)")
        if self.edge_features.ndim != 3 or self.edge_features.shape[:2] != self.neighbors.shape:
            out.append(f"{where}.edge_features: shape {self.edge_features.shape} does not align "
                       f"with neighbors {self.neighbors.shape}")
        if self.order.shape != (m,) or sorted(self.order.tolist()) != list(range(m)):
            out.append(f"{where}.order: not a permutation of 1..{m}")
        if not np.isfinite(self.node_features).all():
            out.append(f"{where}.node_features: non-finite values")
        return out

    def validate(self, where="graph"):
        probs = self.problems(where)
        if probs:
            raise DatasetError(probs)
        return self

    def to_json(self) -> dict:
        return {
            "m": self.m, "d": self.d, "k": self.k, "d_e": self.d_e,
            "order": (self.order + 1).tolist(),
            "node_features": self.node_features.tolist(),
            "neighbors": (self.neighbors + 1).tolist(),
            "edge_features": self.edge_features.tolist(),
        }

    def __eq__(self, other):
        if not isinstance(other, ProteinGraph):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("node_features", "neighbors", "edge_features", "order")
        )


def _pairs(arr) -> np.ndarray:
    a = np.asarray(arr, dtype=np.int64)
    return a.reshape(-1, 2)


@dataclass(eq=False)
class ComplexSample:
    complex_id: str
    ligand: ProteinGraph
    receptor: ProteinGraph
    cross_positives: np.ndarray  # (P, 2): (ligand node, receptor node)
    inprotein_positives_ligand: np.ndarray = field(default_factory=lambda: _pairs([]))
    inprotein_positives_receptor: np.ndarray = field(default_factory=lambda: _pairs([]))

    @property
    def n_l(self) -> int:
        return self.ligand.m

    @property
    def n_r(self) -> int:
        return self.receptor.m

    def problems(self) -> list[str]:
        out = self.ligand.problems("ligand") + self.receptor.problems("receptor")
        if self.ligand.d != self.receptor.d:
            out.append(f"node feature width differs: ligand {self.ligand.d}, receptor {self.receptor.d}")
        if self.ligand.d_e != self.receptor.d_e:
            out.append(f"edge feature width differs: ligand {self.ligand.d_e}, receptor {self.receptor.d_e}")
        checks = [
            ("cross_positives", self.cross_positives, self.n_l, self.n_r),
            ("inprotein_positives_ligand", self.inprotein_positives_ligand, self.n_l, self.n_l),
            ("inprotein_positives_receptor", self.inprotein_positives_receptor, self.n_r, self.n_r),
        ]
        for name, pairs, rows, cols in checks:
            for i, j in pairs.tolist():
                if not (0 <= i < rows and 0 <= j < cols):
                    out.append(f"{name}: pair ({i + 1}, {j + 1}) out of range")
            keys = [tuple(p) for p in pairs.tolist()]
            if name != "cross_positives":
                keys = [tuple(sorted(p)) for p in keys]
                if any(i == j for i, j in keys):
                    out.append(f"{name}: self pair")
            if len(set(keys)) != len(keys):
                out.append(f"{name}: duplicate pairs")
        return out

    def validate(self):
        probs = self.problems()
        if probs:
            raise DatasetError([f"{self.complex_id}: {p}" for p in probs])
        return self

    def cross_label_map(self) -> np.ndarray:
        """(n_l, n_r) 0/1 labels in chain order (rows: ligand, cols: receptor)."""
        y = np.zeros((self.n_l, self.n_r), dtype=np.int8)
        if len(self.cross_positives):
            rows = self.ligand.order[self.cross_positives[:, 0]]
            cols = self.receptor.order[self.cross_positives[:, 1]]
            y[rows, cols] = 1
        return y

    def to_json(self) -> dict:
        return {
            "complex_id": self.complex_id,
            "ligand": self.ligand.to_json(),
            "receptor": self.receptor.to_json(),
            "cross_positives": (self.cross_positives + 1).tolist(),
            "inprotein_positives_ligand": (self.inprotein_positives_ligand + 1).tolist(),
            "inprotein_positives_receptor": (self.inprotein_positives_receptor + 1).tolist(),
        }

    def __eq__(self, other):
        if not isinstance(other, ComplexSample):
            return NotImplemented
        return (
            self.complex_id == other.complex_id
            and self.ligand == other.ligand
            and self.receptor == other.receptor
            and all(
                np.array_equal(getattr(self, f), getattr(other, f))
                for f in ("cross_positives", "inprotein_positives_ligand",
                          "inprotein_positives_receptor")
            )
        )


# serialization

def dumps_complex(c: ComplexSample) -> str:
    return json.dumps(c.to_json(), separators=(",", ":"))


def save_complex(c: ComplexSample, path):
    Path(path).write_text(dumps_complex(c), encoding="utf-8")


def _graph_from_json(obj, where) -> ProteinGraph:
    problems = []
    required = ("m", "d", "k", "d_e", "order", "node_features", "neighbors", "edge_features")
    missing = [f for f in required if f not in obj]
    if missing:
        raise DatasetError(f"{where}: missing fields {missing}")
    m, d, k, d_e = (int(obj[f]) for f in ("m", "d", "k", "d_e"))
    try:
        x = np.asarray(obj["node_features"], dtype=np.float64)
        nb = np.asarray(obj["neighbors"], dtype=np.int64)
        ef = np.asarray(obj["edge_features"], dtype=np.float64)
        order = np.asarray(obj["order"], dtype=np.int64)
    except (ValueError, TypeError) as exc:
        raise DatasetError(f"{where}: ragged or non-numeric array ({exc})") from None
    if x.shape != (m, d):
        problems.append(f"{where}.node_features: shape {x.shape}, declared ({m}, {d})")
    if nb.shape != (m, k):
        problems.append(f"{where}.neighbors: shape {nb.shape}, declared ({m}, {k})")
    if ef.shape != (m, k, d_e):
        problems.append(f"{where}.edge_features: shape {ef.shape}, declared ({m}, {k}, {d_e})")
    if order.shape != (m,):
        problems.append(f"{where}.order: length {order.shape}, declared {m}")
    if problems:
        raise DatasetError(problems)
    g = ProteinGraph(x, nb - 1, ef, order - 1)
    g.validate(where)
    return g


def complex_from_json(obj, source="<memory>") -> ComplexSample:
    if not isinstance(obj, dict):
        raise DatasetError(f"{source}: top level must be an object")
    for f in ("complex_id", "ligand", "receptor", "cross_positives"):
        if f not in obj:
            raise DatasetError(f"{source}: missing field {f!r}")
    lig = _graph_from_json(obj["ligand"], f"{source}: ligand")
    rec = _graph_from_json(obj["receptor"], f"{source}: receptor")
    c = ComplexSample(
        complex_id=str(obj["complex_id"]),
        ligand=lig,
        receptor=rec,
        cross_positives=_pairs(obj["cross_positives"]) - 1,
        inprotein_positives_ligand=_pairs(obj.get("inprotein_positives_ligand") or []) - 1,
        inprotein_positives_receptor=_pairs(obj.get("inprotein_positives_receptor") or []) - 1,
    )
    probs = c.problems()
    if probs:
        raise DatasetError([f"{source}: {p}" for p in probs])
    return c


def load_complex(path) -> ComplexSample:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}") from None
    return complex_from_json(obj, str(path))


def load_dataset(directory) -> dict[str, ComplexSample]:
    out = {}
    for p in sorted(Path(directory).glob("*.json")):
        if p.name == "split.json":
            continue
        c = load_complex(p)
        if c.complex_id in out:
            raise DatasetError(f"{p}: duplicate complex_id {c.complex_id}")
        out[c.complex_id] = c
    return out


# synthetic generator

SLAB_SIDE = 4.0
SLAB_DEPTH = 1.5
_GEOM_WIDTH = 6
_PROJECTION_SEED = 20240611


def _chain_points(rng, m, z_lo, z_hi):
    """Uniform points in the slab, ordered into a chain by a greedy nearest-neighbour tour."""
    lo = np.array([0.0, 0.0, z_lo])
    hi = np.array([SLAB_SIDE, SLAB_SIDE, z_hi])
    pts = rng.uniform(lo, hi, size=(m, 3))
    dist = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    tour = [int(np.argmin(pts[:, 0] + pts[:, 1]))]
    free = np.ones(m, dtype=bool)
    free[tour[0]] = False
    for _ in range(m - 1):
        d = np.where(free, dist[tour[-1]], np.inf)
        nxt = int(np.argmin(d))
        tour.append(nxt)
        free[nxt] = False
    return pts[tour]


def _knn(points, k):
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt((diff**2).sum(-1))
    np.fill_diagonal(dist, np.inf)
    idx = np.argsort(dist, axis=1, kind="stable")[:, :k]
    return idx, np.take_along_axis(dist, idx, axis=1)


def _projection(d):
    return np.random.default_rng(_PROJECTION_SEED + d).normal(size=(_GEOM_WIDTH, d)) / math.sqrt(_GEOM_WIDTH)


def _protein(rng, m, d, k, z_lo, z_hi, radius, noise):
    chain_pts = _chain_points(rng, m, z_lo, z_hi)
    normals = rng.normal(size=(m, 3))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    # storage order is a shuffle of chain order; order[s] = chain position of node s
    order = rng.permutation(m)
    pts = chain_pts[order]
    normals = normals[order]

    nb, nb_dist = _knn(pts, k)
    diag = math.sqrt(2 * SLAB_SIDE**2 + (z_hi - z_lo) ** 2)
    cosang = np.clip(np.einsum("ij,ikj->ik", normals, normals[nb]), -1.0, 1.0)
    edges = np.stack([np.clip(nb_dist / diag, 0.0, 1.0), np.arccos(cosang)], axis=-1)

    interface = np.abs(pts[:, 2])
    geom = np.column_stack([
        pts[:, 0] / SLAB_SIDE - 0.5,
        pts[:, 1] / SLAB_SIDE - 0.5,
        np.abs(z_lo + z_hi) / 2 - interface,  # depth from the far face, larger near the interface
        np.exp(-interface),
        nb_dist.mean(axis=1),
        order / max(m - 1, 1),
    ])
    feats = geom @ _projection(d) + noise * rng.normal(size=(m, d))

    full = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    is_nb = np.zeros((m, m), dtype=bool)
    is_nb[np.repeat(np.arange(m), k), nb.ravel()] = True
    is_nb |= is_nb.T
    ii, jj = np.nonzero(np.triu(full < radius, 1) & ~is_nb)
    inprot = np.column_stack([ii, jj]).astype(np.int64)
    return ProteinGraph(feats, nb.astype(np.int64), edges, order.astype(np.int64)), pts, inprot


def synth_complex(seed: int, n_l: int = 40, n_r: int = 50, d: int = 8, k: int = 6,
                  contact_radius: float = 1.2, noise: float = 0.05,
                  complex_id: str | None = None) -> ComplexSample:
    """Deterministic synthetic complex of two residue chains in adjacent slabs.

    Ligand residues live in ``z in [-SLAB_DEPTH, 0]`` and receptor residues in
    ``z in [0, SLAB_DEPTH]``; each chain is a unit-step random walk. Cross
    pairs closer than ``contact_radius`` are positives.
    """
    if contact_radius <= 0:
        raise ValueError("synth_complex: contact_radius must be > 0; no positives possible "
                         "(increase contact_radius)")
    if not 1 <= k < min(n_l, n_r):
        raise ValueError(f"synth_complex: need 1 <= k < min(n_l, n_r), got k={k}")
    rng = np.random.default_rng(seed)
    lig, lig_pts, lig_in = _protein(rng, n_l, d, k, -SLAB_DEPTH, 0.0, contact_radius, noise)
    rec, rec_pts, rec_in = _protein(rng, n_r, d, k, 0.0, SLAB_DEPTH, contact_radius, noise)
    cross = np.sqrt(((lig_pts[:, None] - rec_pts[None]) ** 2).sum(-1))
    ii, jj = np.nonzero(cross < contact_radius)
    if len(ii) == 0:
        raise ValueError(f"synth_complex(seed={seed}): zero cross positives; "
                         f"increase contact_radius (got {contact_radius})")
    return ComplexSample(
        complex_id=complex_id or f"synth_{seed}",
        ligand=lig,
        receptor=rec,
        cross_positives=np.column_stack([ii, jj]).astype(np.int64),
        inprotein_positives_ligand=lig_in,
        inprotein_positives_receptor=rec_in,
    )


# splitting

@dataclass
class DatasetSplit:
    train: list
    validation: list
    test: list
    ratios: tuple = (0.6, 0.2, 0.2)
    seed: int = 0

    def to_json(self) -> dict:
        return {"train": self.train, "validation": self.validation, "test": self.test,
                "ratios": list(self.ratios), "seed": self.seed}

    @classmethod
    def from_json(cls, obj) -> "DatasetSplit":
        return cls(list(obj["train"]), list(obj["validation"]), list(obj["test"]),
                   tuple(obj.get("ratios", (0.6, 0.2, 0.2))), int(obj.get("seed", 0)))


def split_dataset(ids, ratios=(0.6, 0.2, 0.2), seed: int = 0) -> DatasetSplit:
    """Shuffle ``ids`` by ``seed``; validation/test sizes are floored, the remainder goes to train."""
    ids = list(ids)
    if not ids:
        raise ValueError("split_dataset: empty id list")
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split_dataset: ratios must be three positive numbers summing to 1, got {ratios}")
    n = len(ids)
    perm = np.random.default_rng(seed).permutation(n)
    shuffled = [ids[i] for i in perm]
    n_val = math.floor(n * ratios[1] + 1e-9)
    n_test = math.floor(n * ratios[2] + 1e-9)
    n_train = n - n_val - n_test
    split = DatasetSplit(shuffled[:n_train], shuffled[n_train:n_train + n_val],
                         shuffled[n_train + n_val:], tuple(ratios), seed)
    if not split.validation or not split.test:
        warnings.warn(f"split_dataset: {n} ids leave an empty validation or test split",
                      stacklevel=2)
    return split
