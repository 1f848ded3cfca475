"""End-to-end model: GNN -> chain reorder -> pair tensor -> residual head."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import dense_head, gnn, hopi
from .numerics import ParameterStore, ops
from .sequential import reorder


@dataclass
class ModelConfig:
    d_node: int
    d_edge: int
    gnn_layers: int = 1
    gnn_variant: str = gnn.NEIA
    combine: str = hopi.CONCAT
    mode: str = hopi.CROSS
    blocks: int = 3
    channels: int = 128
    kernel: int = dense_head.KERNEL
    neiwa_scale_by_n: bool = True
    element_budget: int = hopi.DEFAULT_ELEMENT_BUDGET

    def to_json(self):
        return asdict(self)


class PairDenseModel:
    def __init__(self, config: ModelConfig, params: ParameterStore | None = None, seed: int = 0,
                 zero_head: bool = False):
        self.config = config
        if params is None:
            params = ParameterStore()
            rng = np.random.default_rng(seed)
            gnn.init_layers(params, rng, config.gnn_layers, config.d_node, config.d_edge,
                            config.gnn_variant, scale_by_n=config.neiwa_scale_by_n)
            dense_head.init_head(params, rng, hopi.channels(config.d_node, config.combine),
                                 config.channels, config.blocks, config.kernel, zero=zero_head)
        self.params = params
        self.layers = gnn.layers_from_store(params, config.gnn_layers, config.gnn_variant,
                                            scale_by_n=config.neiwa_scale_by_n)
        self.head = dense_head.head_from_store(params, config.blocks)

    @property
    def receptive_radius(self):
        return self.head.receptive_radius

    def residue_features(self, c):
        """Per-protein features after the shared GNN stack, in chain order."""
        h_l = reorder(gnn.gnn_stack_forward(c.ligand, self.layers), c.ligand.order)
        h_r = reorder(gnn.gnn_stack_forward(c.receptor, self.layers), c.receptor.order)
        return h_l, h_r

    def pair_tensor(self, c) -> hopi.PairTensor:
        h_l, h_r = self.residue_features(c)
        build = hopi.build_joint_tensor if self.config.mode == hopi.JOINT else hopi.build_cross_tensor
        return build(h_l, h_r, self.config.combine, self.config.element_budget)

    def forward(self, c, dropout=0.0, rng=None):
        """Full-map logits Tensor of the pair tensor's spatial shape."""
        pt = self.pair_tensor(c)
        q = ops.dropout(pt.q, dropout, rng) if dropout > 0 else pt.q
        return dense_head.head_forward(q, self.head)

    def forward_patches(self, c, coords, dropout=0.0, rng=None):
        """Logits at ``coords`` (N, 2) computed on (2R+1)-sided windows of Q.

        Windows are shifted to stay inside the map, so every window edge is
        either a map edge or at least R away from its target pair; the result
        then equals the full-map logit.
        """
        pt = self.pair_tensor(c)
        q = ops.dropout(pt.q, dropout, rng) if dropout > 0 else pt.q
        rows, cols = q.shape[:2]
        side = 2 * self.receptive_radius + 1
        if rows < side or cols < side:
            raise ValueError(f"map {rows}x{cols} smaller than a {side}-sided patch")
        coords = np.asarray(coords, dtype=np.int64)
        r0 = np.clip(coords[:, 0] - self.receptive_radius, 0, rows - side)
        c0 = np.clip(coords[:, 1] - self.receptive_radius, 0, cols - side)
        off = np.arange(side)
        ri = (r0[:, None] + off)[:, :, None]
        ci = (c0[:, None] + off)[:, None, :]
        patches = ops.getitem(q, (ri, ci))  # (N, side, side, c)
        logits = dense_head.head_forward(patches, self.head)  # (N, side, side)
        n = np.arange(len(coords))
        return ops.getitem(logits, (n, coords[:, 0] - r0, coords[:, 1] - c0))

    def predict(self, c) -> dense_head.PredictionMap:
        """Cross-block logits (n_l, n_r) in chain order, no dropout."""
        logits = self.forward(c).data
        if self.config.mode == hopi.JOINT:
            logits = logits[: c.n_l, c.n_l: c.n_l + c.n_r]
        return dense_head.PredictionMap(np.array(logits))
