"""Edge-conditioned neighbourhood aggregation layers (NeiA and NeiWA).

Per-node functions take the column-major view (features x neighbours) used
in the method description; :func:`layer_forward` is the vectorised version
over all nodes and stores node features row-wise as (m, d).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import ParameterStore, ShapeError, Tensor, ops

NEIA = "neia"
NEIWA = "neiwa"
VARIANTS = (NEIA, NEIWA)


@dataclass
class GnnLayerParams:
    """Views onto one layer's tensors; ``q`` is ``None`` for NeiA."""

    w_node: Tensor  # (d_n, d_n)
    w_edge: Tensor  # (d_n, d_e)
    q: Tensor | None = None
    variant: str = NEIA
    scale_by_n: bool = True  # keep the 1/n factor on the NeiWA weighted sum

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown GNN variant {self.variant!r}")
        d_n = self.w_node.shape[0]
        if self.w_node.shape != (d_n, d_n):
            raise ShapeError(f"w_node must be square, got {self.w_node.shape}")
        if self.w_edge.ndim != 2 or self.w_edge.shape[0] != d_n:
            raise ShapeError(f"w_edge must have {d_n} rows, got {self.w_edge.shape}")
        if self.variant == NEIWA and (self.q is None or self.q.shape != (d_n,)):
            raise ShapeError(f"NeiWA needs q of length {d_n}")

    @property
    def d_node(self):
        return self.w_node.shape[0]

    @property
    def d_edge(self):
        return self.w_edge.shape[1]


def glorot(rng, fan_out, fan_in):
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_out, fan_in))


def init_layers(store: ParameterStore, rng, n_layers, d_node, d_edge, variant=NEIA,
                prefix="gnn", scale_by_n=True) -> list[GnnLayerParams]:
    layers = []
    for i in range(n_layers):
        w_n = store.add(f"{prefix}/{i}/w_node", glorot(rng, d_node, d_node))
        w_e = store.add(f"{prefix}/{i}/w_edge", glorot(rng, d_node, d_edge))
        q = store.add(f"{prefix}/{i}/q", np.zeros(d_node)) if variant == NEIWA else None
        layers.append(GnnLayerParams(w_n, w_e, q, variant, scale_by_n))
    return layers


def layers_from_store(store: ParameterStore, n_layers, variant, prefix="gnn", scale_by_n=True):
    return [
        GnnLayerParams(store[f"{prefix}/{i}/w_node"], store[f"{prefix}/{i}/w_edge"],
                       store[f"{prefix}/{i}/q"] if variant == NEIWA else None, variant, scale_by_n)
        for i in range(n_layers)
    ]


# per-node forms

def aggregate_neighborhood(h_nb, e_nb, params: GnnLayerParams) -> Tensor:
    """Z = tanh(W_N H + W_E E) for one node; H is (d_n, n), E is (d_e, n)."""
    h_nb, e_nb = ops.as_tensor(h_nb), ops.as_tensor(e_nb)
    if h_nb.ndim != 2 or h_nb.shape[0] != params.d_node:
        raise ShapeError(f"aggregate_neighborhood: node block {h_nb.shape} vs W_N {params.w_node.shape}")
    if e_nb.ndim != 2 or e_nb.shape[0] != params.d_edge or e_nb.shape[1] != h_nb.shape[1]:
        raise ShapeError(f"aggregate_neighborhood: edge block {e_nb.shape} vs W_E {params.w_edge.shape}")
    return ops.tanh(params.w_node @ h_nb + params.w_edge @ e_nb)


def _check_block(h, z):
    if z.shape[1] == 0:
        raise ValueError("empty neighbourhood (n = 0)")
    if h.shape != (z.shape[0],):
        raise ShapeError(f"center feature {h.shape} vs aggregated block {z.shape}")


def neia_forward(h, z) -> Tensor:
    """h + mean of the columns of Z."""
    h, z = ops.as_tensor(h), ops.as_tensor(z)
    _check_block(h, z)
    return h + ops.mean(z, axis=1)


def attention_weights(z, q) -> Tensor:
    return ops.softmax(ops.as_tensor(z).T @ ops.as_tensor(q), axis=0)


def neiwa_forward(h, z, q, scale_by_n=True) -> Tensor:
    """h + (1/n) Z a with a = softmax(Z^T q)."""
    h, z = ops.as_tensor(h), ops.as_tensor(z)
    _check_block(h, z)
    weighted = z @ attention_weights(z, q)
    n = z.shape[1]
    return h + (ops.scale(weighted, 1.0 / n) if scale_by_n else weighted)


# vectorised layer over a whole graph

def layer_forward(x, neighbors, edges, params: GnnLayerParams) -> Tensor:
    """One synchronous layer. x: (m, d_n); neighbors: (m, k); edges: (m, k, d_e)."""
    x = ops.as_tensor(x)
    if x.ndim != 2 or x.shape[1] != params.d_node:
        raise ShapeError(f"layer_forward: node features {x.shape} vs W_N {params.w_node.shape}")
    edges = ops.as_tensor(edges)
    if edges.shape[-1] != params.d_edge:
        raise ShapeError(f"layer_forward: edge features {edges.shape} vs W_E {params.w_edge.shape}")
    neighbors = np.asarray(neighbors)
    if neighbors.shape[1] == 0:
        raise ValueError("layer_forward: nodes without neighbours")
    gathered = ops.take_rows(x, neighbors)  # (m, k, d_n)
    z = ops.tanh(gathered @ params.w_node.T + edges @ params.w_edge.T)  # (m, k, d_n)
    n = neighbors.shape[1]
    if params.variant == NEIA:
        return x + ops.mean(z, axis=1)
    a = ops.softmax(z @ params.q, axis=1)  # (m, k)
    weighted = ops.sum(z * ops.reshape(a, a.shape + (1,)), axis=1)
    return x + (ops.scale(weighted, 1.0 / n) if params.scale_by_n else weighted)


def gnn_stack_forward(graph, layers) -> Tensor:
    """Apply ``layers`` in sequence to a ProteinGraph; returns (m, d_n) in storage order."""
    x = Tensor(graph.node_features)
    for params in layers:
        x = layer_forward(x, graph.neighbors, graph.edge_features, params)
    return x
