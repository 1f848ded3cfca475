"""Residual convolutional head mapping the pair tensor to one logit per pair."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import ParameterStore, ShapeError, Tensor, ops

KERNEL = 3


@dataclass
class ConvParams:
    weight: Tensor  # (kh, kw, c_in, c_out)
    bias: Tensor  # (c_out,)


@dataclass
class ResidualBlockParams:
    conv1: ConvParams
    conv2: ConvParams

    def __post_init__(self):
        c_in = self.conv1.weight.shape[2]
        if self.conv2.weight.shape[3] != c_in or self.conv2.weight.shape[2] != self.conv1.weight.shape[3]:
            raise ShapeError(f"residual block: conv shapes {self.conv1.weight.shape} and "
                             f"{self.conv2.weight.shape} do not chain back to {c_in} channels")


@dataclass
class HeadParams:
    in_proj: ConvParams
    blocks: list
    out_proj: ConvParams

    @property
    def receptive_radius(self) -> int:
        return sum((b.conv1.weight.shape[0] // 2) + (b.conv2.weight.shape[0] // 2) for b in self.blocks)


@dataclass
class PredictionMap:
    logits: np.ndarray
    threshold: float = 0.5

    @property
    def probabilities(self):
        return 1.0 / (1.0 + np.exp(-self.logits))

    def binarize(self):
        return (self.probabilities >= self.threshold).astype(np.int8)


def _conv_init(rng, kh, kw, c_in, c_out):
    bound = math.sqrt(6.0 / (kh * kw * (c_in + c_out)))
    return rng.uniform(-bound, bound, size=(kh, kw, c_in, c_out)), np.zeros(c_out)


def _add_conv(store, rng, name, kh, c_in, c_out, zero=False):
    w, b = _conv_init(rng, kh, kh, c_in, c_out)
    if zero:
        w = np.zeros_like(w)
    return ConvParams(store.add(f"{name}/w", w), store.add(f"{name}/b", b))


def init_head(store: ParameterStore, rng, c_in, channels, n_blocks, kernel=KERNEL,
              prefix="head", zero=False) -> HeadParams:
    in_proj = _add_conv(store, rng, f"{prefix}/in_proj", 1, c_in, channels, zero)
    blocks = [
        ResidualBlockParams(
            _add_conv(store, rng, f"{prefix}/block{i}/conv1", kernel, channels, channels, zero),
            _add_conv(store, rng, f"{prefix}/block{i}/conv2", kernel, channels, channels, zero),
        )
        for i in range(n_blocks)
    ]
    out_proj = _add_conv(store, rng, f"{prefix}/out_proj", 1, channels, 1, zero)
    return HeadParams(in_proj, blocks, out_proj)


def head_from_store(store: ParameterStore, n_blocks, prefix="head") -> HeadParams:
    def conv(name):
        return ConvParams(store[f"{prefix}/{name}/w"], store[f"{prefix}/{name}/b"])

    return HeadParams(conv("in_proj"),
                      [ResidualBlockParams(conv(f"block{i}/conv1"), conv(f"block{i}/conv2"))
                       for i in range(n_blocks)],
                      conv("out_proj"))


def conv(x, p: ConvParams):
    return ops.conv2d(x, p.weight, p.bias)


def residual_block_forward(x, params: ResidualBlockParams) -> Tensor:
    """ReLU(x + conv2(ReLU(conv1(x)))); spatial shape preserved."""
    x = ops.as_tensor(x)
    if x.shape[-1] != params.conv1.weight.shape[2]:
        raise ShapeError(f"residual block: input channels {x.shape[-1]} vs conv1 "
                         f"{params.conv1.weight.shape}")
    inner = ops.relu(conv(x, params.conv1))
    return ops.relu(x + conv(inner, params.conv2))


def head_forward(q, head: HeadParams) -> Tensor:
    """Logits of shape q.shape[:-1] (an optional leading batch axis is kept)."""
    x = conv(q, head.in_proj)
    for block in head.blocks:
        x = residual_block_forward(x, block)
    out = conv(x, head.out_proj)
    return ops.reshape(out, out.shape[:-1])
