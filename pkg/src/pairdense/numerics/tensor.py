"""A small reverse-mode differentiation engine over numpy arrays.

Every primitive builds a new :class:`Tensor` whose ``_backward`` closure pushes
the output gradient to its parents. :meth:`Tensor.backward` walks the graph in
reverse topological order. Leaf gradients accumulate additively into
``Tensor.grad``; callers zero them between steps.
"""

from __future__ import annotations

import numpy as np

from .. import kernels

DEFAULT_DTYPE = np.float64


class ShapeError(ValueError):
    """Operand shapes do not conform for a primitive."""


def _shape_error(op, a, b):
    return ShapeError(f"{op}: incompatible shapes {tuple(a)} and {tuple(b)}")


def _as_array(data, dtype=None):
    arr = np.asarray(data)
    if dtype is not None:
        return arr.astype(dtype, copy=False)
    if arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(DEFAULT_DTYPE)
    return arr


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, name=None, dtype=None):
        self.data = _as_array(data, dtype)
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(self.data) if requires_grad else None
        self._parents = ()
        self._backward = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def zero_grad(self):
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def detach(self):
        return Tensor(self.data)

    def backward(self, grad=None):
        """Propagate ``grad`` (default: ones, so scalar outputs seed 1.0)."""
        if grad is None:
            grad = np.ones_like(self.data)
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))

        grads = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    node.grad += g
                continue
            if node.requires_grad:
                node.grad += g
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not _tracks(parent):
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + pg
                else:
                    grads[id(parent)] = pg

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    @property
    def T(self):
        return transpose(self)


def _tracks(t):
    return t.requires_grad or t._backward is not None


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward):
    out = Tensor(data)
    if any(_tracks(p) for p in parents):
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` after numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _broadcast_shape(op, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise _shape_error(op, a.shape, b.shape) from None


# elementwise arithmetic

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(a.data + b.data, (a, b), backward)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _make(a.data - b.data, (a, b), backward)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _make(a.data * b.data, (a, b), backward)


def scale(a, c):
    """Multiply by a python/numpy scalar constant."""
    a = as_tensor(a)
    c = float(c)
    return _make(a.data * c, (a,), lambda g: (g * c,))


def tanh(a):
    a = as_tensor(a)
    y = np.tanh(a.data)
    return _make(y, (a,), lambda g: (g * (1.0 - y * y),))


def relu(a):
    a = as_tensor(a)
    mask = a.data > 0
    return _make(np.where(mask, a.data, 0.0).astype(a.data.dtype), (a,), lambda g: (g * mask,))


def sigmoid(a):
    a = as_tensor(a)
    y = _stable_sigmoid(a.data)
    return _make(y, (a,), lambda g: (g * y * (1.0 - y),))


def _stable_sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(a, axis=-1):
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _make(y, (a,), backward)


# reductions and shape plumbing

def sum(a, axis=None, keepdims=False):  # noqa: A001 - mirrors numpy naming
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _make(out, (a,), backward)


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    n = a.size if axis is None else int(np.prod([a.shape[ax] for ax in np.atleast_1d(axis)]))
    return scale(sum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def reshape(a, shape):
    a = as_tensor(a)
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def transpose(a, axes=None):
    a = as_tensor(a)
    inv = None if axes is None else np.argsort(axes)
    return _make(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inv),))


def broadcast_to(a, shape):
    a = as_tensor(a)
    try:
        out = np.broadcast_to(a.data, shape)
    except ValueError:
        raise _shape_error("broadcast_to", a.shape, shape) from None
    return _make(out.copy(), (a,), lambda g: (_unbroadcast(g, a.shape),))


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    ref = tensors[0].shape
    ax = axis % len(ref)
    for t in tensors[1:]:
        if len(t.shape) != len(ref) or any(
            x != y for i, (x, y) in enumerate(zip(ref, t.shape)) if i != ax
        ):
            raise _shape_error("concat", ref, t.shape)
    out = np.concatenate([t.data for t in tensors], axis=ax)
    bounds = np.cumsum([0] + [t.shape[ax] for t in tensors])

    def backward(g):
        return tuple(
            np.take(g, np.arange(lo, hi), axis=ax) for lo, hi in zip(bounds[:-1], bounds[1:])
        )

    return _make(out, tensors, backward)


def getitem(a, index):
    a = as_tensor(a)
    out = a.data[index]

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)
        return (full,)

    return _make(np.array(out, copy=True), (a,), backward)


def take_rows(a, index):
    """Gather rows ``a[index]`` for an integer array of any shape.

    The backward pass scatters gradient rows with the compiled kernel.
    """
    a = as_tensor(a)
    index = np.asarray(index, dtype=np.int64)
    if index.size and (index.min() < 0 or index.max() >= a.shape[0]):
        raise IndexError(f"take_rows: index out of range for {a.shape[0]} rows")
    out = a.data[index]
    feat = a.shape[1:]
    width = int(np.prod(feat)) if feat else 1

    def backward(g):
        flat = g.reshape(-1, width)
        summed = kernels.scatter_add_rows(flat, index.reshape(-1), a.shape[0])
        return (summed.reshape(a.shape),)

    return _make(out, (a,), backward)


# linear algebra

def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 1 or b.ndim < 1:
        raise _shape_error("matmul", a.shape, b.shape)
    ka = a.shape[-1]
    kb = b.shape[-2] if b.ndim >= 2 else b.shape[0]
    if ka != kb:
        raise _shape_error("matmul", a.shape, b.shape)
    try:
        out = np.matmul(a.data, b.data)
    except ValueError:
        raise _shape_error("matmul", a.shape, b.shape) from None

    def backward(g):
        A, B, G = a.data, b.data, g
        a_vec, b_vec = A.ndim == 1, B.ndim == 1
        if a_vec:
            A = A[None, :]
            G = np.expand_dims(G, -2)
        if b_vec:
            B = B[:, None]
            G = np.expand_dims(G, -1)
        ga = G @ np.swapaxes(B, -1, -2)
        gb = np.swapaxes(A, -1, -2) @ G
        if a_vec:
            ga = ga[..., 0, :]
        if b_vec:
            gb = gb[..., :, 0]
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _make(out, (a, b), backward)


def conv2d(x, weight, bias=None):
    """Stride-1 cross-correlation with zero 'same' padding.

    x: (H, W, C_in) or (B, H, W, C_in); weight: (kh, kw, C_in, C_out), odd kh/kw;
    bias: (C_out,) or None. Output keeps the spatial extent of ``x``.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if weight.ndim != 4 or x.ndim not in (3, 4) or x.shape[-1] != weight.shape[2]:
        raise _shape_error("conv2d", x.shape, weight.shape)
    kh, kw, cin, cout = weight.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise _shape_error("conv2d", x.shape, weight.shape)
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (cout,):
            raise _shape_error("conv2d", weight.shape, bias.shape)
    squeeze = x.ndim == 3
    xd = x.data[None] if squeeze else x.data
    B, H, W, _ = xd.shape
    if kh == 1 and kw == 1:
        cols = xd.reshape(B * H * W, cin)
    else:
        cols = kernels.im2col(xd, kh, kw)
    wmat = weight.data.reshape(kh * kw * cin, cout)
    out = cols @ wmat
    if bias is not None:
        out += bias.data
    out = out.reshape(B, H, W, cout)
    if squeeze:
        out = out[0]

    def backward(g):
        g2 = g.reshape(B * H * W, cout)
        gw = (cols.T @ g2).reshape(weight.shape) if _tracks(weight) else None
        gx = None
        if _tracks(x):
            gcols = g2 @ wmat.T
            if kh == 1 and kw == 1:
                gx = gcols.reshape(B, H, W, cin)
            else:
                gx = kernels.col2im(gcols, (B, H, W, cin), kh, kw)
            if squeeze:
                gx = gx[0]
        grads = [gx, gw]
        if bias is not None:
            grads.append(g2.sum(axis=0))
        return tuple(grads)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _make(out, parents, backward)


# losses and regularisers

def bce_with_logits(logits, labels):
    """Mean binary cross-entropy of ``logits`` against 0/1 ``labels`` (constant)."""
    logits = as_tensor(logits)
    y = np.asarray(labels, dtype=logits.data.dtype)
    if y.shape != logits.shape:
        raise _shape_error("bce_with_logits", logits.shape, y.shape)
    z = logits.data
    # max(z,0) - z*y + log(1 + exp(-|z|)) avoids overflow at both tails
    loss = np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))
    n = z.size
    value = np.array(loss.mean())

    def backward(g):
        return (g * (_stable_sigmoid(z) - y) / n,)

    return _make(value, (logits,), backward)


def dropout(a, rate, rng):
    """Inverted dropout; identity when ``rate`` is 0."""
    a = as_tensor(a)
    if rate <= 0:
        return a
    keep = (rng.random(a.shape) >= rate) / (1.0 - rate)
    keep = keep.astype(a.data.dtype)
    return _make(a.data * keep, (a,), lambda g: (g * keep,))
