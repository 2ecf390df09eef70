"""Minimal reverse-mode autodiff on numpy arrays.

Everything is float64. A Tensor wraps an ndarray plus an optional backward
closure; `backward()` runs an iterative topological sweep so deep rollout
graphs do not hit the recursion limit. Gradients accumulate into `.grad`
as plain ndarrays.

Only the ops needed by the models and losses are implemented. Broadcasting
is supported on elementwise ops; matmul requires ndim >= 2 operands.
"""

from __future__ import annotations

import contextlib

import numpy as np
from scipy.special import expit

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block (detached compute)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    # keep numpy from absorbing Tensors into object arrays; binary ops with
    # ndarrays then dispatch to the reflected Tensor operators
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- graph traversal ---------------------------------------------------

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar root")
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, emitted = stack.pop()
            if emitted:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p._backward is not None and id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is None or node.grad is None:
                continue
            grads = node._backward(node.grad)
            for p, g in zip(node._parents, grads):
                if g is None or not p.requires_grad:
                    continue
                p.grad = g if p.grad is None else p.grad + g

    # -- operator sugar ----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p):
        return power(self, p)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, axes):
        return transpose(self, axes)


def ensure_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum g over the axes that were broadcast to reach g.shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- elementwise -------------------------------------------------------------


def add(a, b):
    a, b = ensure_tensor(a), ensure_tensor(b)
    data = a.data + b.data

    def bw(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _make(data, (a, b), bw)


def sub(a, b):
    a, b = ensure_tensor(a), ensure_tensor(b)
    data = a.data - b.data

    def bw(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return _make(data, (a, b), bw)


def mul(a, b):
    a, b = ensure_tensor(a), ensure_tensor(b)
    data = a.data * b.data

    def bw(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return _make(data, (a, b), bw)


def div(a, b):
    a, b = ensure_tensor(a), ensure_tensor(b)
    data = a.data / b.data

    def bw(g):
        return (
            _unbroadcast(g / b.data, a.data.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape),
        )

    return _make(data, (a, b), bw)


def power(a, p):
    a = ensure_tensor(a)
    if not isinstance(p, (int, float)):
        raise TypeError("power exponent must be a python scalar")
    data = a.data**p

    def bw(g):
        return (g * p * a.data ** (p - 1),)

    return _make(data, (a,), bw)


def exp(a):
    a = ensure_tensor(a)
    data = np.exp(a.data)

    def bw(g):
        return (g * data,)

    return _make(data, (a,), bw)


def log(a):
    a = ensure_tensor(a)
    data = np.log(a.data)

    def bw(g):
        return (g / a.data,)

    return _make(data, (a,), bw)


def sqrt(a):
    a = ensure_tensor(a)
    data = np.sqrt(a.data)

    def bw(g):
        return (g * 0.5 / data,)

    return _make(data, (a,), bw)


def tanh(a):
    a = ensure_tensor(a)
    data = np.tanh(a.data)

    def bw(g):
        return (g * (1.0 - data * data),)

    return _make(data, (a,), bw)


def silu(a):
    a = ensure_tensor(a)
    s = expit(a.data)
    data = a.data * s

    def bw(g):
        return (g * s * (1.0 + a.data * (1.0 - s)),)

    return _make(data, (a,), bw)


def softplus(a):
    """log(1 + exp(a)), evaluated in the overflow-safe form."""
    a = ensure_tensor(a)
    data = np.maximum(a.data, 0.0) + np.log1p(np.exp(-np.abs(a.data)))

    def bw(g):
        return (g * expit(a.data),)

    return _make(data, (a,), bw)


# -- reductions / shape ------------------------------------------------------


def tsum(a, axis=None, keepdims=False):
    a = ensure_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape).copy(),)

    return _make(data, (a,), bw)


def tmean(a, axis=None, keepdims=False):
    a = ensure_tensor(a)
    data = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.data.size / max(data.size, 1)

    def bw(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape).copy() / count,)

    return _make(data, (a,), bw)


def reshape(a, shape):
    a = ensure_tensor(a)
    data = a.data.reshape(shape)

    def bw(g):
        return (g.reshape(a.data.shape),)

    return _make(data, (a,), bw)


def transpose(a, axes):
    a = ensure_tensor(a)
    axes = tuple(axes)
    data = a.data.transpose(axes)
    inv = tuple(np.argsort(axes))

    def bw(g):
        return (g.transpose(inv),)

    return _make(data, (a,), bw)


def getitem(a, idx):
    """Basic indexing only (ints, slices, tuples thereof)."""
    a = ensure_tensor(a)
    data = a.data[idx]

    def bw(g):
        out = np.zeros_like(a.data)
        out[idx] += g
        return (out,)

    return _make(data, (a,), bw)


def embedding(table, ids):
    """Row lookup with duplicate-safe scatter-add backward."""
    table = ensure_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    data = table.data[ids]

    def bw(g):
        out = np.zeros_like(table.data)
        np.add.at(out, ids, g)
        return (out,)

    return _make(data, (table,), bw)


def concat(tensors, axis=0):
    tensors = [ensure_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    split_at = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, split_at, axis=axis))

    return _make(data, tuple(tensors), bw)


# -- matmul / softmax --------------------------------------------------------


def matmul(a, b):
    a, b = ensure_tensor(a), ensure_tensor(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ValueError("matmul operands must have ndim >= 2")
    data = a.data @ b.data

    def bw(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.data.shape), _unbroadcast(gb, b.data.shape)

    return _make(data, (a, b), bw)


def softmax(a, axis=-1):
    """Stable softmax. -inf entries become exact zeros and get zero gradient."""
    a = ensure_tensor(a)
    m = np.max(a.data, axis=axis, keepdims=True)
    e = np.exp(a.data - m)
    data = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        dot = (g * data).sum(axis=axis, keepdims=True)
        return (data * (g - dot),)

    return _make(data, (a,), bw)


# -- composites used by the models ------------------------------------------


def layernorm(x, gamma, beta, eps: float = 1e-5):
    """Normalize over the last axis; gamma/beta broadcast over leading axes."""
    mu = tmean(x, axis=-1, keepdims=True)
    xc = sub(x, mu)
    var = tmean(mul(xc, xc), axis=-1, keepdims=True)
    inv = power(add(var, eps), -0.5)
    return add(mul(mul(xc, inv), gamma), beta)


def l2_normalize(x, axis=-1, eps: float = 1e-12):
    n = sqrt(add(tsum(mul(x, x), axis=axis, keepdims=True), eps))
    return div(x, n)


def mse(a, b):
    d = sub(a, b)
    return tmean(mul(d, d))


# -- finite differences ------------------------------------------------------


def finite_difference(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of scalar f() w.r.t. array x.

    f must close over x and reread it on every call; x is perturbed in place
    and restored. This oracle shares nothing with the backward pass.
    """
    g = np.zeros_like(x)
    flat_x = x.ravel()
    flat_g = g.ravel()
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + h
        fp = float(f())
        flat_x[i] = orig - h
        fm = float(f())
        flat_x[i] = orig
        flat_g[i] = (fp - fm) / (2.0 * h)
    return g
