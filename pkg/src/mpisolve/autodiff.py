"""Minimal reverse-mode autodiff on numpy arrays.

Just enough machinery to differentiate the unrolled solver: elementwise
arithmetic with broadcasting, per-pixel affine layers, elu/sigmoid,
elementwise maximum (ties route to the first argument), concatenation,
slicing, and bilinear warping with its exact scatter adjoint.

The module-level helper functions (``elu``, ``sigmoid``, ``maximum``,
``concat``, ``affine``, ``warp``) dispatch on their arguments, so forward
code written against them runs identically on plain ndarrays (inference)
and Tensors (training).
"""
from __future__ import annotations

import numpy as np

from .kernels import bilinear_gather, bilinear_scatter


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce ``grad`` back to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_backward", "requires_grad")

    # keep numpy from consuming ndarray <op> Tensor; defer to our reflected ops
    __array_ufunc__ = None

    def __init__(self, data, parents=(), backward=None, requires_grad=False):
        self.data = np.asarray(data)
        self.grad = None
        self._parents = parents
        self._backward = backward
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    @property
    def shape(self):
        return self.data.shape

    # -- graph -----------------------------------------------------------
    def backward(self, seed=None):
        if seed is None:
            seed = np.ones_like(self.data)
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.asarray(seed)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
            # free intermediate grads/graph refs as we go? keep for inspection

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, copy=True)
        else:
            self.grad += g

    # -- elementwise arithmetic ------------------------------------------
    def __add__(self, other):
        other = _wrap(other)
        out = Tensor(self.data + other.data, (self, other))

        def bwd(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g, other.data.shape))

        out._backward = bwd
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Tensor(-self.data, (self,))
        out._backward = lambda g: self._accumulate(-g)
        return out

    def __sub__(self, other):
        return self + (-_wrap(other))

    def __rsub__(self, other):
        return _wrap(other) + (-self)

    def __mul__(self, other):
        other = _wrap(other)
        out = Tensor(self.data * other.data, (self, other))

        def bwd(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g * other.data, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g * self.data, other.data.shape))

        out._backward = bwd
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise NotImplementedError("tensor/tensor division is not needed")
        return self * (1.0 / other)

    def __getitem__(self, key):
        out = Tensor(self.data[key], (self,))

        def bwd(g):
            full = np.zeros_like(self.data)
            full[key] = g
            self._accumulate(full)

        out._backward = bwd
        return out

    # -- reductions and nonlinearities -----------------------------------
    def sum(self):
        out = Tensor(np.asarray(self.data.sum()), (self,))
        out._backward = lambda g: self._accumulate(np.broadcast_to(g, self.data.shape))
        return out

    def sum_axis(self, axis, keepdims=True):
        out = Tensor(self.data.sum(axis=axis, keepdims=keepdims), (self,))

        def bwd(g):
            if not keepdims:
                g = np.expand_dims(g, axis)
            self._accumulate(np.broadcast_to(g, self.data.shape))

        out._backward = bwd
        return out

    def mean(self):
        return self.sum() / self.data.size

    def abs(self):
        out = Tensor(np.abs(self.data), (self,))
        out._backward = lambda g: self._accumulate(g * np.sign(self.data))
        return out

    def square(self):
        return self * self

    def sigmoid(self):
        from scipy.special import expit

        y = expit(self.data)
        out = Tensor(y, (self,))
        out._backward = lambda g: self._accumulate(g * y * (1.0 - y))
        return out

    def elu(self):
        y = np.where(self.data > 0, self.data, np.expm1(self.data))
        out = Tensor(y, (self,))
        out._backward = lambda g: self._accumulate(g * np.where(self.data > 0, 1.0, y + 1.0))
        return out


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def tensor(data, requires_grad=False) -> Tensor:
    return Tensor(np.asarray(data, dtype=np.float64) if requires_grad else np.asarray(data),
                  requires_grad=requires_grad)


def parameter(data) -> Tensor:
    return Tensor(np.asarray(data), requires_grad=True)


# -- dispatching functional ops ------------------------------------------

def _any_tensor(*xs):
    return any(isinstance(x, Tensor) for x in xs)


def sigmoid(x):
    if isinstance(x, Tensor):
        return x.sigmoid()
    from scipy.special import expit

    return expit(x)


def elu(x):
    if isinstance(x, Tensor):
        return x.elu()
    return np.where(x > 0, x, np.expm1(x))


def maximum(a, b):
    """Elementwise maximum; gradient routes to ``a`` on exact ties."""
    if not _any_tensor(a, b):
        return np.maximum(a, b)
    a, b = _wrap(a), _wrap(b)
    out = Tensor(np.maximum(a.data, b.data), (a, b))

    def bwd(g):
        take_a = a.data >= b.data
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * take_a, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * ~take_a, b.data.shape))

    out._backward = bwd
    return out


def concat(parts, axis=-1):
    if not _any_tensor(*parts):
        return np.concatenate(parts, axis=axis)
    parts = [_wrap(p) for p in parts]
    out = Tensor(np.concatenate([p.data for p in parts], axis=axis), tuple(parts))
    sizes = [p.data.shape[axis] for p in parts]

    def bwd(g):
        offs = np.cumsum([0] + sizes)
        for p, lo, hi in zip(parts, offs[:-1], offs[1:]):
            if p.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                p._accumulate(g[tuple(idx)])

    out._backward = bwd
    return out


def stack(parts, axis=0):
    if not _any_tensor(*parts):
        return np.stack(parts, axis=axis)
    parts = [_wrap(p) for p in parts]
    out = Tensor(np.stack([p.data for p in parts], axis=axis), tuple(parts))

    def bwd(g):
        slabs = np.moveaxis(g, axis, 0)
        for p, slab in zip(parts, slabs):
            if p.requires_grad:
                p._accumulate(slab)

    out._backward = bwd
    return out


def affine(x, w, b):
    """Per-pixel affine layer: (..., Cin) @ (Cin, Cout) + (Cout,)."""
    if not _any_tensor(x, w, b):
        return x @ w + b
    x, w, b = _wrap(x), _wrap(w), _wrap(b)
    out = Tensor(x.data @ w.data + b.data, (x, w, b))

    def bwd(g):
        if x.requires_grad:
            x._accumulate(g @ w.data.T)
        if w.requires_grad:
            cin, cout = w.data.shape
            w._accumulate(x.data.reshape(-1, cin).T @ g.reshape(-1, cout))
        if b.requires_grad:
            b._accumulate(g.reshape(-1, g.shape[-1]).sum(axis=0))

    out._backward = bwd
    return out


def warp(src, xs, ys, height=None, width=None):
    """Bilinear-gather ``src`` (H, W, C) at fixed coordinates; the backward
    pass is the exact scatter adjoint onto the source grid."""
    if not isinstance(src, Tensor):
        return bilinear_gather(src, xs, ys)
    h, w = src.data.shape[:2]
    out = Tensor(bilinear_gather(src.data, xs, ys), (src,))
    out._backward = lambda g: src._accumulate(bilinear_scatter(g, xs, ys, h, w))
    return out
