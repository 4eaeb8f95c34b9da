"""Minimal reverse-mode automatic differentiation over numpy arrays.

Just enough machinery for the neural scorer: broadcast-aware arithmetic,
matmul, activations, softmax/log-softmax, layer normalization, embedding
lookup and shape surgery. Everything runs in float64 so finite-difference
gradient checks are meaningful.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf

_SQRT_2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient back down to the shape it was broadcast from."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False,
                 parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad += grad

    def backward(self) -> None:
        """Backprop from this (scalar) tensor through the whole graph."""
        topo: list = []
        seen: set = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other):
        other = _as_tensor(other)
        out = Tensor(self.data + other.data, parents=(self, other))

        def backward(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g, other.data.shape))

        out._backward = backward
        return out

    def __sub__(self, other):
        return self + (_as_tensor(other) * -1.0)

    def __mul__(self, other):
        other = _as_tensor(other)
        out = Tensor(self.data * other.data, parents=(self, other))

        def backward(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g * other.data, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g * self.data, other.data.shape))

        out._backward = backward
        return out

    __radd__ = __add__
    __rmul__ = __mul__

    def matmul(self, other):
        other = _as_tensor(other)
        out = Tensor(self.data @ other.data, parents=(self, other))

        def backward(g):
            if self.requires_grad:
                ga = g @ np.swapaxes(other.data, -1, -2)
                self._accumulate(_unbroadcast(ga, self.data.shape))
            if other.requires_grad:
                gb = np.swapaxes(self.data, -1, -2) @ g
                other._accumulate(_unbroadcast(gb, other.data.shape))

        out._backward = backward
        return out

    __matmul__ = matmul

    # -- shape surgery ----------------------------------------------------

    def reshape(self, *shape):
        src_shape = self.data.shape
        out = Tensor(self.data.reshape(*shape), parents=(self,))

        def backward(g):
            if self.requires_grad:
                self._accumulate(g.reshape(src_shape))

        out._backward = backward
        return out

    def swapaxes(self, a: int, b: int):
        out = Tensor(np.swapaxes(self.data, a, b), parents=(self,))

        def backward(g):
            if self.requires_grad:
                self._accumulate(np.swapaxes(g, a, b))

        out._backward = backward
        return out

    def slice_axis(self, axis: int, start: int, stop: int):
        index = [slice(None)] * self.data.ndim
        index[axis] = slice(start, stop)
        index = tuple(index)
        out = Tensor(self.data[index], parents=(self,))

        def backward(g):
            if self.requires_grad:
                full = np.zeros_like(self.data)
                full[index] = g
                self._accumulate(full)

        out._backward = backward
        return out

    def sum(self, axis=None, keepdims: bool = False):
        out = Tensor(self.data.sum(axis=axis, keepdims=keepdims), parents=(self,))

        def backward(g):
            if not self.requires_grad:
                return
            grad = g
            if axis is not None and not keepdims:
                grad = np.expand_dims(grad, axis)
            self._accumulate(np.broadcast_to(grad, self.data.shape).copy())

        out._backward = backward
        return out

    def mean(self, axis=None, keepdims: bool = False):
        count = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    # -- activations ------------------------------------------------------

    def tanh(self):
        value = np.tanh(self.data)
        out = Tensor(value, parents=(self,))

        def backward(g):
            if self.requires_grad:
                self._accumulate(g * (1.0 - value * value))

        out._backward = backward
        return out

    def sigmoid(self):
        value = 1.0 / (1.0 + np.exp(-self.data))
        out = Tensor(value, parents=(self,))

        def backward(g):
            if self.requires_grad:
                self._accumulate(g * value * (1.0 - value))

        out._backward = backward
        return out

    def gelu(self):
        """Exact erf-based GELU."""
        x = self.data
        phi = 0.5 * (1.0 + erf(x / _SQRT_2))
        out = Tensor(x * phi, parents=(self,))

        def backward(g):
            if self.requires_grad:
                pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
                self._accumulate(g * (phi + x * pdf))

        out._backward = backward
        return out

    def softmax(self):
        """Softmax over the last axis (numerically stabilized)."""
        shifted = self.data - self.data.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        value = e / e.sum(axis=-1, keepdims=True)
        out = Tensor(value, parents=(self,))

        def backward(g):
            if self.requires_grad:
                dot = (g * value).sum(axis=-1, keepdims=True)
                self._accumulate(value * (g - dot))

        out._backward = backward
        return out

    def log_softmax(self):
        shifted = self.data - self.data.max(axis=-1, keepdims=True)
        logsumexp = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
        value = shifted - logsumexp
        soft = np.exp(value)
        out = Tensor(value, parents=(self,))

        def backward(g):
            if self.requires_grad:
                self._accumulate(g - soft * g.sum(axis=-1, keepdims=True))

        out._backward = backward
        return out

    def layer_norm(self, eps: float = 1e-5):
        """Normalize over the last axis (affine handled by the caller)."""
        mu = self.data.mean(axis=-1, keepdims=True)
        centered = self.data - mu
        var = (centered * centered).mean(axis=-1, keepdims=True)
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = centered * inv_std
        out = Tensor(xhat, parents=(self,))

        def backward(g):
            if self.requires_grad:
                g_mean = g.mean(axis=-1, keepdims=True)
                gx_mean = (g * xhat).mean(axis=-1, keepdims=True)
                self._accumulate(inv_std * (g - g_mean - xhat * gx_mean))

        out._backward = backward
        return out

    def take_rows(self, index: np.ndarray):
        """Row gather for embedding lookup: self (V, d), index int array."""
        out = Tensor(self.data[index], parents=(self,))

        def backward(g):
            if self.requires_grad:
                full = np.zeros_like(self.data)
                np.add.at(full, index, g)
                self._accumulate(full)

        out._backward = backward
        return out

    def take_along_last(self, index: np.ndarray):
        """Pick one entry per row along the last axis; index shape (..., 1)."""
        out = Tensor(np.take_along_axis(self.data, index, axis=-1),
                     parents=(self,))

        def backward(g):
            if self.requires_grad:
                full = np.zeros_like(self.data)
                np.put_along_axis(full, index, g, axis=-1)
                self._accumulate(full)

        out._backward = backward
        return out


def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def parameter(data) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True)


def constant(data) -> Tensor:
    return Tensor(data)


def stack(tensors, axis: int) -> Tensor:
    parents = tuple(tensors)
    out = Tensor(np.stack([t.data for t in parents], axis=axis), parents=parents)

    def backward(g):
        pieces = np.split(g, len(parents), axis=axis)
        for t, piece in zip(parents, pieces):
            if t.requires_grad:
                t._accumulate(piece.squeeze(axis=axis)
                              if piece.shape != t.data.shape else piece)

    out._backward = backward
    return out
