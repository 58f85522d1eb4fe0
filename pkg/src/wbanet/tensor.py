"""Dense float64 tensors with tape-based reverse-mode automatic differentiation.

The graph is dynamic: every op that touches a tracked tensor records its
parents and a backward closure. ``Tensor.backward()`` topologically sorts the
recorded nodes and accumulates gradients onto every tensor created with
``requires_grad=True``. A graph is single-use; a second ``backward()`` on the
same loss raises.
"""

from __future__ import annotations

import contextlib
import math
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import GradError, ShapeError

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference fast path)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn",
                 "_tracked", "_consumed")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn: Callable | None = None
        self._tracked = self.requires_grad
        self._consumed = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self):
        """Accumulate gradients of this scalar onto all requires_grad tensors."""
        if self.data.size != 1:
            raise GradError(f"backward requires a scalar loss, got shape {self.shape}")
        if self._consumed:
            raise GradError("graph already consumed; run a fresh forward pass")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad:
                node.grad = g.copy() if node.grad is None else node.grad + g
            if node._backward_fn is None:
                continue
            for parent, pg in zip(node._parents, node._backward_fn(g)):
                if pg is None:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + pg
                else:
                    grads[id(parent)] = pg
        self._consumed = True


def _node(data: np.ndarray, parents: Sequence[Tensor],
          backward_fn: Callable) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED and any(p._tracked for p in parents):
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
        out._tracked = True
    return out


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_extents(shape: Iterable[int]) -> tuple[int, ...]:
    shape = tuple(int(s) for s in shape)
    if any(s < 1 for s in shape):
        raise ShapeError(f"extents must be positive, got {shape}")
    return shape


# ---------------------------------------------------------------------------
# creation

def zeros(shape, requires_grad: bool = False) -> Tensor:
    return Tensor(np.zeros(_check_extents(shape)), requires_grad)


def full(shape, value: float, requires_grad: bool = False) -> Tensor:
    return Tensor(np.full(_check_extents(shape), float(value)), requires_grad)


def uniform(shape, lo: float, hi: float, rng, requires_grad: bool = False) -> Tensor:
    """Uniform fill; ``rng`` is an int seed or a numpy Generator."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return Tensor(rng.uniform(lo, hi, _check_extents(shape)), requires_grad)


def tensor(values, requires_grad: bool = False) -> Tensor:
    return Tensor(np.asarray(values, dtype=np.float64), requires_grad)


def eye(n: int, requires_grad: bool = False) -> Tensor:
    return Tensor(np.eye(n), requires_grad)


# ---------------------------------------------------------------------------
# gradient bookkeeping for broadcasting

def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum-reduce a broadcast gradient back to the operand's shape."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gd, sd) in enumerate(zip(g.shape, shape))
                 if sd == 1 and gd != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _broadcastable(a: tuple[int, ...], b: tuple[int, ...]) -> bool:
    for x, y in zip(reversed(a), reversed(b)):
        if x != y and x != 1 and y != 1:
            return False
    return True


# ---------------------------------------------------------------------------
# elementwise

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if not _broadcastable(a.shape, b.shape):
        raise ShapeError(f"cannot broadcast {a.shape} with {b.shape}")
    out = a.data + b.data
    return _node(out, (a, b), lambda g: (_unbroadcast(g, a.shape),
                                         _unbroadcast(g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if not _broadcastable(a.shape, b.shape):
        raise ShapeError(f"cannot broadcast {a.shape} with {b.shape}")
    out = a.data * b.data
    return _node(out, (a, b), lambda g: (_unbroadcast(g * b.data, a.shape),
                                         _unbroadcast(g * a.data, b.shape)))


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)
    return _node(a.data * s, (a,), lambda g: (g * s,))


# ---------------------------------------------------------------------------
# linear algebra

def _swap(x: np.ndarray) -> np.ndarray:
    return np.swapaxes(x, -1, -2)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul operands must be at least 2-D")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"inner dims disagree: {a.shape} @ {b.shape}")
    if not _broadcastable(a.shape[:-2], b.shape[:-2]):
        raise ShapeError(f"leading dims disagree: {a.shape} @ {b.shape}")
    out = np.matmul(a.data, b.data)

    def backward(g):
        return (_unbroadcast(np.matmul(g, _swap(b.data)), a.shape),
                _unbroadcast(np.matmul(_swap(a.data), g), b.shape))

    return _node(out, (a, b), backward)


def transpose_last2(a: Tensor) -> Tensor:
    return _node(_swap(a.data), (a,), lambda g: (_swap(g),))


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Affine map over the last axis; doubles as a 1x1 convolution."""
    if w.ndim != 2:
        raise ShapeError(f"weight must be 2-D, got {w.shape}")
    if x.shape[-1] != w.shape[0]:
        raise ShapeError(f"channel mismatch: input {x.shape} vs weight {w.shape}")
    lead = x.shape[:-1]
    flat = reshape(x, (-1, x.shape[-1]))
    out = matmul(flat, w)
    out = reshape(out, lead + (w.shape[1],))
    if b is not None:
        if b.shape != (w.shape[1],):
            raise ShapeError(f"bias shape {b.shape} does not match output {w.shape[1]}")
        out = add(out, b)
    return out


# ---------------------------------------------------------------------------
# shape manipulation

def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    out = a.data.reshape(shape)
    src = a.shape
    return _node(out, (a,), lambda g: (g.reshape(src),))


def concat(parts: Sequence[Tensor], axis: int) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    ref = parts[0].shape
    ax = axis % len(ref)
    for p in parts[1:]:
        if len(p.shape) != len(ref) or any(
                p.shape[i] != ref[i] for i in range(len(ref)) if i != ax):
            raise ShapeError(f"concat mismatch off axis {ax}: {ref} vs {p.shape}")
    out = np.concatenate([p.data for p in parts], axis=ax)
    splits = np.cumsum([p.shape[ax] for p in parts])[:-1]
    return _node(out, tuple(parts),
                 lambda g: tuple(np.split(g, splits, axis=ax)))


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    ax = axis % a.ndim
    if start < 0 or start + length > a.shape[ax]:
        raise ShapeError(f"narrow [{start}:{start + length}] outside axis "
                         f"{ax} of {a.shape}")
    idx = tuple(slice(None) if i != ax else slice(start, start + length)
                for i in range(a.ndim))

    def backward(g):
        full_g = np.zeros_like(a.data)
        full_g[idx] = g
        return (full_g,)

    return _node(a.data[idx], (a,), backward)


def expand(a: Tensor, shape) -> Tensor:
    """Broadcast to an explicit shape; gradient sum-reduces back."""
    shape = tuple(shape)
    out = np.broadcast_to(a.data, shape)
    return _node(np.ascontiguousarray(out), (a,),
                 lambda g: (_unbroadcast(g, a.shape),))


# ---------------------------------------------------------------------------
# reductions and nonlinearities

def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.shape).copy(),)

    return _node(np.asarray(out), (a,), backward)


def global_avg_pool(a: Tensor) -> Tensor:
    """Spatial mean over the (H, W) axes of a (..., H, W, C) tensor."""
    if a.ndim < 3:
        raise ShapeError(f"expected (..., H, W, C), got {a.shape}")
    h, w = a.shape[-3], a.shape[-2]
    out = a.data.mean(axis=(-3, -2), keepdims=True)
    return _node(out, (a,),
                 lambda g: (np.broadcast_to(g / (h * w), a.shape).copy(),))


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return _node(out, (a,), lambda g: (g * out * (1.0 - out),))


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(a: Tensor) -> Tensor:
    """GELU, tanh approximation: 0.5*x*(1 + tanh(c*(x + 0.044715*x^3)))."""
    x = a.data
    inner = _GELU_C * (x + 0.044715 * x ** 3)
    t = np.tanh(inner)
    out = 0.5 * x * (1.0 + t)

    def backward(g):
        d_inner = _GELU_C * (1.0 + 3 * 0.044715 * x ** 2)
        d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * d_inner
        return (g * d,)

    return _node(out, (a,), backward)


def softmax_rows(a: Tensor) -> Tensor:
    """Softmax over the last axis, max-subtracted for stability."""
    x = a.data
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        dot = (g * out).sum(axis=-1, keepdims=True)
        return (out * (g - dot),)

    return _node(out, (a,), backward)


def log_softmax_rows(a: Tensor) -> Tensor:
    x = a.data
    m = x.max(axis=-1, keepdims=True)
    shifted = x - m
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out = shifted - lse
    sm = np.exp(out)

    def backward(g):
        return (g - sm * g.sum(axis=-1, keepdims=True),)

    return _node(out, (a,), backward)


# ---------------------------------------------------------------------------
# optimizer

class Adam:
    """Adam with bias correction over a list of parameter tensors."""

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, p in enumerate(self.params):
            if p.grad is None:
                raise GradError(f"parameter {i} has no gradient; run backward first")
            g = p.grad
            self._m[i] = b1 * self._m[i] + (1 - b1) * g
            self._v[i] = b2 * self._v[i] + (1 - b2) * g * g
            m_hat = self._m[i] / (1 - b1 ** self.t)
            v_hat = self._v[i] / (1 - b2 ** self.t)
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None
