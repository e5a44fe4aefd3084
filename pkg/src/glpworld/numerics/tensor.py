"""Reverse-mode automatic differentiation over numpy arrays.

Gradients are recorded on an explicit tape rather than on the tensors
themselves: opening a ``GradTape`` starts recording, and
``tape.gradients(loss, params)`` walks the recorded ops once, in reverse.
A tape can be consumed exactly once. All ops check their outputs for
non-finite values unless disabled via ``set_finite_checks(False)``.
"""
from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np


class NumericsError(Exception):
    """Raised for non-finite values, bad masks, and tape misuse."""


_FINITE_CHECKS = True


def set_finite_checks(enabled: bool) -> None:
    global _FINITE_CHECKS
    _FINITE_CHECKS = bool(enabled)


def finite_checks_enabled() -> bool:
    return _FINITE_CHECKS


class Tensor:
    """A numpy array plus a flag saying whether a tape is tracking it."""

    __slots__ = ("data", "requires_grad")

    def __init__(self, data, dtype=None, requires_grad: bool = False):
        arr = np.asarray(data, dtype=dtype)
        if not isinstance(arr.dtype.type(0), np.floating) and dtype is None:
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = requires_grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype.name})"

    # operator sugar; implementations live in module-level functions
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
        return take(self, idx)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def swapaxes(self, a: int, b: int) -> "Tensor":
        return swapaxes(self, a, b)

    def transpose(self, axes: Sequence[int]) -> "Tensor":
        return transpose(self, axes)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return mean(self, axis=axis, keepdims=keepdims)


class Parameter(Tensor):
    """A named leaf tensor; optimizers and checkpoints key on the name."""

    __slots__ = ("name",)

    def __init__(self, name: str, data, dtype=None):
        super().__init__(data, dtype=dtype, requires_grad=True)
        self.name = name

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


class _Node:
    __slots__ = ("out", "parents", "bwd")

    def __init__(self, out: Tensor, parents: tuple[Tensor, ...], bwd: Callable):
        self.out = out
        self.parents = parents
        self.bwd = bwd


_TAPES: list["GradTape"] = []


class GradTape:
    """Records ops while active (as a context manager); single-use."""

    def __init__(self):
        self._nodes: list[_Node] = []
        self._consumed = False

    def __enter__(self) -> "GradTape":
        _TAPES.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _TAPES.pop()

    def gradients(self, loss: Tensor, params: Iterable[Parameter]) -> dict[str, np.ndarray]:
        """d(loss)/d(param) for every parameter, keyed by parameter name.

        Parameters the loss does not depend on get zero gradients. The
        tape is consumed by this call.
        """
        if self._consumed:
            raise NumericsError("tape already consumed; gradients() may be called once")
        self._consumed = True
        if loss.size != 1:
            raise NumericsError(f"loss must be a scalar, got shape {loss.shape}")
        params = list(params)
        recorded = {id(n.out) for n in self._nodes}
        if id(loss) not in recorded and not isinstance(loss, Parameter):
            raise NumericsError("loss was not recorded on this tape")

        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self._nodes):
            g = grads.pop(id(node.out), None)
            if g is None:
                continue
            for parent, pg in zip(node.parents, node.bwd(g)):
                if pg is None or not parent.requires_grad:
                    continue
                acc = grads.get(id(parent))
                grads[id(parent)] = pg if acc is None else acc + pg
        out: dict[str, np.ndarray] = {}
        for p in params:
            g = grads.get(id(p))
            out[p.name] = np.zeros_like(p.data) if g is None else g
        return out


def _active_tape() -> GradTape | None:
    return _TAPES[-1] if _TAPES else None


def _coerce(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None and np.isscalar(x) else None
    return Tensor(np.asarray(x, dtype=dtype))


def _make(data: np.ndarray, parents: tuple[Tensor, ...], bwd: Callable, op: str) -> Tensor:
    if _FINITE_CHECKS and not np.all(np.isfinite(data)):
        raise NumericsError(f"non-finite values produced by op '{op}'")
    out = Tensor(data)
    tape = _active_tape()
    if tape is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        tape._nodes.append(_Node(out, parents, bwd))
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient down to the shape its operand had before broadcasting."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# ---------------------------------------------------------------- arithmetic


def add(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b, like=a)
    data = a.data + b.data

    def bwd(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(data, (a, b), bwd, "add")


def sub(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b, like=a)
    data = a.data - b.data

    def bwd(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _make(data, (a, b), bwd, "sub")


def mul(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b, like=a)
    data = a.data * b.data

    def bwd(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _make(data, (a, b), bwd, "mul")


def div(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b, like=a)
    with np.errstate(divide="ignore", invalid="ignore"):
        data = a.data / b.data

    def bwd(g):
        ga = _unbroadcast(g / b.data, a.shape)
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.shape)
        return ga, gb

    return _make(data, (a, b), bwd, "div")


def power(a, p: float) -> Tensor:
    a = _coerce(a)
    p = float(p)
    with np.errstate(invalid="ignore"):
        data = a.data**p

    def bwd(g):
        return (g * p * a.data ** (p - 1.0),)

    return _make(data, (a,), bwd, f"pow[{p}]")


def matmul(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    data = a.data @ b.data

    def bwd(g):
        ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)
        gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return ga, gb

    return _make(data, (a, b), bwd, "matmul")


def exp(a) -> Tensor:
    a = _coerce(a)
    with np.errstate(over="ignore"):
        data = np.exp(a.data)

    def bwd(g):
        return (g * data,)

    return _make(data, (a,), bwd, "exp")


def log(a) -> Tensor:
    a = _coerce(a)
    with np.errstate(invalid="ignore", divide="ignore"):
        data = np.log(a.data)

    def bwd(g):
        return (g / a.data,)

    return _make(data, (a,), bwd, "log")


def tanh(a) -> Tensor:
    a = _coerce(a)
    data = np.tanh(a.data)

    def bwd(g):
        return (g * (1.0 - data * data),)

    return _make(data, (a,), bwd, "tanh")


def sqrt(a) -> Tensor:
    return power(a, 0.5)


# ---------------------------------------------------------------- reductions


def sum_(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _coerce(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _make(data, (a,), bwd, "sum")


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _coerce(a)
    data = a.data.mean(axis=axis, keepdims=keepdims)
    if axis is None:
        count = a.data.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([a.data.shape[ax] for ax in axes]))

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g / count, a.shape).copy(),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, a.shape).copy(),)

    return _make(data, (a,), bwd, "mean")


# ---------------------------------------------------------------- shape ops


def reshape(a, shape: tuple[int, ...]) -> Tensor:
    a = _coerce(a)
    old = a.shape
    data = a.data.reshape(shape)

    def bwd(g):
        return (g.reshape(old),)

    return _make(data, (a,), bwd, "reshape")


def swapaxes(a, ax1: int, ax2: int) -> Tensor:
    a = _coerce(a)
    data = np.swapaxes(a.data, ax1, ax2)

    def bwd(g):
        return (np.swapaxes(g, ax1, ax2),)

    return _make(data, (a,), bwd, "swapaxes")


def transpose(a, axes: Sequence[int]) -> Tensor:
    a = _coerce(a)
    axes = tuple(axes)
    data = np.transpose(a.data, axes)
    inv = tuple(np.argsort(axes))

    def bwd(g):
        return (np.transpose(g, inv),)

    return _make(data, (a,), bwd, "transpose")


def take(a, idx) -> Tensor:
    """Basic and integer-array indexing with gradient scatter-add."""
    a = _coerce(a)
    data = a.data[idx]

    def bwd(g):
        out = np.zeros_like(a.data)
        np.add.at(out, idx, g)
        return (out,)

    return _make(data.copy() if data.base is not None else data, (a,), bwd, "take")


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = [_coerce(p) for p in parts]
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(data, tuple(parts), bwd, "concat")


def stack(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = [_coerce(p) for p in parts]
    data = np.stack([p.data for p in parts], axis=axis)

    def bwd(g):
        pieces = np.split(g, len(parts), axis=axis)
        return tuple(np.squeeze(p, axis=axis) for p in pieces)

    return _make(data, tuple(parts), bwd, "stack")


def embedding(table: Tensor, ids) -> Tensor:
    """Row gather from a (vocab, dim) table; ids is an integer array."""
    table = _coerce(table)
    ids = np.asarray(ids)
    if ids.min(initial=0) < 0 or (ids.size and ids.max() >= table.shape[0]):
        raise NumericsError("embedding id out of range")
    data = table.data[ids]

    def bwd(g):
        out = np.zeros_like(table.data)
        np.add.at(out, ids, g)
        return (out,)

    return _make(data, (table,), bwd, "embedding")


# ---------------------------------------------------------------- attention


def masked_softmax(logits, mask: np.ndarray) -> Tensor:
    """Softmax over the last axis, restricted to positions where mask is True.

    Disallowed positions get weight exactly 0.0 and never influence the
    result, so their logits may hold any finite value. A query row whose
    mask is all False has no valid distribution and raises.
    """
    logits = _coerce(logits)
    maskb = np.broadcast_to(np.asarray(mask, dtype=bool), logits.shape)
    if not maskb.any(axis=-1).all():
        raise NumericsError("unattendable query position: mask row with no True entries")
    x = logits.data
    m = np.max(x, axis=-1, keepdims=True, initial=-np.inf, where=maskb)
    shifted = np.where(maskb, x - m, 0.0)
    e = np.exp(shifted) * maskb
    s = e.sum(axis=-1, keepdims=True)
    w = e / s

    def bwd(g):
        inner = (g * w).sum(axis=-1, keepdims=True)
        return (w * (g - inner),)

    return _make(w, (logits,), bwd, "masked_softmax")


def masked_attention(q, k, v, mask: np.ndarray, scale: float | None = None) -> Tensor:
    """Scaled dot-product attention with a boolean mask.

    q: (..., Lq, D); k, v: (..., Lk, D); mask broadcastable to (..., Lq, Lk),
    True meaning "may attend". Masked weights are exactly zero, so the
    output over a query position is bitwise independent of the content at
    positions it cannot see.
    """
    q, k, v = _coerce(q), _coerce(k), _coerce(v)
    d = q.shape[-1]
    if scale is None:
        scale = 1.0 / math.sqrt(d)
    logits = mul(matmul(q, swapaxes(k, -1, -2)), scale)
    w = masked_softmax(logits, mask)
    return matmul(w, v)
