"""Small neural-net layer zoo on top of the tape-based tensor ops.

Assigning a Parameter or Module (or a list of Modules) to an attribute
registers it; parameters() walks the tree and yields a flat, insertion-
ordered dict whose keys double as checkpoint buffer names.
"""
from __future__ import annotations

import math

import numpy as np

from .rng import RngStream
from .tensor import (
    Parameter,
    Tensor,
    concat,
    embedding,
    masked_attention,
    mul,
    power,
    reshape,
    swapaxes,
    tanh,
)


class Module:
    def __setattr__(self, name, value):
        if isinstance(value, Parameter):
            self.__dict__.setdefault("_params", {})[name] = value
        elif isinstance(value, Module):
            self.__dict__.setdefault("_modules", {})[name] = value
        elif isinstance(value, list) and value and all(isinstance(v, Module) for v in value):
            self.__dict__.setdefault("_modules", {})[name] = value
        object.__setattr__(self, name, value)

    def parameters(self) -> dict[str, Parameter]:
        """All parameters in traversal order, keyed by their constructed names."""
        out: dict[str, Parameter] = {}
        self._collect(out)
        return out

    def _collect(self, out: dict[str, Parameter]) -> None:
        for p in self.__dict__.get("_params", {}).values():
            if p.name in out and out[p.name] is not p:
                raise ValueError(f"duplicate parameter name {p.name!r}")
            out[p.name] = p
        for child in self.__dict__.get("_modules", {}).values():
            for sub in child if isinstance(child, list) else [child]:
                sub._collect(out)


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(x: Tensor) -> Tensor:
    """tanh-form gelu; smooth everywhere, which finite-difference checks need."""
    inner = mul(x + mul(power(x, 3.0), 0.044715), _GELU_C)
    return mul(mul(x, tanh(inner) + 1.0), 0.5)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    return (centered / power(var + eps, 0.5)) * gamma + beta


class Linear(Module):
    def __init__(self, name: str, d_in: int, d_out: int, rng: RngStream, dtype=np.float32,
                 bias: bool = True, zero_init: bool = False):
        if zero_init:
            w = np.zeros((d_in, d_out))
        else:
            w = rng.normal((d_in, d_out), dtype=np.float64) / math.sqrt(d_in)
        self.w = Parameter(f"{name}.w", w, dtype=dtype)
        self.b = Parameter(f"{name}.b", np.zeros(d_out), dtype=dtype) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        y = x @ self.w
        return y + self.b if self.b is not None else y


class LayerNorm(Module):
    def __init__(self, name: str, dim: int, dtype=np.float32, eps: float = 1e-5):
        self.eps = eps
        self.gamma = Parameter(f"{name}.gamma", np.ones(dim), dtype=dtype)
        self.beta = Parameter(f"{name}.beta", np.zeros(dim), dtype=dtype)

    def __call__(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gamma, self.beta, self.eps)


class Embedding(Module):
    def __init__(self, name: str, vocab: int, dim: int, rng: RngStream, dtype=np.float32):
        table = rng.normal((vocab, dim), dtype=np.float64) / math.sqrt(dim)
        self.table = Parameter(f"{name}.table", table, dtype=dtype)

    def __call__(self, ids) -> Tensor:
        return embedding(self.table, np.asarray(ids))


def split_heads(x: Tensor, heads: int) -> Tensor:
    """(..., L, D) -> (..., heads, L, D/heads)"""
    *lead, length, dim = x.shape
    x = reshape(x, (*lead, length, heads, dim // heads))
    return swapaxes(x, -2, -3)


def merge_heads(x: Tensor) -> Tensor:
    """(..., heads, L, Dh) -> (..., L, heads*Dh)"""
    x = swapaxes(x, -2, -3)
    *lead, length, heads, dh = x.shape
    return reshape(x, (*lead, length, heads * dh))


class MultiHeadAttention(Module):
    """Self- or cross-attention; the mask says which key positions each query may see."""

    def __init__(self, name: str, dim: int, heads: int, rng: RngStream, dtype=np.float32,
                 zero_init_out: bool = False):
        if dim % heads != 0:
            raise ValueError(f"dim {dim} not divisible by heads {heads}")
        self.heads = heads
        self.q = Linear(f"{name}.q", dim, dim, rng.child("q"), dtype)
        self.k = Linear(f"{name}.k", dim, dim, rng.child("k"), dtype)
        self.v = Linear(f"{name}.v", dim, dim, rng.child("v"), dtype)
        self.out = Linear(f"{name}.out", dim, dim, rng.child("out"), dtype, zero_init=zero_init_out)

    def __call__(self, x_q: Tensor, x_kv: Tensor, mask: np.ndarray) -> Tensor:
        q = split_heads(self.q(x_q), self.heads)
        k = split_heads(self.k(x_kv), self.heads)
        v = split_heads(self.v(x_kv), self.heads)
        attended = masked_attention(q, k, v, mask)
        return self.out(merge_heads(attended))

    def project_kv(self, x_kv: Tensor) -> tuple[Tensor, Tensor]:
        """Key/value projections alone, for callers that cache them."""
        return split_heads(self.k(x_kv), self.heads), split_heads(self.v(x_kv), self.heads)

    def attend_with_kv(self, x_q: Tensor, k: Tensor, v: Tensor, mask: np.ndarray) -> Tensor:
        q = split_heads(self.q(x_q), self.heads)
        return self.out(merge_heads(masked_attention(q, k, v, mask)))


class Mlp(Module):
    def __init__(self, name: str, dim: int, hidden: int, rng: RngStream, dtype=np.float32):
        self.fc1 = Linear(f"{name}.fc1", dim, hidden, rng.child("fc1"), dtype)
        self.fc2 = Linear(f"{name}.fc2", hidden, dim, rng.child("fc2"), dtype)

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(gelu(self.fc1(x)))


class TransformerBlock(Module):
    """Pre-norm block: x + attn(ln(x)), then x + mlp(ln(x))."""

    def __init__(self, name: str, dim: int, heads: int, rng: RngStream, dtype=np.float32,
                 mlp_ratio: int = 4):
        self.ln1 = LayerNorm(f"{name}.ln1", dim, dtype)
        self.attn = MultiHeadAttention(f"{name}.attn", dim, heads, rng.child("attn"), dtype)
        self.ln2 = LayerNorm(f"{name}.ln2", dim, dtype)
        self.mlp = Mlp(f"{name}.mlp", dim, mlp_ratio * dim, rng.child("mlp"), dtype)

    def __call__(self, x: Tensor, mask: np.ndarray) -> Tensor:
        h = self.ln1(x)
        x = x + self.attn(h, h, mask)
        return x + self.mlp(self.ln2(x))
