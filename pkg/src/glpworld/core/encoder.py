"""Vision encoder h: frames to a fixed grid of visual tokens.

4x4 patchify, learned linear embedding, and two self-attention blocks
whose attention carries a learnable 2D relative-position bias.  Relative
(rather than absolute) position information keeps the encoder
translation-equivariant: shifting the input by one patch permutes the
token grid, up to boundary effects.  Multi-frame observations are
encoded per frame and mean-pooled per grid position.
"""
from __future__ import annotations

import math

import numpy as np

from ..codec import PATCH
from ..numerics import (
    LayerNorm,
    Linear,
    Mlp,
    Module,
    Parameter,
    RngStream,
    Tensor,
    masked_softmax,
    matmul,
    merge_heads,
    split_heads,
    swapaxes,
    take,
)


def _patch_grid(frames: np.ndarray) -> np.ndarray:
    """(F, H, W, 3) -> (F, H/4 * W/4, 48) patch vectors in row-major grid order."""
    f, h, w, c = frames.shape
    g = frames.reshape(f, h // PATCH, PATCH, w // PATCH, PATCH, c)
    g = np.ascontiguousarray(g.transpose(0, 1, 3, 5, 2, 4))
    return g.reshape(f, (h // PATCH) * (w // PATCH), c * PATCH * PATCH)


def _relative_index(grid: int) -> np.ndarray:
    """(grid^2, grid^2) flat offset ids into a (2*grid-1)^2 bias table."""
    coords = np.stack(np.mgrid[0:grid, 0:grid], axis=-1).reshape(-1, 2)
    delta = coords[:, None, :] - coords[None, :, :] + (grid - 1)
    return delta[..., 0] * (2 * grid - 1) + delta[..., 1]


class RelPosAttention(Module):
    """Self-attention over one frame's token grid with relative-position bias."""

    def __init__(self, name: str, dim: int, heads: int, grid: int, rng: RngStream,
                 dtype=np.float32):
        self.heads = heads
        self.scale = 1.0 / math.sqrt(dim // heads)
        self.q = Linear(f"{name}.q", dim, dim, rng.child("q"), dtype)
        self.k = Linear(f"{name}.k", dim, dim, rng.child("k"), dtype)
        self.v = Linear(f"{name}.v", dim, dim, rng.child("v"), dtype)
        self.out = Linear(f"{name}.out", dim, dim, rng.child("out"), dtype)
        n_offsets = (2 * grid - 1) ** 2
        self.bias = Parameter(
            f"{name}.bias",
            (rng.child("bias").normal((n_offsets, heads)) * 0.02).astype(dtype),
        )
        self._rel_index = _relative_index(grid).reshape(-1)
        self._grid = grid

    def __call__(self, x: Tensor) -> Tensor:
        n = self._grid * self._grid
        q = split_heads(self.q(x), self.heads)
        k = split_heads(self.k(x), self.heads)
        v = split_heads(self.v(x), self.heads)
        logits = matmul(q, swapaxes(k, -1, -2)) * self.scale
        bias = take(self.bias, self._rel_index)  # (n*n, heads)
        bias = swapaxes(bias.reshape(n, n, self.heads), 0, 2)  # (heads, n, n) transposed pairs
        bias = swapaxes(bias, 1, 2)
        w = masked_softmax(logits + bias, np.True_)
        return self.out(merge_heads(matmul(w, v)))


class EncoderBlock(Module):
    def __init__(self, name: str, dim: int, heads: int, grid: int, rng: RngStream,
                 dtype=np.float32):
        self.ln1 = LayerNorm(f"{name}.ln1", dim, dtype)
        self.attn = RelPosAttention(f"{name}.attn", dim, heads, grid, rng.child("attn"), dtype)
        self.ln2 = LayerNorm(f"{name}.ln2", dim, dtype)
        self.mlp = Mlp(f"{name}.mlp", dim, 4 * dim, rng.child("mlp"), dtype)

    def __call__(self, x: Tensor) -> Tensor:
        x = x + self.attn(self.ln1(x))
        return x + self.mlp(self.ln2(x))


class ObservationEncoder(Module):
    """h: (H, W, 3) or (F, H, W, 3) float frames -> (grid^2, dim) visual tokens."""

    def __init__(self, name: str, rng: RngStream, dim: int = 64, heads: int = 4,
                 grid: int = 8, dtype=np.float32):
        self.grid = grid
        self.dim = dim
        self.embed = Linear(f"{name}.embed", 3 * PATCH * PATCH, dim, rng.child("embed"), dtype)
        self.blocks = [
            EncoderBlock(f"{name}.block{i}", dim, heads, grid, rng.child(f"block{i}"), dtype)
            for i in range(2)
        ]

    def frame_tokens(self, frames: np.ndarray) -> Tensor:
        """Per-frame token grids: (F, grid^2, dim)."""
        frames = np.asarray(frames, dtype=np.float32)
        if frames.ndim == 3:
            frames = frames[None]
        x = self.embed(Tensor(_patch_grid(frames)))
        for block in self.blocks:
            x = block(x)
        return x

    def __call__(self, frames: np.ndarray) -> Tensor:
        """Observation tokens: multi-frame input is mean-pooled per position."""
        tokens = self.frame_tokens(frames)
        if tokens.shape[0] == 1:
            return tokens.reshape(tokens.shape[1], tokens.shape[2])
        return tokens.mean(axis=0)
