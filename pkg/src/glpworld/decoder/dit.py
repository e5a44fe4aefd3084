"""Diffusion transformer over windows of latent frames.

Tokens are 2x2 patches of the 8x8 latent grid, so one latent frame is 16
tokens. Self-attention runs over the whole window under a chunk-causal
mask; each chunk separately cross-attends its own action embedding and,
when given, its own world-state tokens. The world-state stream's output
projection starts at zero, so a freshly initialized state stream adds
exactly nothing to the block output.

Timestep conditioning is per frame: every frame's noise level k feeds a
shared embedding whose per-block projection modulates the self-attention
and MLP sublayers (scale/shift/gate).
"""
from __future__ import annotations

import math

import numpy as np

from ..numerics import (
    Embedding,
    LayerNorm,
    Linear,
    Mlp,
    Module,
    MultiHeadAttention,
    Parameter,
    RngStream,
    Tensor,
    concat,
    masked_attention,
    merge_heads,
    split_heads,
    take,
)

# (frame count, action, state) per window segment, in window order
Segment = tuple[int, "Tensor | None", "Tensor | None"]


def chunk_causal_mask(chunk_len: int) -> np.ndarray:
    """(1+2C) x (1+2C) frame mask for the layout [cond | A | B].

    cond sees cond; A sees cond+A; B sees everything. Attention within a
    chunk is full; causality is chunk-granular.
    """
    return _mask_from_counts([1, chunk_len, chunk_len])


def _mask_from_counts(counts: list[int]) -> np.ndarray:
    seg = np.repeat(np.arange(len(counts)), counts)
    return seg[None, :] <= seg[:, None]


def timestep_features(ks: np.ndarray, dim: int) -> np.ndarray:
    """Sinusoidal features of noise levels k in [0, 1], shape (len(ks), dim)."""
    ks = np.atleast_1d(np.asarray(ks, np.float64))
    half = dim // 2
    freqs = np.exp(np.linspace(0.0, -math.log(10000.0), half))
    ang = 1000.0 * ks[:, None] * freqs[None, :]
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)


class CrossAttention(Module):
    """Queries from the token stream, keys/values from a conditioning sequence.

    All projections use standard init; biases start at zero, so an all-zero
    conditioning sequence contributes exactly zero (its values are all b_v = 0)
    while still passing gradient back to the conditioning inputs.
    """

    def __init__(self, name: str, dim: int, ctx_dim: int, heads: int, rng: RngStream,
                 dtype=np.float32):
        self.heads = heads
        self.q = Linear(f"{name}.q", dim, dim, rng.child("q"), dtype)
        self.k = Linear(f"{name}.k", ctx_dim, dim, rng.child("k"), dtype)
        self.v = Linear(f"{name}.v", ctx_dim, dim, rng.child("v"), dtype)
        self.out = Linear(f"{name}.out", dim, dim, rng.child("out"), dtype)

    def __call__(self, x: Tensor, ctx: Tensor) -> Tensor:
        q = split_heads(self.q(x), self.heads)
        k = split_heads(self.k(ctx), self.heads)
        v = split_heads(self.v(ctx), self.heads)
        return self.out(merge_heads(masked_attention(q, k, v, np.True_)))


class DiTBlock(Module):
    def __init__(self, name: str, dim: int, heads: int, ctx_dim: int, rng: RngStream,
                 dtype=np.float32):
        self.mod = Linear(f"{name}.mod", dim, 6 * dim, rng.child("mod"), dtype)
        self.ln_attn = LayerNorm(f"{name}.ln_attn", dim, dtype)
        self.attn = MultiHeadAttention(f"{name}.attn", dim, heads, rng.child("attn"), dtype)
        self.ln_cross = LayerNorm(f"{name}.ln_cross", dim, dtype)
        self.cross_text = CrossAttention(
            f"{name}.cross_text", dim, ctx_dim, heads, rng.child("cross_text"), dtype
        )
        self.cross_state = CrossAttention(
            f"{name}.cross_state", dim, ctx_dim, heads, rng.child("cross_state"), dtype
        )
        self.ln_mlp = LayerNorm(f"{name}.ln_mlp", dim, dtype)
        self.mlp = Mlp(f"{name}.mlp", dim, 4 * dim, rng.child("mlp"), dtype)

    def __call__(self, x, mods, row_segments, mask, kv_cache=None):
        """One block over token rows; returns (x, (k, v)) for cache reuse.

        mods: 6-tuple of per-token (n, dim) modulation tensors.
        row_segments: [(slice, action, state)] covering the rows of x.
        kv_cache: (k, v) from earlier window rows; prepended to this call's
        own keys/values so the rows of x may attend across them.
        """
        sa_shift, sa_scale, sa_gate, m_shift, m_scale, m_gate = mods
        h = self.ln_attn(x) * (1.0 + sa_scale) + sa_shift
        k_own, v_own = self.attn.project_kv(h)
        if kv_cache is None:
            k_all, v_all = k_own, v_own
        else:
            k_all = concat([kv_cache[0], k_own], axis=-2)
            v_all = concat([kv_cache[1], v_own], axis=-2)
        x = x + sa_gate * self.attn.attend_with_kv(h, k_all, v_all, mask)

        hc = self.ln_cross(x)
        parts = []
        for rows, action, state in row_segments:
            seg = take(hc, rows)
            y = self.cross_text(seg, action)
            if state is not None:
                y = y + self.cross_state(seg, state)
            parts.append(y)
        x = x + (parts[0] if len(parts) == 1 else concat(parts, axis=0))

        hm = self.ln_mlp(x) * (1.0 + m_scale) + m_shift
        x = x + m_gate * self.mlp(hm)
        return x, (k_all, v_all)


class DiT(Module):
    """Velocity field over a window of latent frames."""

    def __init__(self, name: str, rng: RngStream, grid: int = 8, channels: int = 48,
                 patch: int = 2, width: int = 96, heads: int = 4, blocks: int = 4,
                 ctx_dim: int = 64, max_frames: int = 64, dtype=np.float32):
        if grid % patch != 0:
            raise ValueError(f"latent grid {grid} not divisible by patch {patch}")
        self.grid = grid
        self.channels = channels
        self.patch = patch
        self.width = width
        self.tokens_per_frame = (grid // patch) ** 2
        self.token_dim = patch * patch * channels
        self.dtype = dtype

        self.embed = Linear(f"{name}.embed", self.token_dim, width, rng.child("embed"), dtype)
        self.frame_pos = Embedding(f"{name}.frame_pos", max_frames, width,
                                   rng.child("frame_pos"), dtype)
        self.space_pos = Embedding(f"{name}.space_pos", self.tokens_per_frame, width,
                                   rng.child("space_pos"), dtype)
        self.k_mlp = Mlp(f"{name}.k_mlp", width, width, rng.child("k_mlp"), dtype)
        self.null_action = Parameter(
            f"{name}.null_action",
            rng.child("null_action").normal((1, ctx_dim), dtype=np.float64)
            / math.sqrt(ctx_dim),
            dtype=dtype,
        )
        self.blocks = [
            DiTBlock(f"{name}.block{i}", width, heads, ctx_dim, rng.child(f"block{i}"), dtype)
            for i in range(blocks)
        ]
        self.out_norm = LayerNorm(f"{name}.out_norm", width, dtype)
        self.head = Linear(f"{name}.head", width, self.token_dim, rng.child("head"), dtype)
        self.skip = Linear(f"{name}.skip", self.token_dim, self.token_dim,
                           rng.child("skip"), dtype)
        self.skip_gate = Linear(f"{name}.skip_gate", width, 1, rng.child("skip_gate"),
                                dtype, zero_init=True)

    # ------------------------------------------------------------ plumbing

    def frame_tokens(self, latents: np.ndarray) -> np.ndarray:
        """(W, g, g, ch) -> (W*tpf, token_dim) numpy, patch-major per frame."""
        w, gh, gw, ch = latents.shape
        p = self.patch
        g = latents.reshape(w, gh // p, p, gw // p, p, ch).transpose(0, 1, 3, 2, 4, 5)
        return np.ascontiguousarray(g, dtype=self.dtype).reshape(-1, self.token_dim)

    def tokens_to_frames(self, tokens: np.ndarray) -> np.ndarray:
        """Inverse of frame_tokens: (W*tpf, token_dim) -> (W, g, g, ch)."""
        p, g = self.patch, self.grid
        side = g // p
        w = tokens.shape[0] // self.tokens_per_frame
        t = tokens.reshape(w, side, side, p, p, self.channels).transpose(0, 1, 3, 2, 4, 5)
        return np.ascontiguousarray(t).reshape(w, g, g, self.channels)

    def _k_embedding(self, ks: np.ndarray) -> Tensor:
        return self.k_mlp(Tensor(timestep_features(ks, self.width).astype(self.dtype)))

    @staticmethod
    def _expand_mods(kemb: Tensor, block: DiTBlock, frame_idx: np.ndarray):
        raw = block.mod(kemb).reshape(kemb.shape[0], 6, -1)
        return tuple(take(raw, (frame_idx, i)) for i in range(6))

    def _embed_tokens(self, latents: np.ndarray, frame_offset: int) -> Tensor:
        w = latents.shape[0]
        tpf = self.tokens_per_frame
        x = self.embed(Tensor(self.frame_tokens(latents)))
        x = x + self.frame_pos(np.repeat(np.arange(frame_offset, frame_offset + w), tpf))
        return x + self.space_pos(np.tile(np.arange(tpf), w))

    def _velocity_out(self, x: Tensor, latents: np.ndarray, kemb: Tensor,
                      frame_idx: np.ndarray) -> Tensor:
        """Output head plus a k-gated linear read of the raw input tokens.

        The flow target (x1 - xk)/(1 - k) is affine in the current sample
        itself; the gated skip carries that part at full token rank, which
        the width-compressed stream cannot. The gate starts at zero, so a
        fresh model's output is the plain head.
        """
        v = self.head(self.out_norm(x))
        gate = take(self.skip_gate(kemb), frame_idx)
        return v + gate * self.skip(Tensor(self.frame_tokens(latents)))

    def _row_segments(self, segments: list[Segment], offset: int = 0):
        rows, a = [], 0
        for count, action, state in segments:
            n = count * self.tokens_per_frame
            rows.append((slice(a, a + n), action if action is not None else self.null_action,
                         state))
            a += n
        return rows

    # ------------------------------------------------------------ forward

    def velocity_tokens(self, latents: np.ndarray, ks: np.ndarray,
                        segments: list[Segment]) -> Tensor:
        """Full-window forward: (W, g, g, ch) latents -> (W*tpf, token_dim).

        ks gives each frame's noise level; segments partition the window
        in order and carry each part's conditioning. The frame-level
        chunk-causal mask is expanded to token granularity.
        """
        counts = [c for c, _, _ in segments]
        w = sum(counts)
        tpf = self.tokens_per_frame
        mask = np.kron(_mask_from_counts(counts), np.ones((tpf, tpf), bool))
        x = self._embed_tokens(latents, 0)
        kemb = self._k_embedding(ks)
        frame_idx = np.repeat(np.arange(w), tpf)
        rows = self._row_segments(segments)
        for block in self.blocks:
            mods = self._expand_mods(kemb, block, frame_idx)
            x, _ = block(x, mods, rows, mask)
        return self._velocity_out(x, latents, kemb, frame_idx)

    def prefix_velocity_tokens(self, latents: np.ndarray, ks: np.ndarray,
                               segments: list[Segment]):
        """Forward over the window prefix [cond | A]; returns (v, kv per block).

        The cached keys/values cover every prefix row and let the suffix
        pass attend across them without recomputation.
        """
        counts = [c for c, _, _ in segments]
        w = sum(counts)
        tpf = self.tokens_per_frame
        mask = np.kron(_mask_from_counts(counts), np.ones((tpf, tpf), bool))
        x = self._embed_tokens(latents, 0)
        kemb = self._k_embedding(ks)
        frame_idx = np.repeat(np.arange(w), tpf)
        rows = self._row_segments(segments)
        kvs = []
        for block in self.blocks:
            mods = self._expand_mods(kemb, block, frame_idx)
            x, kv = block(x, mods, rows, mask)
            kvs.append((kv[0].detach(), kv[1].detach()))
        return self.head(self.out_norm(x)), kvs

    def suffix_velocity_tokens(self, latents: np.ndarray, ks: np.ndarray,
                               segment: Segment, kvs, frame_offset: int) -> Tensor:
        """Forward over the trailing chunk only, reusing cached prefix K/V.

        The suffix may attend everywhere (it is the last chunk), so no
        mask is needed beyond full visibility.
        """
        count, action, state = segment
        tpf = self.tokens_per_frame
        x = self._embed_tokens(latents, frame_offset)
        kemb = self._k_embedding(ks)
        frame_idx = np.repeat(np.arange(count), tpf)
        rows = self._row_segments([segment])
        for block, kv in zip(self.blocks, kvs):
            mods = self._expand_mods(kemb, block, frame_idx)
            x, _ = block(x, mods, rows, np.True_, kv_cache=kv)
        return self.head(self.out_norm(x))
