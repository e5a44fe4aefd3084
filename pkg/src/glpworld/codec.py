"""Causal temporal codec: 1+T pixel frames to 1+T/4 latent frames.

A fixed (untrained) stand-in for a learned video VAE that keeps the
properties downstream code relies on: 4x temporal compression, causal
dependence on the frame-stream prefix, and sensitivity to how much true
context precedes a clip. Latent frame 0 is the patchified first frame;
latent frame i >= 1 patchifies an exponential moving average (decay
BETA) whose state has accumulated over every frame seen so far, sampled
at frame 4i.

Patchify is a pure reshape of a 32x32x3 frame into an 8x8 grid of
48-channel vectors (4x4 spatial patch x 3 color planes, 16 values per
plane), so it is exactly invertible; all loss of information lives in
the temporal EMA.
"""
from __future__ import annotations

import numpy as np

from .numerics import RngStream

BETA = 0.6  # EMA decay; 122 frames of context decay to ~2e-28, far below float32 eps
TEMPORAL_RATE = 4
PATCH = 4
MAX_PAD = 122


class TemporalArityError(ValueError):
    pass


def patchify(frame: np.ndarray) -> np.ndarray:
    """(H, W, 3) -> (H/4, W/4, 48); bit-exact inverse exists."""
    h, w, c = frame.shape
    if h % PATCH or w % PATCH:
        raise ValueError(f"frame dims {h}x{w} not divisible by patch {PATCH}")
    g = frame.reshape(h // PATCH, PATCH, w // PATCH, PATCH, c)
    return np.ascontiguousarray(g.transpose(0, 2, 4, 1, 3)).reshape(
        h // PATCH, w // PATCH, c * PATCH * PATCH
    )


def unpatchify(latent: np.ndarray) -> np.ndarray:
    """(H/4, W/4, 48) -> (H, W, 3); exact inverse of patchify."""
    gh, gw, d = latent.shape
    c = d // (PATCH * PATCH)
    g = latent.reshape(gh, gw, c, PATCH, PATCH).transpose(0, 3, 1, 4, 2)
    return np.ascontiguousarray(g).reshape(gh * PATCH, gw * PATCH, c)


def _ema_step(ema: np.ndarray, frame: np.ndarray) -> np.ndarray:
    # incremental form: a constant stream is a bitwise fixed point
    return ema + np.float32(1.0 - BETA) * (frame - ema)


def encode_causal(frames: np.ndarray) -> np.ndarray:
    """(1+T, H, W, 3) -> (1+T/4, H/4, W/4, 48), causal in time.

    T may be 0. The EMA state starts at frame 0 and never resets, so a
    latent frame depends on the entire prefix up to its source frames.
    """
    n = len(frames)
    if n < 1:
        raise TemporalArityError("need at least one frame")
    t = n - 1
    if t % TEMPORAL_RATE != 0:
        raise TemporalArityError(f"temporal arity: T={t} not divisible by {TEMPORAL_RATE}")
    frames = np.asarray(frames, dtype=np.float32)
    latents = [patchify(frames[0])]
    ema = frames[0].copy()
    for j in range(1, n):
        ema = _ema_step(ema, frames[j])
        if j % TEMPORAL_RATE == 0:
            latents.append(patchify(ema))
    return np.stack(latents, axis=0)


def encode_with_context(clip: np.ndarray, context: np.ndarray | None) -> np.ndarray:
    """Encode a (1+T)-frame clip whose EMA state was warmed on `context`.

    With p = len(context) > 0, latent i equals the EMA state at stream
    position p + 4i of context+clip — exactly what a full-stream encode
    would hold at those positions. With no context this reduces to
    encode_causal (latent 0 is the raw patchified first frame).
    """
    if context is None or len(context) == 0:
        return encode_causal(clip)
    t = len(clip) - 1
    if t % TEMPORAL_RATE != 0:
        raise TemporalArityError(f"temporal arity: T={t} not divisible by {TEMPORAL_RATE}")
    stream = np.concatenate(
        [np.asarray(context, dtype=np.float32), np.asarray(clip, dtype=np.float32)], axis=0
    )
    p = len(context)
    ema = stream[0].copy()
    latents = []
    for j in range(1, len(stream)):
        ema = _ema_step(ema, stream[j])
        if j >= p and (j - p) % TEMPORAL_RATE == 0:
            latents.append(patchify(ema))
    return np.stack(latents, axis=0)


def pad_then_encode(
    clip: np.ndarray, preceding: np.ndarray | None, rng: RngStream
) -> tuple[np.ndarray, int]:
    """Encode a clip after warming the EMA on 0..122 true preceding frames.

    Draws the pad length uniformly in [0, MAX_PAD]; if fewer preceding
    frames exist, uses all of them. Returns (latents, actual pad used).
    """
    p = int(rng.integers(0, MAX_PAD + 1))
    avail = 0 if preceding is None else len(preceding)
    p = min(p, avail)
    context = None if p == 0 else preceding[avail - p :]
    return encode_with_context(clip, context), p


def decode_latents(latents: np.ndarray) -> np.ndarray:
    """(1+L, H/4, W/4, 48) -> (1+4L, H, W, 3) via nearest-frame upsampling.

    Exact inverse of encode_causal on videos that are constant in time.
    """
    frames = [unpatchify(latents[0])]
    for i in range(1, len(latents)):
        frames.extend([unpatchify(latents[i])] * TEMPORAL_RATE)
    return np.stack(frames, axis=0)
