"""Labeled synthetic clips exercising every filter rule.

Six classes, five variants each: static, flicker, fade, pan, zoom, good.
Textures are triangle waves (piecewise linear, no binary edges), so dense
flow tracks the constructed motion accurately and each class trips exactly
the rule it is named for.  Every clip is (24, 32, 32, 3) float32 at 12 fps.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CORPUS_FPS = 12.0
_T, _H, _W = 24, 32, 32


@dataclass
class CorpusClip:
    clip_id: str
    frames: np.ndarray
    label_pass: bool
    expected_reason: str | None


def _tri(z: np.ndarray, period: float) -> np.ndarray:
    u = z / period - np.floor(z / period + 0.5)
    return 2.0 * np.abs(u)


def _gray(vals: np.ndarray) -> np.ndarray:
    g = np.clip(vals, 0.0, 255.0).astype(np.float32) / np.float32(255.0)
    return np.repeat(g[..., None], 3, axis=-1)


def _stripe_clip(
    speed_top: float,
    speed_bottom: float,
    boundary: int,
    period: float,
    phase: float,
    base: float = 40.0,
    amp: float = 170.0,
) -> np.ndarray:
    x = np.arange(_W, dtype=np.float64)[None, None, :]
    y = np.arange(_H)[None, :, None]
    t = np.arange(_T, dtype=np.float64)[:, None, None]
    top = base + amp * _tri(x - speed_top * t + phase, period)
    bottom = base + amp * _tri(x - speed_bottom * t + phase * 0.5, period)
    return _gray(np.where(y < boundary, top, bottom))


def _flicker_clip(period: float, phase: float) -> np.ndarray:
    x = np.arange(_W, dtype=np.float64)[None, None, :]
    parity = (np.arange(_T) % 2)[:, None, None].astype(np.float64)
    vals = 12.0 + 230.0 * _tri(x + phase + parity * (period / 2.0), period)
    return _gray(np.broadcast_to(vals, (_T, _H, _W)))


def _fade_clip(fade_in: bool, period: float, phase: float) -> np.ndarray:
    x = np.arange(_W, dtype=np.float64)[None, None, :]
    texture = np.broadcast_to(40.0 + 170.0 * _tri(x + phase, period), (_T, _H, _W))
    env = np.linspace(0.0, 1.0, _T) if fade_in else np.linspace(1.0, 0.0, _T)
    return _gray(texture * env[:, None, None])


def _zoom_clip(scale: float, period: float, phase: float) -> np.ndarray:
    """Radial expansion for scale > 1; contraction is the reversed expansion.

    Building zoom-out as time-reversed zoom-in keeps the spatial frequency
    bounded; sampling r / s**t with s < 1 would compress the texture into
    hard edges by the last frame.
    """
    s = scale if scale > 1.0 else 1.0 / scale
    yy, xx = np.mgrid[0:_H, 0:_W].astype(np.float64)
    r = np.hypot(xx - (_W - 1) / 2.0, yy - (_H - 1) / 2.0)
    vals = np.stack([40.0 + 170.0 * _tri(r / (s**t) + phase, period) for t in range(_T)])
    if scale < 1.0:
        vals = vals[::-1]
    return _gray(vals)


def build_corpus() -> list[CorpusClip]:
    clips: list[CorpusClip] = []
    for i in range(5):
        clips.append(
            CorpusClip(
                f"static_{i}",
                _stripe_clip(0.0, 0.0, boundary=12 + 2 * i, period=20 + 2 * (i % 3), phase=3.0 * i),
                False,
                "extremely static",
            )
        )
    for i in range(5):
        clips.append(
            CorpusClip(
                f"flicker_{i}",
                _flicker_clip(period=20 + 2 * (i % 3), phase=5.0 * i),
                False,
                "overly dynamic",
            )
        )
    for i, fade_in in enumerate([False, False, False, True, True]):
        clips.append(
            CorpusClip(
                f"fade_{i}",
                _fade_clip(fade_in, period=20 + 2 * (i % 3), phase=4.0 * i),
                False,
                "pure color head" if fade_in else "pure color tail",
            )
        )
    for i, speed in enumerate([2.4, -2.6, 2.8, -3.0, 3.2]):
        clips.append(
            CorpusClip(
                f"pan_{i}",
                _stripe_clip(speed, speed, boundary=16, period=22 + 2 * (i % 2), phase=2.0 * i),
                False,
                "camera pan",
            )
        )
    for i, scale in enumerate([1.05, 1.06, 1.07, 0.94, 0.95]):
        clips.append(
            CorpusClip(
                f"zoom_{i}",
                _zoom_clip(scale, period=24 + 2 * (i % 2), phase=3.0 * i),
                False,
                "camera zoom",
            )
        )
    good = [(2.8, -3.0, 14), (3.0, -3.0, 16), (3.2, -2.8, 16), (2.9, -3.3, 18), (3.4, -3.0, 16)]
    for i, (up, down, boundary) in enumerate(good):
        clips.append(
            CorpusClip(
                f"good_{i}",
                _stripe_clip(up, down, boundary=boundary, period=24, phase=1.5 * i),
                True,
                None,
            )
        )
    return clips
