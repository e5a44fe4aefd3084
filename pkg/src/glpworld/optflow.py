"""Dense variational optical flow (Horn-Schunck) and flow statistics.

Single-scale Jacobi iteration; adequate for the small sub-2-px/frame
motions this repo generates, and simple enough to verify against
synthetic shifts. Large motions are out of warranty.
"""
from __future__ import annotations

import numpy as np

DEFAULT_ALPHA = 1.0
DEFAULT_ITERS = 100

_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)


def to_luma(frame: np.ndarray) -> np.ndarray:
    """RGB (H, W, 3) -> luma (H, W) on the 0..255 scale alpha=1 expects.

    Float RGB is taken as [0, 1] and scaled up; uint8 RGB is already
    0..255. Grayscale input passes through on the caller's scale.
    """
    if frame.ndim == 2:
        return frame.astype(np.float32)
    luma = frame.astype(np.float32) @ _LUMA
    if frame.dtype != np.uint8:
        luma = luma * np.float32(255.0)
    return luma


def _dx(f: np.ndarray) -> np.ndarray:
    # forward difference with edge replication (zero at the last column)
    out = np.zeros_like(f)
    out[:, :-1] = f[:, 1:] - f[:, :-1]
    return out


def _dy(f: np.ndarray) -> np.ndarray:
    out = np.zeros_like(f)
    out[:-1, :] = f[1:, :] - f[:-1, :]
    return out


def _neighbor_avg(f: np.ndarray) -> np.ndarray:
    """4-neighbor mean with edge replication."""
    up = np.vstack([f[:1], f[:-1]])
    down = np.vstack([f[1:], f[-1:]])
    left = np.hstack([f[:, :1], f[:, :-1]])
    right = np.hstack([f[:, 1:], f[:, -1:]])
    return (up + down + left + right) * np.float32(0.25)


def horn_schunck(
    f1: np.ndarray,
    f2: np.ndarray,
    alpha: float = DEFAULT_ALPHA,
    iters: int = DEFAULT_ITERS,
) -> tuple[np.ndarray, np.ndarray]:
    """Flow (u, v) in pixels/frame from f1 to f2; u is +x (columns), v is +y.

    Derivatives are averaged over the frame pair; the smoothness term uses
    the 4-neighbor average; iteration starts from zero flow and runs
    exactly `iters` Jacobi updates, so identical frames return exact zeros.
    """
    f1 = to_luma(f1)
    f2 = to_luma(f2)
    if f1.shape != f2.shape:
        raise ValueError(f"frame shape mismatch: {f1.shape} vs {f2.shape}")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    fx = (_dx(f1) + _dx(f2)) * np.float32(0.5)
    fy = (_dy(f1) + _dy(f2)) * np.float32(0.5)
    ft = f2 - f1
    u = np.zeros_like(f1)
    v = np.zeros_like(f1)
    denom = np.float32(alpha**2) + fx * fx + fy * fy
    for _ in range(iters):
        u_avg = _neighbor_avg(u)
        v_avg = _neighbor_avg(v)
        shared = (fx * u_avg + fy * v_avg + ft) / denom
        u = u_avg - fx * shared
        v = v_avg - fy * shared
    return u, v


def flow_derivatives(
    frames: np.ndarray, alpha: float = DEFAULT_ALPHA, iters: int = DEFAULT_ITERS
) -> dict[str, np.ndarray]:
    """Per-step mean speed and mean acceleration magnitude over a clip.

    speeds[t] = mean |flow(f_t -> f_t+1)|; accelerations[t] = mean
    |flow_t+1 - flow_t| per pixel, without warping. Needs >= 3 frames.
    """
    n = len(frames)
    if n < 3:
        raise ValueError(f"need at least 3 frames, got {n}")
    flows = [horn_schunck(frames[t], frames[t + 1], alpha, iters) for t in range(n - 1)]
    speeds = np.array(
        [float(np.mean(np.hypot(u, v))) for u, v in flows], dtype=np.float64
    )
    accels = np.array(
        [
            float(np.mean(np.hypot(u2 - u1, v2 - v1)))
            for (u1, v1), (u2, v2) in zip(flows, flows[1:])
        ],
        dtype=np.float64,
    )
    return {"speeds": speeds, "accelerations": accels}
