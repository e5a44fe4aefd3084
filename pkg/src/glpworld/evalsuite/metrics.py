"""Clip-level simulation metrics: smoothness and stepped consistency."""
from __future__ import annotations

import numpy as np

from ..optflow import DEFAULT_ALPHA, DEFAULT_ITERS, flow_derivatives

SIMILARITY_CLAMP = 0.5  # pixel error at or past this counts as fully wrong


def transition_smoothness(frames: np.ndarray, lam: float = 1.0,
                          alpha: float = DEFAULT_ALPHA, iters: int = DEFAULT_ITERS) -> float:
    """exp(-lam * mean flow acceleration); 1.0 for constant-velocity motion."""
    stats = flow_derivatives(np.asarray(frames), alpha=alpha, iters=iters)
    return float(np.exp(-lam * float(np.mean(stats["accelerations"]))))


def _step_similarity(pred: np.ndarray, truth: np.ndarray) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ValueError(f"step shape mismatch: {pred.shape} vs {truth.shape}")
    err = float(np.mean(np.abs(pred - truth)))
    return max(0.0, 1.0 - err / SIMILARITY_CLAMP)


def simulation_consistency(rollout_steps: list[np.ndarray],
                           truth_steps: list[np.ndarray]) -> float:
    """Linearly weighted per-step similarity; later steps carry more weight.

    With T steps, step t (1-based) has weight t / (1 + ... + T), so one
    fully-wrong step at t costs exactly t / sum(1..T) off a perfect score:
    drift late in a rollout is a worse failure than a wobble early on.
    """
    if len(rollout_steps) != len(truth_steps):
        raise ValueError(
            f"step count mismatch: {len(rollout_steps)} rollout vs {len(truth_steps)} truth"
        )
    if not rollout_steps:
        raise ValueError("need at least one step")
    t_total = len(rollout_steps)
    denom = t_total * (t_total + 1) / 2
    # sum integer-weighted terms before the one division: T fully-correct
    # steps less one wrong step then score exactly (denom - t) / denom
    score = 0.0
    for t, (pred, truth) in enumerate(zip(rollout_steps, truth_steps), start=1):
        score += t * _step_similarity(pred, truth)
    return float(score / denom)
