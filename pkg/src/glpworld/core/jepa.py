"""JEPA baseline objective and the latent-collapse measurements.

jepa_loss takes the encoder and predictor as callables so that the
degenerate solution (constant encoder, identity predictor) can be
constructed analytically: it reaches exactly zero loss while carrying
zero information, which is the failure mode a generative target rules
out.
"""
from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from ..numerics import Linear, Module, RngStream, Tensor, stack
from .backbone import WorldModelBackbone
from .context import build_context
from .encoder import ObservationEncoder
from .text import TextEmbedder


def jepa_loss(
    encode: Callable[[np.ndarray], Tensor],
    predict: Callable[[Tensor, str], Tensor],
    batch: Iterable[tuple[np.ndarray, str, np.ndarray]],
) -> Tensor:
    """Mean L2 between f(h(o_t), a_t) and h(o_{t+1}).

    Both encoder applications are live (no stop-gradient, no regularizer),
    so the objective can be driven to zero by collapsing h.
    """
    losses = []
    for obs, action, obs_next in batch:
        err = predict(encode(obs), action) - encode(obs_next)
        losses.append((err**2).mean())
    if not losses:
        raise ValueError("batch is empty")
    return stack(losses).mean()


def latent_variance(states: Iterable[np.ndarray]) -> float:
    """Mean per-dimension variance across the batch; 0 for a constant encoder."""
    arr = np.stack([s.data if isinstance(s, Tensor) else np.asarray(s) for s in states])
    return float(arr.astype(np.float64).var(axis=0).mean())


class JepaModel(Module):
    """Trainable JEPA baseline: encoder + backbone + token-expansion head.

    The backbone's Q query outputs are each expanded to expand_factor
    visual-token predictions so the prediction lives in the encoder's
    (grid^2, dim) output space.
    """

    def __init__(self, name: str, rng: RngStream, dim: int = 64, n_queries: int = 16,
                 grid: int = 8, dtype=np.float32):
        if (grid * grid) % n_queries:
            raise ValueError("grid^2 must be a multiple of n_queries")
        self.expand_factor = (grid * grid) // n_queries
        self.encoder = ObservationEncoder(f"{name}.encoder", rng.child("encoder"), dim,
                                          grid=grid, dtype=dtype)
        self.text = TextEmbedder(f"{name}.text", rng.child("text"), dim, dtype=dtype)
        self.backbone = WorldModelBackbone(f"{name}.backbone", rng.child("backbone"), dim,
                                           n_queries=n_queries, dtype=dtype)
        self.expand = Linear(f"{name}.expand", dim, self.expand_factor * dim,
                             rng.child("expand"), dtype)
        self.dim = dim

    def predict(self, state_tokens: Tensor, action: str) -> Tensor:
        ctx = build_context([(state_tokens, self.text(action))])
        queries = self.backbone.predict_next_state(ctx)  # (Q, dim)
        expanded = self.expand(queries)  # (Q, expand_factor * dim)
        return expanded.reshape(queries.shape[0] * self.expand_factor, self.dim)

    def loss(self, batch: Iterable[tuple[np.ndarray, str, np.ndarray]]) -> Tensor:
        return jepa_loss(self.encoder, self.predict, batch)
