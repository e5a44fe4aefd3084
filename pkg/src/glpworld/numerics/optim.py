"""AdamW with global-norm clipping and a warmup-then-cosine schedule."""
from __future__ import annotations

import math

import numpy as np

from .tensor import NumericsError, Parameter


def global_norm(grads: dict[str, np.ndarray]) -> float:
    total = 0.0
    for g in grads.values():
        total += float(np.sum(g.astype(np.float64) ** 2))
    return math.sqrt(total)


def clip_by_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> tuple[dict[str, np.ndarray], float]:
    """Scale all gradients by a shared factor so their joint norm is at most max_norm.

    Returns the (possibly rescaled) gradients and the pre-clip norm.
    """
    norm = global_norm(grads)
    if norm <= max_norm or norm == 0.0:
        return grads, norm
    scale = max_norm / norm
    return {k: g * scale for k, g in grads.items()}, norm


def lr_at(step: int, total_steps: int, base_lr: float, warmup_frac: float = 0.05) -> float:
    """Linear warmup from 0 over the first warmup_frac of steps, then cosine decay to 0.

    step counts completed steps, so step 0 uses lr 0 and step == total_steps
    would use exactly 0 again.
    """
    if total_steps <= 0:
        return base_lr
    warmup = max(1, round(warmup_frac * total_steps))
    if step < warmup:
        return base_lr * step / warmup
    progress = (step - warmup) / max(1, total_steps - warmup)
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * min(1.0, progress)))


class AdamW:
    """Adam with decoupled weight decay, applied in place to parameter data.

    The caller supplies the learning rate per step (see lr_at), which keeps
    the schedule a pure function of the step index for exact resume.
    """

    def __init__(
        self,
        params: dict[str, Parameter],
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ):
        self.params = dict(params)
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def step(self, grads: dict[str, np.ndarray], lr: float) -> None:
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise NumericsError(f"non-finite gradient for {name!r}; no parameters were updated")
        b1, b2 = self.betas
        self.t += 1
        bc1 = 1.0 - b1**self.t
        bc2 = 1.0 - b2**self.t
        for name, p in self.params.items():
            g = grads.get(name)
            if g is None:
                continue
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            if self.weight_decay:
                update = update + self.weight_decay * p.data
            p.data -= (lr * update).astype(p.data.dtype)

    def state_dict(self) -> dict:
        return {
            "t": self.t,
            "betas": list(self.betas),
            "eps": self.eps,
            "weight_decay": self.weight_decay,
            "m": {k: v.copy() for k, v in self.m.items()},
            "v": {k: v.copy() for k, v in self.v.items()},
        }

    def load_state_dict(self, state: dict) -> None:
        self.t = int(state["t"])
        self.betas = tuple(state["betas"])
        self.eps = float(state["eps"])
        self.weight_decay = float(state["weight_decay"])
        names = set(self.params)
        if set(state["m"]) != names or set(state["v"]) != names:
            raise NumericsError("optimizer state does not match parameter set")
        self.m = {k: np.asarray(v).copy() for k, v in state["m"].items()}
        self.v = {k: np.asarray(v).copy() for k, v in state["v"].items()}
