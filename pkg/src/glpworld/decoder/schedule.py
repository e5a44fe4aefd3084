"""Flow-matching schedule: shifted timestep grid and linear interpolants.

Convention used everywhere in this package: k = 1 is clean data, k = 0 is
pure noise, and a sample at level k is x_k = k*x1 + (1-k)*x0. A step index
counts *remaining* denoising steps, so a chunk at step N is pure noise and
a chunk at step 0 is fully denoised.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..numerics import RngStream

# conditioning frames are re-noised at this mild level (5.5% noise)
COND_AUG_K = 0.945

# k values drawn for training pairs are snapped to this dyadic grid so that
# k + 0.5 and the later (k+0.5) - k are exact in float arithmetic
_K_QUANTUM = float(2.0**-20)


def shifted_timesteps(n: int, shift: float = 5.0) -> np.ndarray:
    """Descending k grid [k_n > ... > k_1] over u in (0, 1].

    Maps the uniform grid u = i/n through k = shift*u / (1 + (shift-1)*u),
    which compresses steps near the noise end as shift grows. shift=1 is
    the identity; u=1 maps to k=1 for every shift.
    """
    if n < 2:
        raise ValueError(f"need at least 2 timesteps, got {n}")
    if shift <= 0:
        raise ValueError(f"shift must be positive, got {shift}")
    u = np.arange(n, 0, -1, dtype=np.float64) / n
    # denominator written as shift*u + (1-u), not 1 + (shift-1)*u: identical
    # algebra, but this form keeps the u=1 endpoint exactly 1.0 at any shift
    return shift * u / (shift * u + (1.0 - u))


@dataclass(frozen=True)
class NoiseSchedule:
    """Training grid of K steps plus an inference grid of N steps."""

    K: int = 1000
    N: int = 50
    shift: float = 5.0
    training_grid: np.ndarray = field(init=False, repr=False, compare=False)
    inference_grid: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.N % 2 != 0:
            raise ValueError(f"inference steps must be even, got N={self.N}")
        object.__setattr__(self, "training_grid", shifted_timesteps(self.K, self.shift))
        object.__setattr__(self, "inference_grid", shifted_timesteps(self.N, self.shift))

    def k_of_step(self, step: int) -> float:
        """Noise level of a chunk with `step` denoising steps remaining."""
        if not 0 <= step <= self.N:
            raise ValueError(f"step {step} outside [0, {self.N}]")
        if step == self.N:
            return 0.0
        return float(self.inference_grid[step])


def flow_mix(x1: np.ndarray, x0: np.ndarray, k: float) -> np.ndarray:
    """x_k = k*x1 + (1-k)*x0; endpoints are bitwise exact."""
    if not 0.0 <= k <= 1.0:
        raise ValueError(f"k={k} outside [0, 1]")
    if k == 1.0:
        return np.array(x1, copy=True)
    if k == 0.0:
        return np.array(x0, copy=True)
    dt = np.result_type(x1, x0)
    return (dt.type(k) * x1 + dt.type(1.0 - k) * x0).astype(dt)


@dataclass(frozen=True)
class FlowSample:
    x1: np.ndarray
    x0: np.ndarray
    k: float
    xk: np.ndarray
    v: np.ndarray


def flow_sample(x1: np.ndarray, rng: RngStream, k: float) -> FlowSample:
    """Draw fresh unit noise and build the interpolant at level k."""
    x1 = np.asarray(x1)
    x0 = rng.normal(x1.shape, dtype=np.float64).astype(x1.dtype)
    return FlowSample(x1=x1, x0=x0, k=float(k), xk=flow_mix(x1, x0, k), v=x1 - x0)


def _noise_biased_index(rng: RngStream, n: int) -> int:
    """Index into a descending grid, quadratically biased toward the end."""
    u = float(rng.uniform())
    return n - 1 - int(u * u * n)


def training_k_pair(
    rng: RngStream, schedule: NoiseSchedule, first_chunk_mode: bool = False
) -> tuple[float, float | None]:
    """Noise-level pair for a two-chunk training window.

    Normal mode draws kA from the training-grid values at or below 0.5
    and returns (kA, kA + 0.5); the trainer gives the later chunk kA and
    the earlier chunk kA + 0.5, matching inference where the earlier
    chunk is always the cleaner one. First-chunk mode draws a single
    level from the full grid (the bootstrap chunk is denoised alone, so
    there is no pair).

    Both draws are biased toward the noisy end of the grid: velocities
    near pure noise are the ones that write scene content, and the
    shifted grid packs its points toward the clean end, so a uniform
    draw over grid points would starve exactly that regime.
    """
    grid = schedule.training_grid
    if first_chunk_mode:
        k = float(grid[_noise_biased_index(rng, len(grid))])
        return k, None
    low = grid[grid <= 0.5]
    if len(low) == 0:
        raise ValueError("schedule has no training values at or below 0.5")
    k = float(low[_noise_biased_index(rng, len(low))])
    k = round(k / _K_QUANTUM) * _K_QUANTUM
    return k, k + 0.5
