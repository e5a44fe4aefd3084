"""Causal Swin-DPM: sliding two-chunk denoising window.

The window holds one noise-augmented conditioning frame plus two chunks
of C latent frames at noise levels half a schedule apart. Each round
performs one Euler step of the rectified-flow ODE for both chunks; when
the earlier chunk reaches step 0 it is dequeued, the later chunk slides
into its slot, and a fresh pure-noise chunk is enqueued. A chunk
therefore spends N/2 rounds in each slot, denoising over the full
schedule, and the later chunk may attend the earlier one but never the
reverse.

The velocity model is injected, so the bookkeeping here can be driven by
a stub in scheduler tests; `DitVelocityModel` adapts a DiT, routing the
two-pass cached forward and the classifier-free-guidance branches.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from ..numerics import RngStream, Tensor
from .dit import DiT, Segment
from .schedule import COND_AUG_K, NoiseSchedule, flow_mix


class SwinStateError(RuntimeError):
    pass


@dataclass
class SwinWindow:
    cond_frame: np.ndarray
    chunkA: np.ndarray
    chunkB: np.ndarray
    stepA: int
    stepB: int
    n_steps: int
    actionA: Tensor | None = None
    actionB: Tensor | None = None
    stateA: Tensor | None = None
    stateB: Tensor | None = None
    cond_k: float = COND_AUG_K
    cache: dict = field(default_factory=dict)
    rounds_in_slot_a: int = 0
    uid_a: int = 0
    uid_b: int = 1
    next_uid: int = 2

    @property
    def chunk_len(self) -> int:
        return len(self.chunkA)

    @property
    def window_len(self) -> int:
        return 1 + len(self.chunkA) + len(self.chunkB)

    def check_invariants(self) -> None:
        if self.stepB - self.stepA != self.n_steps // 2:
            raise SwinStateError(
                f"step offset {self.stepB - self.stepA} != N/2 = {self.n_steps // 2}"
            )
        if len(self.chunkA) != len(self.chunkB):
            raise SwinStateError("chunk lengths differ")
        if self.window_len != 1 + 2 * len(self.chunkA):
            raise SwinStateError("window arity broken")


class VelocityModel(Protocol):
    def window_velocities(self, window: SwinWindow, kA: float, kB: float,
                          uncond: bool) -> tuple[np.ndarray, np.ndarray]: ...

    def solo_velocity(self, cond: np.ndarray, cond_k: float, chunk: np.ndarray,
                      k: float, action: Tensor | None, state: Tensor | None,
                      uncond: bool) -> np.ndarray: ...


class DitVelocityModel:
    """Drives a DiT over window states, caching prefix K/V per step.

    The forward is split into a [cond | A] prefix pass and a B-only
    suffix pass; the prefix keys/values land in window.cache keyed by the
    step index and guidance branch, and the suffix pass attends across
    them, so the shared rows are computed once per round per branch.
    """

    def __init__(self, dit: DiT, incremental: bool = True):
        self.dit = dit
        self.incremental = incremental

    def _branch(self, action, state, uncond: bool):
        # unconditional branch drops the action (null embedding) but keeps
        # any world-state conditioning: guidance steers on the action text
        return (None if uncond else action), state

    def window_velocities(self, window, kA, kB, uncond):
        c = window.chunk_len
        ks_prefix = np.concatenate([[window.cond_k], np.full(c, kA)])
        ks_suffix = np.full(c, kB)
        actA, stA = self._branch(window.actionA, window.stateA, uncond)
        actB, stB = self._branch(window.actionB, window.stateB, uncond)
        prefix_latents = np.concatenate([window.cond_frame[None], window.chunkA])
        prefix_segs: list[Segment] = [(1, None, None), (c, actA, stA)]
        if not self.incremental:
            latents = np.concatenate([prefix_latents, window.chunkB])
            ks = np.concatenate([ks_prefix, ks_suffix])
            v = self.dit.velocity_tokens(latents, ks, prefix_segs + [(c, actB, stB)])
            frames = self.dit.tokens_to_frames(v.data)
            return frames[1 : 1 + c], frames[1 + c :]
        v_pre, kvs = self.dit.prefix_velocity_tokens(prefix_latents, ks_prefix, prefix_segs)
        window.cache[(window.stepA, uncond)] = kvs
        v_suf = self.dit.suffix_velocity_tokens(
            window.chunkB, ks_suffix, (c, actB, stB),
            window.cache[(window.stepA, uncond)], frame_offset=1 + c,
        )
        return (self.dit.tokens_to_frames(v_pre.data)[1:],
                self.dit.tokens_to_frames(v_suf.data))

    def solo_velocity(self, cond, cond_k, chunk, k, action, state, uncond):
        act, st = self._branch(action, state, uncond)
        latents = np.concatenate([cond[None], chunk])
        ks = np.concatenate([[cond_k], np.full(len(chunk), k)])
        segs: list[Segment] = [(1, None, None), (len(chunk), act, st)]
        v, _ = self.dit.prefix_velocity_tokens(latents, ks, segs)
        return self.dit.tokens_to_frames(v.data)[1:]


def _guided(cond_branch, uncond_branch, cfg_scale: float):
    """CFG blend; scales 1 and 0 short-circuit to a single exact branch."""
    if cfg_scale == 1.0:
        return cond_branch()
    if cfg_scale == 0.0:
        return uncond_branch()
    c, u = cond_branch(), uncond_branch()
    if isinstance(c, tuple):
        return tuple(ui + cfg_scale * (ci - ui) for ci, ui in zip(c, u))
    return u + cfg_scale * (c - u)


def swin_denoise_round(window: SwinWindow, model: VelocityModel,
                       schedule: NoiseSchedule, cfg_scale: float = 4.0) -> SwinWindow:
    """One Euler step for both chunks at their own noise levels.

    The conditioning frame is never updated. Raises once chunkA reaches
    step 0; the caller must advance the window first.
    """
    if window.stepA == 0:
        raise SwinStateError("round complete; advance required")
    kA = schedule.k_of_step(window.stepA)
    kB = schedule.k_of_step(window.stepB)
    vA, vB = _guided(
        lambda: model.window_velocities(window, kA, kB, uncond=False),
        lambda: model.window_velocities(window, kA, kB, uncond=True),
        cfg_scale,
    )
    dA = schedule.k_of_step(window.stepA - 1) - kA
    dB = schedule.k_of_step(window.stepB - 1) - kB
    window.chunkA = window.chunkA + dA * vA
    window.chunkB = window.chunkB + dB * vB
    window.stepA -= 1
    window.stepB -= 1
    window.rounds_in_slot_a += 1
    window.check_invariants()
    return window


def advance_window(window: SwinWindow, rng: RngStream,
                   cond_transform=None) -> tuple[np.ndarray, SwinWindow]:
    """Dequeue the finished chunk and slide the window forward one chunk.

    The dequeued chunk's last latent frame, re-noised at the fixed mild
    level, becomes the new conditioning frame; the later chunk keeps its
    step index N/2 as it moves into the A slot; a fresh pure-noise chunk
    enters at step N with no action attached yet.

    cond_transform, when given, projects the last latent onto the data
    manifold (e.g. the pixel codec's value range) before re-noising; at
    training time conditioning frames come from real data, so rollouts
    condition closer to that distribution. The dequeued chunk itself is
    returned untouched.
    """
    if window.stepA != 0:
        raise SwinStateError(f"cannot advance at stepA={window.stepA}; chunk not finished")
    finished = window.chunkA
    cond_clean = finished[-1] if cond_transform is None else cond_transform(finished[-1])
    noise = rng.normal(cond_clean.shape, dtype=np.float64).astype(finished.dtype)
    window.cond_frame = flow_mix(cond_clean, noise, COND_AUG_K)
    window.cond_k = COND_AUG_K
    window.chunkA = window.chunkB
    window.actionA = window.actionB
    window.stateA = window.stateB
    window.stepA = window.stepB
    window.uid_a = window.uid_b
    window.chunkB = rng.normal(finished.shape, dtype=np.float64).astype(finished.dtype)
    window.stepB = window.n_steps
    window.actionB = None
    window.stateB = None
    window.uid_b = window.next_uid
    window.next_uid += 1
    window.cache = {}
    window.rounds_in_slot_a = 0
    window.check_invariants()
    return finished, window


def generate_first_chunk(
    initial_latent: np.ndarray,
    action: Tensor | None,
    model: VelocityModel,
    schedule: NoiseSchedule,
    rng: RngStream,
    chunk_len: int = 10,
    cfg_scale: float = 4.0,
    state: Tensor | None = None,
    cond_transform=None,
) -> tuple[np.ndarray, SwinWindow]:
    """Bootstrap: denoise the first chunk over the full schedule.

    The chunk runs its first N/2 steps alone (no earlier chunk exists to
    share the window with), conditioned on the noise-augmented initial
    frame; the second chunk then enters at step N and the steady
    two-chunk loop carries both to the first dequeue. Returns the
    finished chunk and the live window, ready for the next action.
    cond_transform is handed to advance_window.
    """
    n = schedule.N
    dtype = np.asarray(initial_latent).dtype
    cond_noise = rng.normal(initial_latent.shape, dtype=np.float64).astype(dtype)
    cond = flow_mix(initial_latent, cond_noise, COND_AUG_K)
    chunk = rng.normal((chunk_len, *initial_latent.shape), dtype=np.float64).astype(dtype)
    for step in range(n, n // 2, -1):
        k = schedule.k_of_step(step)
        v = _guided(
            lambda: model.solo_velocity(cond, COND_AUG_K, chunk, k, action, state, False),
            lambda: model.solo_velocity(cond, COND_AUG_K, chunk, k, action, state, True),
            cfg_scale,
        )
        chunk = chunk + (schedule.k_of_step(step - 1) - k) * v
    window = SwinWindow(
        cond_frame=cond,
        chunkA=chunk,
        chunkB=rng.normal(chunk.shape, dtype=np.float64).astype(dtype),
        stepA=n // 2,
        stepB=n,
        n_steps=n,
        actionA=action,
        stateA=state,
    )
    window.check_invariants()
    for _ in range(n // 2):
        swin_denoise_round(window, model, schedule, cfg_scale)
    return advance_window(window, rng, cond_transform)
