"""Closed-loop world simulation sessions.

After the bootstrap step, nothing observed re-enters the loop: the
context is built from predicted states and re-encoded generated frames
only. Each step appends one conversation round, predicts the next world
state, attaches it with the action to the chunk waiting in the window's
front slot, denoises the remaining rounds, and decodes the dequeued
chunk to pixels.

Per-round state blocks: round 1 carries h(o_1); every later round k
carries the enhanced state, the round's predicted state concatenated
with the re-encoding of the frames the prediction produced. The two
parts live on the token axis (more tokens, same width), so the backbone
consumes them like any other state block.
"""
from __future__ import annotations

import uuid
from dataclasses import dataclass, field

import numpy as np

from .codec import decode_latents, patchify
from .core import build_context
from .decoder import (
    DitVelocityModel,
    SwinWindow,
    advance_window,
    generate_first_chunk,
    swin_denoise_round,
)
from .numerics import NumericsError, RngStream, Tensor, concat
from .training import ModelBundle

HISTORY_ROUNDS = 10


class RolloutError(RuntimeError):
    pass


@dataclass
class HistoryEntry:
    step: int                 # 0 for the initial observation
    action: str | None        # None on the initial entry
    frames: np.ndarray        # (F, H, W, 3); (1, H, W, 3) for the initial
    state_norms: list[float]  # per-token L2 of the predicted state (empty at step 0)


def _to_pixel_range(latents: np.ndarray) -> np.ndarray:
    """Project generated latents onto the pixel codec's value range.

    Training conditions and observations are patchified real frames, so
    everything re-entering the loop (conditioning frames, decoded
    observations) is clamped back onto that manifold.
    """
    return np.clip(latents, 0.0, 1.0)


def _tensor_copy(x: Tensor | None) -> Tensor | None:
    return None if x is None else Tensor(x.data.copy())


def _copy_window(w: SwinWindow) -> SwinWindow:
    return SwinWindow(
        cond_frame=w.cond_frame.copy(),
        chunkA=w.chunkA.copy(),
        chunkB=w.chunkB.copy(),
        stepA=w.stepA,
        stepB=w.stepB,
        n_steps=w.n_steps,
        actionA=_tensor_copy(w.actionA),
        actionB=_tensor_copy(w.actionB),
        stateA=_tensor_copy(w.stateA),
        stateB=_tensor_copy(w.stateB),
        cond_k=w.cond_k,
        rounds_in_slot_a=w.rounds_in_slot_a,
        uid_a=w.uid_a,
        uid_b=w.uid_b,
        next_uid=w.next_uid,
    )


@dataclass
class Session:
    bundle: ModelBundle
    initial_frame: np.ndarray
    rng: RngStream
    cfg_scale: float = 4.0
    id: str = field(default_factory=lambda: uuid.uuid4().hex[:12])
    parent_id: str | None = None

    def __post_init__(self):
        self.initial_frame = np.asarray(self.initial_frame, dtype=np.float32)
        self.model = DitVelocityModel(self.bundle.dit)
        self.window: SwinWindow | None = None
        self.rounds: list[tuple[Tensor, Tensor]] = []
        self.pending_state: Tensor | None = None  # s-hat for the upcoming round
        self.last_frames: np.ndarray | None = None
        self.last_latent = patchify(self.initial_frame)  # decode prefix
        self.step_count = 0
        self.fork_count = 0
        self.history: list[HistoryEntry] = [
            HistoryEntry(0, None, self.initial_frame[None].copy(), [])
        ]

    # ----------------------------------------------------------------- steps

    def _round_state(self) -> Tensor:
        if self.step_count == 0:
            return self.bundle.encoder(self.initial_frame).detach()
        obs = self.bundle.encoder(self.last_frames).detach()
        return concat([self.pending_state, obs], axis=0)

    def step(self, action: str) -> tuple[Tensor, np.ndarray]:
        """Advance one action; returns (predicted state, decoded frames)."""
        t = self.step_count + 1
        emb = self.bundle.text(action).detach()
        self.rounds.append((self._round_state(), emb))
        if len(self.rounds) > HISTORY_ROUNDS + 1:
            self.rounds = [self.rounds[0]] + self.rounds[-HISTORY_ROUNDS:]
        ctx = build_context(self.rounds)
        state = self.bundle.backbone.predict_next_state(ctx).detach()

        try:
            if self.window is None:
                finished, self.window = generate_first_chunk(
                    self.last_latent, emb, self.model, self.bundle.schedule, self.rng,
                    chunk_len=self.bundle.shape.chunk_len, cfg_scale=self.cfg_scale,
                    state=state, cond_transform=_to_pixel_range,
                )
            else:
                self.window.actionA = emb
                self.window.stateA = state
                for _ in range(self.window.n_steps // 2):
                    swin_denoise_round(self.window, self.model, self.bundle.schedule,
                                       self.cfg_scale)
                finished, self.window = advance_window(self.window, self.rng,
                                                       _to_pixel_range)
        except NumericsError as err:
            raise RolloutError(f"decoder diverged at step {t}: {err}") from err
        if not np.all(np.isfinite(finished)):
            raise RolloutError(f"decoder diverged at step {t}: non-finite latents")
        frames = decode_latents(
            np.concatenate([self.last_latent[None], _to_pixel_range(finished)])
        )[1:]
        self.last_latent = _to_pixel_range(finished[-1])
        self.last_frames = frames
        self.pending_state = state
        self.step_count = t
        norms = np.linalg.norm(state.data.astype(np.float64), axis=-1)
        self.history.append(HistoryEntry(t, action, frames, [float(x) for x in norms]))
        if len(self.history) > HISTORY_ROUNDS + 1:
            self.history = [self.history[0]] + self.history[-HISTORY_ROUNDS:]
        return state, frames

    # ----------------------------------------------------------------- forks

    def fork(self, inherit_rng: bool = False) -> "Session":
        """Independent copy sharing nothing mutable with the parent.

        inherit_rng continues the parent's exact noise sequence (same next
        action gives bit-identical frames); otherwise the fork gets a fresh
        stream derived from the parent's and its fork counter.
        """
        if inherit_rng:
            rng = RngStream.from_state(self.rng.state())
        else:
            rng = self.rng.child(f"fork{self.fork_count}")
        self.fork_count += 1
        child = Session(self.bundle, self.initial_frame.copy(), rng,
                        cfg_scale=self.cfg_scale, parent_id=self.id)
        child.window = None if self.window is None else _copy_window(self.window)
        child.rounds = [(Tensor(s.data.copy()), Tensor(a.data.copy()))
                        for s, a in self.rounds]
        child.pending_state = _tensor_copy(self.pending_state)
        child.last_frames = None if self.last_frames is None else self.last_frames.copy()
        child.last_latent = self.last_latent.copy()
        child.step_count = self.step_count
        child.history = [
            HistoryEntry(e.step, e.action, e.frames.copy(), list(e.state_norms))
            for e in self.history
        ]
        return child


def rollout_step(session: Session, action: str) -> tuple[Tensor, np.ndarray]:
    return session.step(action)


def fork(session: Session, inherit_rng: bool = False) -> Session:
    return session.fork(inherit_rng=inherit_rng)
