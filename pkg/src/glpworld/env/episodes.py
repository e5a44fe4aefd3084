"""Random feasible scenes and scripted episodes for training and eval."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..numerics import RngStream
from .grammar import COLORS, KINDS
from .world import (
    MAX_ENTITIES,
    SOLID_KINDS,
    Entity,
    EnvState,
    _cell_free,
    applicable_actions,
    render,
    spawn_position,
    step,
)


@dataclass
class Episode:
    initial_state: EnvState
    actions: list[str]
    frames: np.ndarray  # (num_steps * F, 32, 32, 3) float32
    seed: int
    frames_per_action: int
    initial_frame: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.initial_frame is None:
            self.initial_frame = render(self.initial_state)

    @property
    def num_steps(self) -> int:
        return len(self.actions)

    def step_frames(self, t: int) -> np.ndarray:
        """The F frames produced by action t (0-based)."""
        f = self.frames_per_action
        return self.frames[t * f : (t + 1) * f]

    def full_stream(self) -> np.ndarray:
        """Initial frame followed by every step frame: shape (1 + T*F, ...)."""
        return np.concatenate([self.initial_frame[None], self.frames], axis=0)


def random_scene(rng: RngStream, n_entities: int | None = None) -> EnvState:
    """A feasible random scene: distinct (color, kind) pairs, no overlaps.

    Balls may start with a velocity, which only interaction history can
    reveal to a model looking at a single frame.
    """
    state = EnvState()
    if n_entities is None:
        n_entities = int(rng.integers(2, 5))
    pairs = [(c, k) for c in COLORS for k in KINDS]
    order = rng.permutation(len(pairs))
    placed = 0
    for idx in order:
        if placed >= min(n_entities, MAX_ENTITIES):
            break
        color, kind = pairs[int(idx)]
        solid = kind in SOLID_KINDS
        # rejection-sample a free center; fall back to the deterministic scan
        pos = None
        for _ in range(20):
            cand = (int(rng.integers(2, 30)), int(rng.integers(2, 30)))
            if _cell_free(state, cand[0], cand[1], solid):
                pos = cand
                break
        if pos is None:
            pos = spawn_position(state, solid)
        if pos is None:
            continue
        vel = (0, 0)
        if kind == "ball" and rng.uniform() < 0.7:
            vel = rng.choice([(-1, 0), (1, 0), (0, -1), (0, 1)])
        state.entities.append(Entity(state.next_id, kind, color, pos, vel))
        state.next_id += 1
        placed += 1
    state.lighting = rng.choice([1.0, 1.0, 0.5])
    return state


def generate_episode(seed: int, num_steps: int, frames_per_action: int = 8) -> Episode:
    """Random scene, then one random applicable action per step."""
    if num_steps < 1:
        raise ValueError("num_steps must be >= 1")
    rng = RngStream(seed, "env/episode")
    state = random_scene(rng.child("scene"))
    initial_state = state.copy()
    action_rng = rng.child("actions")
    actions: list[str] = []
    chunks: list[np.ndarray] = []
    for _ in range(num_steps):
        options = applicable_actions(state, frames_per_action)
        text = action_rng.choice(options)
        state, frames, feasible = step(state, text, frames_per_action)
        assert feasible, "applicable_actions returned an infeasible action"
        actions.append(text)
        chunks.append(frames)
    return Episode(
        initial_state=initial_state,
        actions=actions,
        frames=np.concatenate(chunks, axis=0),
        seed=seed,
        frames_per_action=frames_per_action,
    )


def generate_dataset(
    seed: int, n_episodes: int, num_steps: int, frames_per_action: int = 8
) -> tuple[list[Episode], list[Episode]]:
    """Episodes split 90/10 into (train, val) by episode index."""
    episodes = [
        generate_episode(seed * 100_003 + i, num_steps, frames_per_action)
        for i in range(n_episodes)
    ]
    n_val = max(1, n_episodes // 10) if n_episodes > 1 else 0
    if n_val == 0:
        return episodes, []
    return episodes[:-n_val], episodes[-n_val:]
