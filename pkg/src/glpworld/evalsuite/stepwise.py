"""Four-way forced-choice probe for one-step prediction quality.

Each instance asks a model to predict the outcome of one action, then
matches the prediction against the true next observation and three
distractors (outcomes of other applicable actions in the same state).
Chance is 0.25, a perfect simulator scores 1.0, and no judge model is
involved anywhere: the environment itself supplies the answer key.
"""
from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from ..env import EnvState, applicable_actions, random_scene, render, step
from ..numerics import RngStream

N_CANDIDATES = 4

ModelFn = Callable[[np.ndarray, str, EnvState], np.ndarray]
PoolFn = Callable[[EnvState, int], list[str]]


@dataclass(frozen=True)
class StepwiseInstance:
    state: EnvState
    action: str


@dataclass
class StepwiseResult:
    accuracy: float
    n_scored: int
    n_skipped: int
    choices: list[int] = field(repr=False)
    correct: list[int] = field(repr=False)
    skip_reasons: dict[str, int] = field(default_factory=dict)


def build_stepwise_instances(seed: int, n: int,
                             frames_per_action: int = 8) -> list[StepwiseInstance]:
    """n independent (scene, applicable action) pairs; action drawn uniformly."""
    instances = []
    for i in range(n):
        rng = RngStream(seed, f"stepwise/{i}")
        state = random_scene(rng.child("scene"))
        pool = applicable_actions(state, frames_per_action)
        instances.append(StepwiseInstance(state, rng.choice(pool)))
    return instances


def oracle_model(frames_per_action: int = 8) -> ModelFn:
    """Predicts with the simulator itself; scores 1.0 by construction."""
    def model(obs: np.ndarray, action: str, state: EnvState) -> np.ndarray:
        return step(state, action, frames_per_action)[1]
    return model


def repeater_model(frames_per_action: int = 8) -> ModelFn:
    """Predicts a frozen copy of the current observation; scores ~chance."""
    def model(obs: np.ndarray, action: str, state: EnvState) -> np.ndarray:
        return np.repeat(obs[None], frames_per_action, axis=0)
    return model


def rollout_model(bundle, seed: int, cfg_scale: float = 4.0) -> ModelFn:
    """Predicts with a trained bundle: a fresh one-step session per instance.

    Session k draws from stream "stepwise-model/k", so a fixed seed
    makes the whole probe reproducible.
    """
    from ..rollout import Session

    count = {"n": 0}

    def model(obs: np.ndarray, action: str, state: EnvState) -> np.ndarray:
        rng = RngStream(seed, f"stepwise-model/{count['n']}")
        count["n"] += 1
        _, frames = Session(bundle, obs, rng, cfg_scale=cfg_scale).step(action)
        return frames
    return model


def _frames_err(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.mean(np.abs(np.asarray(a, np.float64) - np.asarray(b, np.float64))))


def stepwise_eval(model: ModelFn, instances: Sequence[StepwiseInstance],
                  rng: RngStream, frames_per_action: int = 8,
                  mode: str = "pixel", encoder=None,
                  pool_fn: PoolFn = applicable_actions) -> StepwiseResult:
    """Forced-choice accuracy of `model` over `instances`.

    mode "pixel" matches candidates by mean absolute pixel error, mode
    "latent" by squared distance between encoder tokens (the encoder
    argument is required there). Ties go to the lowest candidate index.
    Instances without three distractors producing frames distinct from
    the truth and from each other are skipped, not scored; the skip
    counts come back in the result so a quiet dataset can't inflate
    accuracy unnoticed. All draws come from `rng` in instance order, so
    one seed fixes the full report.
    """
    if mode not in ("pixel", "latent"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "latent" and encoder is None:
        raise ValueError("latent mode needs an encoder")

    choices: list[int] = []
    correct: list[int] = []
    skip_reasons: dict[str, int] = {}

    def skip(reason: str) -> None:
        skip_reasons[reason] = skip_reasons.get(reason, 0) + 1

    for inst in instances:
        pool = pool_fn(inst.state, frames_per_action)
        others = [a for a in pool if a != inst.action]
        if inst.action not in pool or len(others) < N_CANDIDATES - 1:
            skip("too_few_actions")
            continue
        truth = step(inst.state, inst.action, frames_per_action)[1]
        # Distractors must be visually distinct or the forced choice is
        # ill-posed; draw in random order until three qualify.
        distractors: list[np.ndarray] = []
        for j in rng.permutation(len(others)):
            if len(distractors) == N_CANDIDATES - 1:
                break
            frames = step(inst.state, others[int(j)], frames_per_action)[1]
            pool_so_far = [truth, *distractors]
            if all(not np.array_equal(frames, seen) for seen in pool_so_far):
                distractors.append(frames)
        if len(distractors) < N_CANDIDATES - 1:
            skip("indistinct_outcomes")
            continue

        order = rng.permutation(N_CANDIDATES)
        candidates = [truth, *distractors]
        shuffled = [candidates[int(i)] for i in order]
        correct_idx = int(np.argwhere(order == 0)[0, 0])

        obs = render(inst.state)
        pred = model(obs, inst.action, inst.state)
        if mode == "pixel":
            errs = [_frames_err(pred, cand) for cand in shuffled]
        else:
            e_pred = encoder(np.asarray(pred, np.float32)).data
            errs = [float(np.mean((e_pred - encoder(np.asarray(c, np.float32)).data) ** 2))
                    for c in shuffled]
        choices.append(int(np.argmin(errs)))
        correct.append(correct_idx)

    n_scored = len(choices)
    n_correct = sum(c == k for c, k in zip(choices, correct))
    return StepwiseResult(
        accuracy=n_correct / n_scored if n_scored else 0.0,
        n_scored=n_scored,
        n_skipped=len(instances) - n_scored,
        choices=choices,
        correct=correct,
        skip_reasons=skip_reasons,
    )
