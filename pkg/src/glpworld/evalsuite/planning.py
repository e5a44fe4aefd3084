"""Goal-conditioned planning by simulation.

The planner is deliberately simple model-predictive control: propose a
few applicable actions, imagine each one with a world model, commit the
action whose imagined outcome looks closest to the goal render, repeat
until the goal is reached or the budget runs out. Everything the
planner explored is kept in the trace, so a run can be audited after
the fact. Goal checking is the environment's own goal_reached, not a
learned judge.
"""
from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from ..env import (
    EnvState,
    applicable_actions,
    goal_reached,
    parse,
    random_scene,
    render,
    solve_oracle,
    step,
    step_state,
)
from ..numerics import RngStream

TOP_M = 8  # proposals simulated per planning round

# actions whose outcome commutes with the rest of a plan; multi-step
# goal scripts stick to these so task order never matters
_COMMUTING_VERBS = ("remove", "dim", "brighten")

Agent = Callable[[EnvState, EnvState, list[str]], list[str]]


TASK_KINDS = ("smoothness", "consistency", "stepwise", "planning")


@dataclass
class EvalTask:
    """One benchmark case; `kind` names the protocol that consumes it.

    Planning tasks carry goal_state, budget and the precomputed
    solvability facts; consistency tasks carry an action script to
    replay; the other kinds only need the initial scene.
    """
    task_id: str
    kind: str
    initial_state: EnvState
    goal_state: EnvState | None = None
    script: list[str] | None = None
    budget: int = 0
    solvable: bool | None = None
    oracle_len: int | None = None

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ValueError(f"unknown task kind {self.kind!r}")


@dataclass
class PlanCandidate:
    action: str
    score: float
    frames: np.ndarray | None = field(default=None, repr=False)


@dataclass
class PlanNode:
    state: EnvState
    candidates: list[PlanCandidate]
    chosen: str
    feasible: bool


@dataclass
class PlanTrace:
    task_id: str
    nodes: list[PlanNode]
    actions: list[str]
    status: str  # "success" | "budget_exhausted"
    final_state: EnvState

    @property
    def success(self) -> bool:
        return self.status == "success"


class OracleWorldModel:
    """Imagines with the simulator itself; the planning upper bound."""

    def __init__(self, frames_per_action: int = 8):
        self.frames_per_action = frames_per_action
        self._state: EnvState | None = None

    def begin(self, state: EnvState, obs: np.ndarray) -> None:
        self._state = state

    def imagine(self, actions: list[str]) -> list[np.ndarray]:
        return [step(self._state, a, self.frames_per_action)[1] for a in actions]


class NoiseWorldModel:
    """Imagines uniform noise; a world model that knows nothing."""

    def __init__(self, rng: RngStream, frames_per_action: int = 8):
        self.rng = rng
        self.frames_per_action = frames_per_action

    def begin(self, state: EnvState, obs: np.ndarray) -> None:
        pass

    def imagine(self, actions: list[str]) -> list[np.ndarray]:
        shape = (self.frames_per_action, 32, 32, 3)
        return [self.rng.uniform(0.0, 1.0, shape).astype(np.float32) for _ in actions]


class RolloutWorldModel:
    """Imagines with a trained bundle: one forked rollout step per action.

    Each planning round grounds a fresh session on the real current
    observation, so model drift never outlives one round.
    """

    def __init__(self, bundle, seed: int, cfg_scale: float = 4.0):
        from ..rollout import Session, fork

        self._session_cls = Session
        self._fork = fork
        self.bundle = bundle
        self.seed = seed
        self.cfg_scale = cfg_scale
        self._rounds = 0
        self._session = None

    def begin(self, state: EnvState, obs: np.ndarray) -> None:
        rng = RngStream(self.seed, f"plan/round{self._rounds}")
        self._session = self._session_cls(self.bundle, obs, rng, cfg_scale=self.cfg_scale)
        self._rounds += 1

    def imagine(self, actions: list[str]) -> list[np.ndarray]:
        futures = []
        for action in actions:
            child = self._fork(self._session)
            _, frames = child.step(action)
            futures.append(frames)
        return futures


def _goal_err(frames: np.ndarray, goal_frame: np.ndarray) -> float:
    """Mean absolute pixel error of the final imagined frame vs the goal."""
    last = np.asarray(frames[-1], dtype=np.float64)
    return float(np.mean(np.abs(last - np.asarray(goal_frame, dtype=np.float64))))


def _mismatch_penalty(state: EnvState, goal: EnvState, action_text: str,
                      frames_per_action: int) -> float:
    """Cheap ranking score: how much closer does this action plausibly get us.

    Population and lighting edits score by whether they close a
    state/goal difference; moves score by straight-line progress of the
    commanded entity toward its goal cell, ignoring collisions. This
    only orders proposals, the world model does the real work.
    """
    a = parse(action_text)
    here = {(e.color, e.kind): e.pos for e in state.entities}
    there = {(e.color, e.kind): e.pos for e in goal.entities}
    if a.verb == "remove":
        return 10.0 if (a.color, a.kind) not in there else -10.0
    if a.verb == "add":
        return 10.0 if (a.color, a.kind) in there else -10.0
    if a.verb == "dim":
        return 10.0 if goal.lighting < state.lighting else -10.0
    if a.verb == "brighten":
        return 10.0 if goal.lighting > state.lighting else -10.0
    pair = (a.color, a.kind)
    if pair not in there or pair not in here:
        return -10.0
    x, y = here[pair]
    gx, gy = there[pair]
    dx = {"left": -1, "right": 1}.get(a.direction, 0) * frames_per_action
    dy = {"up": -1, "down": 1}.get(a.direction, 0) * frames_per_action
    before = abs(x - gx) + abs(y - gy)
    after = abs(min(max(x + dx, 1), 30) - gx) + abs(min(max(y + dy, 1), 30) - gy)
    return float(before - after)


def default_proposer(top_m: int = TOP_M, frames_per_action: int = 8) -> Agent:
    """Rank applicable actions by the mismatch heuristic, keep the top m."""
    def propose(state: EnvState, goal: EnvState, pool: list[str]) -> list[str]:
        scored = sorted(
            range(len(pool)),
            key=lambda i: (-_mismatch_penalty(state, goal, pool[i], frames_per_action), i),
        )
        return [pool[i] for i in scored[:top_m]]
    return propose


def simulative_plan(agent: Agent | None, world_model, task: EvalTask,
                    frames_per_action: int = 8) -> PlanTrace:
    """Plan toward task.goal_state by imagining proposals and committing the best.

    Per round: propose (agent, default caps applicable actions at
    TOP_M), imagine every proposal with the world model, score each
    imagined future by final-frame pixel error against the goal render,
    commit the argmin in the real environment. Stops on goal_reached or
    after task.budget commits; a zero budget returns an empty
    budget_exhausted trace untouched.
    """
    if task.kind != "planning" or task.goal_state is None:
        raise ValueError("simulative_plan needs a planning task with a goal state")
    if agent is None:
        agent = default_proposer(frames_per_action=frames_per_action)
    state = task.initial_state.copy()
    goal_frame = render(task.goal_state)
    nodes: list[PlanNode] = []
    actions: list[str] = []
    for _ in range(task.budget):
        if goal_reached(state, task.goal_state):
            break
        pool = applicable_actions(state, frames_per_action)
        proposals = agent(state, task.goal_state, pool)
        if not proposals:
            break
        snapshot = state.copy()
        world_model.begin(state.copy(), render(state))
        futures = world_model.imagine(list(proposals))
        if len(futures) != len(proposals):
            raise ValueError("world model returned wrong number of futures")
        cands = [PlanCandidate(a, _goal_err(f, goal_frame), f)
                 for a, f in zip(proposals, futures)]
        best = min(range(len(cands)), key=lambda i: (cands[i].score, i))
        chosen = cands[best].action
        state, _, feasible = step(state, chosen, frames_per_action)
        nodes.append(PlanNode(snapshot, cands, chosen, feasible))
        actions.append(chosen)
    status = "success" if goal_reached(state, task.goal_state) else "budget_exhausted"
    return PlanTrace(task.task_id, nodes, actions, status, state)


def baseline_plan(task: EvalTask, rng: RngStream,
                  agent: Agent | None = None, frames_per_action: int = 8) -> PlanTrace:
    """Same proposer, no simulation: commits a uniform choice among proposals."""
    if agent is None:
        agent = default_proposer(frames_per_action=frames_per_action)
    state = task.initial_state.copy()
    nodes: list[PlanNode] = []
    actions: list[str] = []
    for _ in range(task.budget):
        if goal_reached(state, task.goal_state):
            break
        pool = applicable_actions(state, frames_per_action)
        proposals = agent(state, task.goal_state, pool)
        if not proposals:
            break
        snapshot = state.copy()
        chosen = rng.choice(proposals)
        state, _, feasible = step(state, chosen, frames_per_action)
        nodes.append(PlanNode(snapshot, [PlanCandidate(a, float("nan")) for a in proposals],
                              chosen, feasible))
        actions.append(chosen)
    status = "success" if goal_reached(state, task.goal_state) else "budget_exhausted"
    return PlanTrace(task.task_id, nodes, actions, status, state)


def _static_scene(rng: RngStream) -> EnvState:
    """Random scene with all velocities zeroed; goals stay pinned in place."""
    state = random_scene(rng)
    for e in state.entities:
        e.vel = (0, 0)
    return state


def _script_step(state: EnvState, rng: RngStream, verbs: tuple[str, ...],
                 frames_per_action: int) -> tuple[EnvState, str] | None:
    pool = [a for a in applicable_actions(state, frames_per_action)
            if parse(a).verb in verbs]
    if not pool:
        return None
    action = rng.choice(pool)
    nxt, feasible = step_state(state, action, frames_per_action)
    if not feasible:
        return None
    return nxt, action


# script length per suite slot; mostly short plans, a few deeper ones
_LENGTH_CYCLE = (1, 2, 1, 1, 2, 1, 2, 1, 1, 2, 3)


def build_planning_suite(seed: int, n_tasks: int = 46,
                         frames_per_action: int = 8) -> list[EvalTask]:
    """Goal-reach tasks with oracle-verified plans.

    Each task's goal is a state actually produced by a short action
    script from the initial scene, so solvability is by construction;
    solve_oracle then pins the true shortest length and the budget is
    that plus one. Multi-step scripts use only order-commuting actions
    (no adds: spawn cells depend on execution order) and scenes are
    static, so any permutation the planner finds still lands on goal.
    """
    tasks: list[EvalTask] = []
    i = 0
    while len(tasks) < n_tasks:
        rng = RngStream(seed, f"plan-suite/{i}")
        i += 1
        length = _LENGTH_CYCLE[(i - 1) % len(_LENGTH_CYCLE)]
        initial = _static_scene(rng.child("scene"))
        verbs = ("move", "add", "remove", "dim", "brighten") if length == 1 \
            else _COMMUTING_VERBS
        state = initial
        script: list[str] = []
        for _ in range(length):
            got = _script_step(state, rng, verbs, frames_per_action)
            if got is None:
                break
            state, action = got
            script.append(action)
        if len(script) < length or goal_reached(initial, state):
            continue
        plan = solve_oracle(initial, state, budget=length,
                            frames_per_action=frames_per_action)
        if plan is None:  # unreachable: the script itself is a witness plan
            raise RuntimeError(f"oracle missed a scripted goal (task slot {i - 1})")
        tasks.append(EvalTask(
            task_id=f"goal-{len(tasks):02d}",
            kind="planning",
            initial_state=initial,
            goal_state=state,
            budget=len(plan) + 1,
            solvable=True,
            oracle_len=len(plan),
        ))
    return tasks
