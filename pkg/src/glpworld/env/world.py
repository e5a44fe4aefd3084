"""BlockWorld: exact, deterministic dynamics on a 32x32 cell grid.

Entities are 3x3-cell blocks identified by a unique (color, kind) pair.
Cubes and balls are solid; lights are non-solid and render emissively
(unscaled by the global lighting level). A commanded entity moves one
cell per frame for the duration of an action; balls keep the commanded
velocity afterwards and bounce elastically, cubes and lights stop. The
whole scene renders to one 32x32 RGB frame per tick, scaled by the
lighting level.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .grammar import (
    COLORS,
    DIRECTIONS,
    KINDS,
    Action,
    UnknownActionError,
    parse,
    render_text,
)

GRID = 32
POS_MIN, POS_MAX = 1, GRID - 2  # centers of 3x3 footprints stay in-bounds
MAX_ENTITIES = 6
MIN_LIGHTING = 0.0625  # dimming floor: lighting walks powers of two in [1/16, 1]

DIR_VEC = {"left": (-1, 0), "right": (1, 0), "up": (0, -1), "down": (0, 1)}

COLOR_RGB = {
    "red": (0.90, 0.15, 0.15),
    "green": (0.15, 0.80, 0.20),
    "blue": (0.20, 0.30, 0.90),
    "yellow": (0.90, 0.85, 0.20),
    "cyan": (0.15, 0.80, 0.80),
    "magenta": (0.85, 0.20, 0.80),
    "white": (0.92, 0.92, 0.92),
    "orange": (0.95, 0.55, 0.10),
}

SOLID_KINDS = ("cube", "ball")


@dataclass
class Entity:
    id: int
    kind: str
    color: str
    pos: tuple[int, int]
    vel: tuple[int, int] = (0, 0)

    @property
    def solid(self) -> bool:
        return self.kind in SOLID_KINDS


@dataclass
class EnvState:
    entities: list[Entity] = field(default_factory=list)
    lighting: float = 1.0
    next_id: int = 0

    def copy(self) -> "EnvState":
        ents = [Entity(e.id, e.kind, e.color, e.pos, e.vel) for e in self.entities]
        return EnvState(ents, self.lighting, self.next_id)

    def find(self, color: str, kind: str) -> Entity | None:
        for e in self.entities:
            if e.color == color and e.kind == kind:
                return e
        return None

    def key(self) -> tuple:
        """Hashable identity-free snapshot (ids excluded; order-insensitive)."""
        ents = tuple(sorted((e.kind, e.color, e.pos, e.vel) for e in self.entities))
        return (ents, self.lighting)

    def to_json(self) -> str:
        payload = {
            "entities": [
                {"id": e.id, "kind": e.kind, "color": e.color, "pos": list(e.pos), "vel": list(e.vel)}
                for e in self.entities
            ],
            "lighting": self.lighting,
            "next_id": self.next_id,
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EnvState":
        payload = json.loads(text)
        ents = [
            Entity(d["id"], d["kind"], d["color"], tuple(d["pos"]), tuple(d["vel"]))
            for d in payload["entities"]
        ]
        return cls(ents, payload["lighting"], payload["next_id"])


def _in_bounds(x: int, y: int) -> bool:
    return POS_MIN <= x <= POS_MAX and POS_MIN <= y <= POS_MAX


def _solid_overlap(entities: list[Entity], self_id: int, x: int, y: int) -> bool:
    """Would a solid 3x3 footprint at (x, y) overlap another solid entity?"""
    for e in entities:
        if e.id == self_id or not e.solid:
            continue
        if abs(e.pos[0] - x) <= 2 and abs(e.pos[1] - y) <= 2:
            return True
    return False


def _cell_free(state: EnvState, x: int, y: int, solid: bool) -> bool:
    if not _in_bounds(x, y):
        return False
    if solid and _solid_overlap(state.entities, -1, x, y):
        return False
    # avoid spawning any entity visually on top of another
    for e in state.entities:
        if abs(e.pos[0] - x) <= 2 and abs(e.pos[1] - y) <= 2:
            return False
    return True


def spawn_position(state: EnvState, solid: bool) -> tuple[int, int] | None:
    """First free center in a fixed row-major scan; deterministic by design."""
    for y in range(POS_MIN + 1, POS_MAX, 3):
        for x in range(POS_MIN + 1, POS_MAX, 3):
            if _cell_free(state, x, y, solid):
                return (x, y)
    return None


# ------------------------------------------------------------------ render


def _background() -> np.ndarray:
    base = np.empty((GRID, GRID), dtype=np.float32)
    ys, xs = np.mgrid[0:GRID, 0:GRID]
    checker = ((xs // 4) + (ys // 4)) % 2
    base[:] = np.where(checker == 0, 0.10, 0.16)
    return np.repeat(base[:, :, None], 3, axis=2)


_BG = _background()

# footprint masks: which of the 3x3 cells carry the entity color
_SQUARE = np.ones((3, 3), dtype=bool)
_DIAMOND = np.array([[False, True, False], [True, True, True], [False, True, False]])
_CROSS = np.array([[True, False, True], [False, True, False], [True, False, True]])
_SHAPES = {"cube": _SQUARE, "ball": _DIAMOND, "light": _CROSS}


def render(state: EnvState) -> np.ndarray:
    """Pure function state -> 32x32x3 float32 frame in [0, 1].

    Every pixel, entities included, scales with the lighting level, so
    dimming from 1.0 to 0.5 exactly halves the frame.
    """
    frame = _BG.copy()
    for e in sorted(state.entities, key=lambda e: e.id):
        x, y = e.pos
        shape = _SHAPES[e.kind]
        color = np.asarray(COLOR_RGB[e.color], dtype=np.float32)
        frame[y - 1 : y + 2, x - 1 : x + 2][shape] = color
    return frame * np.float32(state.lighting)


# ------------------------------------------------------------------ dynamics


def _move_axis(state: EnvState, e: Entity, d: int, axis: int, bounce: bool) -> bool:
    """Advance one entity one cell along one axis. Returns False if blocked."""
    nx, ny = e.pos
    if axis == 0:
        nx += d
    else:
        ny += d
    blocked = not _in_bounds(nx, ny) or (e.solid and _solid_overlap(state.entities, e.id, nx, ny))
    if blocked:
        if bounce:
            vx, vy = e.vel
            e.vel = (-vx, vy) if axis == 0 else (vx, -vy)
        return False
    e.pos = (nx, ny)
    return True


def _tick(state: EnvState, commanded: Entity | None, command_dir: tuple[int, int] | None) -> bool:
    """One frame of physics, mutating state. Returns whether the commanded
    entity moved (False means its motion stopped at an obstacle)."""
    moved = True
    if commanded is not None:
        dx, dy = command_dir
        ok = True
        if dx:
            ok = _move_axis(state, commanded, dx, 0, bounce=False)
        if dy:
            ok = _move_axis(state, commanded, dy, 1, bounce=False)
        moved = ok
    for e in sorted(state.entities, key=lambda e: e.id):
        if commanded is not None and e.id == commanded.id:
            continue
        vx, vy = e.vel
        if vx:
            _move_axis(state, e, vx, 0, bounce=True)
        if vy:
            _move_axis(state, e, vy, 1, bounce=True)
    return moved


def _has_light(state: EnvState) -> bool:
    return any(e.kind == "light" for e in state.entities)


def _begin_action(state: EnvState, action: Action) -> tuple[Entity | None, bool]:
    """Apply instantaneous effects; returns (commanded entity, feasible)."""
    if action.verb == "dim":
        if not _has_light(state) or state.lighting <= MIN_LIGHTING:
            return None, False
        state.lighting = state.lighting / 2.0
        return None, True
    if action.verb == "brighten":
        if not _has_light(state) or state.lighting >= 1.0:
            return None, False
        state.lighting = min(1.0, state.lighting * 2.0)
        return None, True
    if action.verb == "add":
        if state.find(action.color, action.kind) is not None:
            return None, False
        if len(state.entities) >= MAX_ENTITIES:
            return None, False
        pos = spawn_position(state, solid=action.kind in SOLID_KINDS)
        if pos is None:
            return None, False
        state.entities.append(Entity(state.next_id, action.kind, action.color, pos))
        state.next_id += 1
        return None, True
    if action.verb == "remove":
        e = state.find(action.color, action.kind)
        if e is None:
            return None, False
        state.entities.remove(e)
        return None, True
    if action.verb == "move":
        e = state.find(action.color, action.kind)
        if e is None:
            return None, False
        return e, True
    raise UnknownActionError(f"unknown action verb: {action.verb!r}")


def step(
    state: EnvState, action_text: str, frames_per_action: int = 8
) -> tuple[EnvState, np.ndarray, bool]:
    """Apply one action over frames_per_action physics ticks, rendering each.

    Returns (new state, frames with shape F x 32 x 32 x 3, feasible flag).
    Infeasible actions are no-ops on the commanded effect but time still
    advances for everything else.
    """
    action = parse(action_text)
    new = state.copy()
    commanded, feasible = _begin_action(new, action)
    command_dir = DIR_VEC[action.direction] if commanded is not None else None
    if commanded is not None:
        commanded.vel = command_dir
    frames = np.empty((frames_per_action, GRID, GRID, 3), dtype=np.float32)
    for f in range(frames_per_action):
        if commanded is not None:
            if not _tick(new, commanded, command_dir):
                if f == 0:
                    feasible = False  # never moved at all
                commanded.vel = (0, 0)
                commanded = None
                command_dir = None
        else:
            _tick(new, None, None)
        frames[f] = render(new)
    if commanded is not None and commanded.kind != "ball":
        commanded.vel = (0, 0)
    return new, frames, feasible


def step_state(state: EnvState, action_text: str, frames_per_action: int = 8) -> tuple[EnvState, bool]:
    """step() without rendering; used by search."""
    action = parse(action_text)
    new = state.copy()
    commanded, feasible = _begin_action(new, action)
    command_dir = DIR_VEC[action.direction] if commanded is not None else None
    if commanded is not None:
        commanded.vel = command_dir
    for f in range(frames_per_action):
        if commanded is not None:
            if not _tick(new, commanded, command_dir):
                if f == 0:
                    feasible = False
                commanded.vel = (0, 0)
                commanded = None
                command_dir = None
        else:
            _tick(new, None, None)
    if commanded is not None and commanded.kind != "ball":
        commanded.vel = (0, 0)
    return new, feasible


def applicable_actions(state: EnvState, frames_per_action: int = 8) -> list[str]:
    """Grammar sentences guaranteed feasible in this state, in a fixed order."""
    acts: list[str] = []
    for e in sorted(state.entities, key=lambda e: e.id):
        for direction in DIRECTIONS:
            dx, dy = DIR_VEC[direction]
            nx, ny = e.pos[0] + dx, e.pos[1] + dy
            if not _in_bounds(nx, ny):
                continue
            if e.solid and _solid_overlap(state.entities, e.id, nx, ny):
                continue
            acts.append(render_text(Action("move", e.color, e.kind, direction)))
    for e in sorted(state.entities, key=lambda e: e.id):
        acts.append(render_text(Action("remove", e.color, e.kind)))
    if len(state.entities) < MAX_ENTITIES:
        present = {(e.color, e.kind) for e in state.entities}
        for color in COLORS:
            for kind in KINDS:
                if (color, kind) in present:
                    continue
                if spawn_position(state, solid=kind in SOLID_KINDS) is not None:
                    acts.append(render_text(Action("add", color, kind)))
    if _has_light(state):  # lighting commands address the scene's lights
        if state.lighting > MIN_LIGHTING:
            acts.append("dim the lights")
        if state.lighting < 1.0:
            acts.append("brighten the lights")
    return acts


def goal_reached(state: EnvState, goal: EnvState) -> bool:
    """Same (color, kind) population, positions within 1 cell, same lighting."""
    if state.lighting != goal.lighting:
        return False
    mine = {(e.color, e.kind): e.pos for e in state.entities}
    theirs = {(e.color, e.kind): e.pos for e in goal.entities}
    if set(mine) != set(theirs):
        return False
    for pair, (gx, gy) in theirs.items():
        x, y = mine[pair]
        if abs(x - gx) > 1 or abs(y - gy) > 1:
            return False
    return True


def solve_oracle(
    state: EnvState, goal: EnvState, budget: int, frames_per_action: int = 8
) -> list[str] | None:
    """Breadth-first search over applicable actions; shortest plan or None."""
    if goal_reached(state, goal):
        return []
    frontier: list[tuple[EnvState, list[str]]] = [(state, [])]
    seen = {state.key()}
    for depth in range(budget):
        nxt: list[tuple[EnvState, list[str]]] = []
        for s, plan in frontier:
            for text in applicable_actions(s, frames_per_action):
                s2, feasible = step_state(s, text, frames_per_action)
                if not feasible:
                    continue
                k = s2.key()
                if k in seen:
                    continue
                seen.add(k)
                plan2 = plan + [text]
                if goal_reached(s2, goal):
                    return plan2
                nxt.append((s2, plan2))
        frontier = nxt
        if not frontier:
            break
    return None
