from .episodes import Episode, generate_dataset, generate_episode, random_scene
from .grammar import (
    COLORS,
    DIRECTIONS,
    KINDS,
    Action,
    UnknownActionError,
    all_sentences,
    parse,
    render_text,
    vocabulary,
)
from .world import (
    GRID,
    MAX_ENTITIES,
    MIN_LIGHTING,
    Entity,
    EnvState,
    applicable_actions,
    goal_reached,
    render,
    solve_oracle,
    spawn_position,
    step,
    step_state,
)

__all__ = [
    "Action",
    "COLORS",
    "DIRECTIONS",
    "Entity",
    "EnvState",
    "Episode",
    "GRID",
    "KINDS",
    "MAX_ENTITIES",
    "MIN_LIGHTING",
    "UnknownActionError",
    "all_sentences",
    "applicable_actions",
    "generate_dataset",
    "generate_episode",
    "goal_reached",
    "parse",
    "random_scene",
    "render",
    "render_text",
    "solve_oracle",
    "spawn_position",
    "step",
    "step_state",
    "vocabulary",
]
