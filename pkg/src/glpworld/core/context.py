"""Conversation-layout context for the world-model backbone.

Rounds alternate user(state, action) / assistant(queries).  Truncation
keeps the initial state block plus the most recent rounds, mirroring a
rolling context window anchored at the episode start.
"""
from __future__ import annotations

from dataclasses import dataclass

from ..numerics import Tensor

MAX_ROUNDS = 10


@dataclass
class ContextBlock:
    role: str  # "user" | "assistant"
    kind: str  # "state" | "action" | "query"
    tokens: Tensor | None  # None only for kind == "query" (backbone owns those)
    round_index: int


@dataclass
class ConversationContext:
    blocks: list[ContextBlock]
    n_rounds: int


def build_context(
    history: list[tuple[Tensor, Tensor]], max_rounds: int = MAX_ROUNDS
) -> ConversationContext:
    """history[k] = (state tokens, embedded action tokens) for round k.

    With more than max_rounds rounds, the oldest full rounds are dropped
    but round 0's state block survives as an anchor.
    """
    if not history:
        raise ValueError("history must contain at least one round")
    blocks: list[ContextBlock] = []
    if len(history) > max_rounds:
        blocks.append(ContextBlock("user", "state", history[0][0], 0))
        start = len(history) - max_rounds
    else:
        start = 0
    for k in range(start, len(history)):
        state, action = history[k]
        blocks.append(ContextBlock("user", "state", state, k))
        blocks.append(ContextBlock("user", "action", action, k))
        blocks.append(ContextBlock("assistant", "query", None, k))
    return ConversationContext(blocks=blocks, n_rounds=len(history))
