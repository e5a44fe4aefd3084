"""Action grammar: a tiny command language over colored blocks and lights.

Five templates:
    move the <color> <kind> <direction>
    add a <color> <kind>
    remove the <color> <kind>
    dim the lights
    brighten the lights

Every sentence parses to exactly one canonical Action and renders back to
the same sentence.
"""
from __future__ import annotations

from dataclasses import dataclass

COLORS = ("red", "green", "blue", "yellow", "cyan", "magenta", "white", "orange")
KINDS = ("cube", "ball", "light")
DIRECTIONS = ("left", "right", "up", "down")


class UnknownActionError(ValueError):
    pass


@dataclass(frozen=True)
class Action:
    verb: str  # move | add | remove | dim | brighten
    color: str | None = None
    kind: str | None = None
    direction: str | None = None


def render_text(a: Action) -> str:
    if a.verb == "move":
        return f"move the {a.color} {a.kind} {a.direction}"
    if a.verb == "add":
        return f"add a {a.color} {a.kind}"
    if a.verb == "remove":
        return f"remove the {a.color} {a.kind}"
    if a.verb == "dim":
        return "dim the lights"
    if a.verb == "brighten":
        return "brighten the lights"
    raise UnknownActionError(f"unknown action verb: {a.verb!r}")


def parse(text: str) -> Action:
    words = text.strip().lower().split()
    if words == ["dim", "the", "lights"]:
        return Action("dim")
    if words == ["brighten", "the", "lights"]:
        return Action("brighten")
    if len(words) == 5 and words[0] == "move" and words[1] == "the":
        _, _, color, kind, direction = words
        if color in COLORS and kind in KINDS and direction in DIRECTIONS:
            return Action("move", color, kind, direction)
    if len(words) == 4 and words[0] == "add" and words[1] == "a":
        _, _, color, kind = words
        if color in COLORS and kind in KINDS:
            return Action("add", color, kind)
    if len(words) == 4 and words[0] == "remove" and words[1] == "the":
        _, _, color, kind = words
        if color in COLORS and kind in KINDS:
            return Action("remove", color, kind)
    raise UnknownActionError(f"unknown action: {text!r}")


def all_sentences() -> list[str]:
    """Every grammar production, for autocomplete and the text embedder vocabulary."""
    out = []
    for color in COLORS:
        for kind in KINDS:
            for direction in DIRECTIONS:
                out.append(render_text(Action("move", color, kind, direction)))
    for color in COLORS:
        for kind in KINDS:
            out.append(render_text(Action("add", color, kind)))
            out.append(render_text(Action("remove", color, kind)))
    out.append("dim the lights")
    out.append("brighten the lights")
    return out


def vocabulary() -> list[str]:
    """All words that can appear in a grammar sentence, sorted."""
    words = set()
    for s in all_sentences():
        words.update(s.split())
    return sorted(words)
