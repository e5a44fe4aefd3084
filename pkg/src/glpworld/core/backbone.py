"""Autoregressive world-model backbone f.

A causal transformer over the flattened conversation context.  Each
round ends with Q learnable query tokens; the trunk outputs at those
positions, layer-normalized and passed through a zero-initialized head,
form the predicted next world state.  Zero init makes every initial
prediction exactly zero, so training has to move the states before
latent variance can rise above zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics import (
    Embedding,
    LayerNorm,
    Linear,
    Module,
    Parameter,
    RngStream,
    Tensor,
    TransformerBlock,
    concat,
    take,
)
from .context import ConversationContext

TYPE_IDS = {"state": 0, "action": 1, "query": 2}


@dataclass
class WorldState:
    tokens: np.ndarray  # (Q, D_s)
    t: int


class WorldModelBackbone(Module):
    def __init__(self, name: str, rng: RngStream, dim: int = 64, heads: int = 4,
                 n_blocks: int = 4, n_queries: int = 16, max_len: int = 1280,
                 dtype=np.float32):
        self.dim = dim
        self.n_queries = n_queries
        self.max_len = max_len
        scale = 1.0 / np.sqrt(dim)
        self.queries = Parameter(
            f"{name}.queries", (rng.child("queries").normal((n_queries, dim)) * scale).astype(dtype)
        )
        self.type_embed = Parameter(
            f"{name}.types", (rng.child("types").normal((3, dim)) * scale).astype(dtype)
        )
        self.pos = Embedding(f"{name}.pos", max_len, dim, rng.child("pos"), dtype)
        self.blocks = [
            TransformerBlock(f"{name}.block{i}", dim, heads, rng.child(f"block{i}"), dtype)
            for i in range(n_blocks)
        ]
        self.final_ln = LayerNorm(f"{name}.ln", dim, dtype)
        self.head = Linear(f"{name}.head", dim, dim, rng.child("head"), dtype, zero_init=True)

    def _flatten(self, ctx: ConversationContext) -> tuple[Tensor, list[tuple[int, int]]]:
        parts: list[Tensor] = []
        query_spans: list[tuple[int, int]] = []
        offset = 0
        for block in ctx.blocks:
            tokens = self.queries if block.kind == "query" else block.tokens
            length = tokens.shape[0]
            type_row = take(self.type_embed, [TYPE_IDS[block.kind]])
            parts.append(tokens + type_row)
            if block.kind == "query":
                query_spans.append((offset, offset + length))
            offset += length
        if offset > self.max_len:
            raise ValueError(f"context length {offset} exceeds maximum {self.max_len}")
        x = concat(parts, axis=0) + self.pos(list(range(offset)))
        return x, query_spans

    def predict_all_rounds(self, ctx: ConversationContext) -> list[Tensor]:
        """Teacher-forced pass: one (Q, D) prediction per retained round."""
        x, spans = self._flatten(ctx)
        if not spans:
            raise ValueError("context has no query block")
        mask = np.tril(np.ones((x.shape[0], x.shape[0]), dtype=bool))
        for block in self.blocks:
            x = block(x, mask)
        out = self.head(self.final_ln(x))
        return [out[a:b] for a, b in spans]

    def predict_next_state(self, ctx: ConversationContext) -> Tensor:
        """(Q, D) next-state prediction from the final round's queries."""
        last = ctx.blocks[-1]
        if last.kind != "query" or ctx.blocks[-2].kind != "action":
            raise ValueError("context must end with an action block then a query block")
        return self.predict_all_rounds(ctx)[-1]
