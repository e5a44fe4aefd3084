"""Action-text embedder: grammar vocabulary, one transformer block.

Unknown words map to a reserved UNK row instead of raising; a reserved
NULL row stands for "no action" (fresh chunks and classifier-free
unconditional passes).
"""
from __future__ import annotations

import numpy as np

from ..env import vocabulary
from ..numerics import Embedding, Module, RngStream, Tensor, TransformerBlock, take

MAX_WORDS = 8


class TextEmbedder(Module):
    def __init__(self, name: str, rng: RngStream, dim: int = 64, heads: int = 4,
                 dtype=np.float32):
        self.words = list(vocabulary())
        self.index = {w: i for i, w in enumerate(self.words)}
        self.unk_id = len(self.words)
        self.null_id = len(self.words) + 1
        self.dim = dim
        self.table = Embedding(f"{name}.table", len(self.words) + 2, dim, rng.child("table"), dtype)
        self.pos = Embedding(f"{name}.pos", MAX_WORDS, dim, rng.child("pos"), dtype)
        self.block = TransformerBlock(f"{name}.block", dim, heads, rng.child("block"), dtype)

    def token_ids(self, text: str | None) -> list[int]:
        if text is None:
            return [self.null_id]
        words = text.split()
        if len(words) > MAX_WORDS:
            raise ValueError(f"action text too long: {len(words)} words")
        return [self.index.get(w, self.unk_id) for w in words] or [self.unk_id]

    def __call__(self, text: str | None) -> Tensor:
        """(L, dim) token features; None -> the single NULL token."""
        ids = self.token_ids(text)
        x = self.table(ids) + self.pos(list(range(len(ids))))
        return self.block(x, np.True_)
