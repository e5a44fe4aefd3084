"""Counter-based random streams.

Every draw is generated by a fresh Philox generator keyed by
(seed, stream name, counter), so a stream's n-th draw is a pure function
of those three values: draws commute across streams, and restoring the
(seed, stream, counter) triple resumes the exact sequence.
"""
from __future__ import annotations

import hashlib

import numpy as np


def _philox_key(seed: int, stream: str, counter: int) -> np.ndarray:
    raw = f"{seed}|{stream}|{counter}".encode()
    digest = hashlib.sha256(raw).digest()
    return np.frombuffer(digest[:16], dtype=np.uint64)  # Philox takes a 128-bit key


class RngStream:
    """A named, resumable source of random draws."""

    __slots__ = ("seed", "stream", "counter")

    def __init__(self, seed: int, stream: str = "root", counter: int = 0):
        self.seed = int(seed)
        self.stream = str(stream)
        self.counter = int(counter)

    def child(self, name: str) -> "RngStream":
        """A fresh stream whose draws are independent of this one's."""
        return RngStream(self.seed, f"{self.stream}/{name}")

    def _next(self) -> np.random.Generator:
        gen = np.random.Generator(np.random.Philox(key=_philox_key(self.seed, self.stream, self.counter)))
        self.counter += 1
        return gen

    def normal(self, shape=(), dtype=np.float32) -> np.ndarray:
        return self._next().standard_normal(shape, dtype=np.dtype(dtype))

    def uniform(self, low: float = 0.0, high: float = 1.0, shape=()) -> np.ndarray:
        return self._next().uniform(low, high, size=shape)

    def integers(self, low: int, high: int, shape=()) -> np.ndarray:
        """Integers in [low, high)."""
        return self._next().integers(low, high, size=shape)

    def choice(self, options, p=None):
        items = list(options)
        idx = int(self._next().choice(len(items), p=p))
        return items[idx]

    def permutation(self, n: int) -> np.ndarray:
        return self._next().permutation(n)

    def state(self) -> dict:
        return {"seed": self.seed, "stream": self.stream, "counter": self.counter}

    @classmethod
    def from_state(cls, state: dict) -> "RngStream":
        return cls(state["seed"], state["stream"], state["counter"])

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream={self.stream!r}, counter={self.counter})"
