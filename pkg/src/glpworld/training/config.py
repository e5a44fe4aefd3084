"""Training configuration: validated dataclasses with JSON round-trip.

Config files (*.cfg) are plain JSON. Model shapes come from named presets
so checkpoints can assert compatibility by name plus explicit dims.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path


@dataclass(frozen=True)
class ModelShape:
    d_s: int = 64           # backbone width; also the latent-token width
    n_queries: int = 16     # query tokens per world state
    enc_heads: int = 4
    enc_grid: int = 8
    backbone_blocks: int = 4
    backbone_heads: int = 4
    dit_width: int = 96
    dit_heads: int = 4
    dit_blocks: int = 4
    chunk_len: int = 2      # C latent frames per chunk
    n_steps: int = 8        # N inference steps (even)
    k_steps: int = 1000     # K training grid
    shift: float = 5.0
    frames_per_action: int = 8

    def __post_init__(self):
        if self.n_steps % 2 != 0:
            raise ValueError(f"n_steps must be even, got {self.n_steps}")
        # one action's pixel frames must map to exactly one chunk of latents
        if self.frames_per_action != 4 * self.chunk_len:
            raise ValueError(
                f"frames_per_action {self.frames_per_action} != 4 * chunk_len "
                f"{self.chunk_len}; actions would straddle chunk boundaries"
            )


SHAPE_PRESETS = {
    "toy": ModelShape(),
    # test-scale: smallest shapes that still exercise every code path
    "mini": ModelShape(d_s=32, enc_heads=2, backbone_blocks=2, backbone_heads=2,
                       dit_width=32, dit_heads=2, dit_blocks=2, n_steps=4),
    # full-scale shape fidelity only; nothing trains at this size here
    "paper-shapes": ModelShape(n_queries=256, chunk_len=10, n_steps=50,
                               frames_per_action=40),
}


@dataclass
class TrainConfig:
    stage: int
    dataset: str
    seed: int = 17
    epochs: int = 5
    steps_per_epoch: int = 25
    batch_size: int = 4
    base_lr: float = 1e-5
    lr_multiplier: float = 30.0   # toy-scale boost over the reference rate
    warmup_fraction: float = 0.05
    grad_clip: float = 1.0
    weight_decay: float = 0.0
    cfg_drop: float = 0.1
    first_chunk_frac: float = 0.2
    preset: str = "toy"
    unfreeze_backbone: bool = False
    early_stop_epsilon: float = 0.01
    early_stop_patience: int = 1
    val_items: int = 8
    max_steps: int | None = None
    out: str | None = None

    def __post_init__(self):
        if self.stage not in (1, 2):
            raise ValueError(f"stage must be 1 or 2, got {self.stage}")
        if self.preset not in SHAPE_PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}")
        if self.epochs < 1 or self.steps_per_epoch < 1 or self.batch_size < 1:
            raise ValueError("epochs, steps_per_epoch, batch_size must be >= 1")
        if not 0.0 <= self.cfg_drop <= 1.0:
            raise ValueError(f"cfg_drop {self.cfg_drop} outside [0, 1]")
        if not 0.0 <= self.first_chunk_frac <= 1.0:
            raise ValueError(f"first_chunk_frac {self.first_chunk_frac} outside [0, 1]")
        if not 0.0 <= self.warmup_fraction <= 1.0:
            raise ValueError(f"warmup_fraction {self.warmup_fraction} outside [0, 1]")
        if self.base_lr <= 0 or self.lr_multiplier <= 0 or self.grad_clip <= 0:
            raise ValueError("base_lr, lr_multiplier, grad_clip must be positive")
        if self.early_stop_epsilon < 0 or self.early_stop_patience < 1:
            raise ValueError("bad early stopping settings")
        if self.val_items < 1:
            raise ValueError("val_items must be >= 1")

    @property
    def shape(self) -> ModelShape:
        return SHAPE_PRESETS[self.preset]

    @property
    def lr(self) -> float:
        return self.base_lr * self.lr_multiplier

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TrainConfig":
        return cls(**json.loads(text))

    @classmethod
    def load(cls, path: str | Path) -> "TrainConfig":
        return cls.from_json(Path(path).read_text())


@dataclass
class JepaConfig:
    """Budget for the latent-matching baseline run."""

    dataset: str
    seed: int = 17
    epochs: int = 3
    steps_per_epoch: int = 20
    batch_size: int = 8
    lr: float = 3e-4
    preset: str = "toy"

    def __post_init__(self):
        if self.preset not in SHAPE_PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}")
        if self.epochs < 1 or self.steps_per_epoch < 1 or self.batch_size < 1:
            raise ValueError("epochs, steps_per_epoch, batch_size must be >= 1")

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)

    @classmethod
    def load(cls, path: str | Path) -> "JepaConfig":
        return cls(**json.loads(Path(path).read_text()))
