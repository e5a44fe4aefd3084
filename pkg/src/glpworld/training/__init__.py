from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint, split_arrays
from .config import SHAPE_PRESETS, JepaConfig, ModelShape, TrainConfig
from .models import ModelBundle, bundle_from_checkpoint
from .trainer import (
    JepaResult,
    TrainResult,
    train_jepa,
    train_stage1,
    train_stage2,
)

__all__ = [
    "Checkpoint",
    "CheckpointError",
    "JepaConfig",
    "JepaResult",
    "ModelBundle",
    "ModelShape",
    "SHAPE_PRESETS",
    "TrainConfig",
    "TrainResult",
    "bundle_from_checkpoint",
    "load_checkpoint",
    "save_checkpoint",
    "split_arrays",
    "train_jepa",
    "train_stage1",
    "train_stage2",
]
