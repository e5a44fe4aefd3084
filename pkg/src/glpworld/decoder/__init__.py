from .schedule import (
    COND_AUG_K,
    FlowSample,
    NoiseSchedule,
    flow_mix,
    flow_sample,
    shifted_timesteps,
    training_k_pair,
)
from .dit import DiT, DiTBlock, CrossAttention, chunk_causal_mask, timestep_features
from .window import (
    DitVelocityModel,
    SwinStateError,
    SwinWindow,
    VelocityModel,
    advance_window,
    generate_first_chunk,
    swin_denoise_round,
)

__all__ = [
    "COND_AUG_K",
    "CrossAttention",
    "DiT",
    "DiTBlock",
    "DitVelocityModel",
    "FlowSample",
    "NoiseSchedule",
    "SwinStateError",
    "SwinWindow",
    "VelocityModel",
    "advance_window",
    "chunk_causal_mask",
    "flow_mix",
    "flow_sample",
    "generate_first_chunk",
    "shifted_timesteps",
    "swin_denoise_round",
    "timestep_features",
    "training_k_pair",
]
