from .nn import (
    Embedding,
    LayerNorm,
    Linear,
    Mlp,
    Module,
    MultiHeadAttention,
    TransformerBlock,
    gelu,
    layer_norm,
    merge_heads,
    split_heads,
)
from .optim import AdamW, clip_by_global_norm, global_norm, lr_at
from .rng import RngStream
from .tensor import (
    GradTape,
    NumericsError,
    Parameter,
    Tensor,
    concat,
    embedding,
    exp,
    finite_checks_enabled,
    log,
    masked_attention,
    masked_softmax,
    matmul,
    mean,
    power,
    reshape,
    set_finite_checks,
    sqrt,
    stack,
    sum_,
    swapaxes,
    take,
    tanh,
    transpose,
)

__all__ = [
    "AdamW",
    "Embedding",
    "GradTape",
    "LayerNorm",
    "Linear",
    "Mlp",
    "Module",
    "MultiHeadAttention",
    "NumericsError",
    "Parameter",
    "RngStream",
    "Tensor",
    "TransformerBlock",
    "clip_by_global_norm",
    "concat",
    "embedding",
    "exp",
    "finite_checks_enabled",
    "gelu",
    "global_norm",
    "layer_norm",
    "log",
    "lr_at",
    "masked_attention",
    "masked_softmax",
    "matmul",
    "mean",
    "merge_heads",
    "power",
    "reshape",
    "set_finite_checks",
    "split_heads",
    "sqrt",
    "stack",
    "sum_",
    "swapaxes",
    "take",
    "tanh",
    "transpose",
]
