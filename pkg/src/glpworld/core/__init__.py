from .backbone import WorldModelBackbone, WorldState
from .context import MAX_ROUNDS, ContextBlock, ConversationContext, build_context
from .encoder import ObservationEncoder
from .jepa import JepaModel, jepa_loss, latent_variance
from .text import TextEmbedder

__all__ = [
    "ContextBlock",
    "ConversationContext",
    "JepaModel",
    "MAX_ROUNDS",
    "ObservationEncoder",
    "TextEmbedder",
    "WorldModelBackbone",
    "WorldState",
    "build_context",
    "jepa_loss",
    "latent_variance",
]
