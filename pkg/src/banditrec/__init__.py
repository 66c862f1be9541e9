"""Two-stage topic/item contextual bandits with UCB policies and an offline click simulator."""

from banditrec.glm import DesignState, GlmCoefficients, sigmoid
from banditrec.simulator import GroundTruthModel, LoggedInteraction

__all__ = [
    "DesignState",
    "GlmCoefficients",
    "sigmoid",
    "GroundTruthModel",
    "LoggedInteraction",
]
