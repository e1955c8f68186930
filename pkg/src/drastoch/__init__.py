"""Run-to-run variance measurement for multi-step research agents.

Total-variance metrics over answer, finding and citation vectors, report
canonicalization, a stochastic information-acquisition simulator, a per-step
variance decomposition and the two mitigations.
"""

from .errors import DrastochError
from .metrics import (
    Level,
    OutputVector,
    TvResult,
    answer_discordance,
    mean_pairwise_cosine,
    tv_estimate,
    tv_result,
    tv_support_size,
)
from .sim import Module, PolicyConfig, WorldSpec, reference_policy, reference_world

__version__ = "0.1.0"

__all__ = [
    "DrastochError",
    "Level",
    "Module",
    "OutputVector",
    "PolicyConfig",
    "TvResult",
    "WorldSpec",
    "answer_discordance",
    "mean_pairwise_cosine",
    "reference_policy",
    "reference_world",
    "tv_estimate",
    "tv_result",
    "tv_support_size",
]
