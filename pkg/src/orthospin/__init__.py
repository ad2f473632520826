"""Exact-enumeration and Monte Carlo checks of mean-field factorization in
Curie-Weiss and orthogonal-coupling (sine / MPR) spin models."""

from .errors import (
    CapacityError,
    DimensionError,
    DomainError,
    FitError,
    InsufficientMomentsError,
    InvalidSizeError,
)
from .gibbs_exact import EnsembleSummary, GibbsContext, SpinConfiguration
from .interactions import (
    InteractionMatrix,
    Kind,
    SelfInteraction,
    build_curie_weiss,
    build_random_orthogonal,
    build_sine,
)

__version__ = "0.1.0"

__all__ = [
    "CapacityError", "DimensionError", "DomainError", "FitError", "InsufficientMomentsError",
    "InvalidSizeError", "EnsembleSummary", "GibbsContext", "SpinConfiguration",
    "InteractionMatrix", "Kind", "SelfInteraction", "build_curie_weiss",
    "build_random_orthogonal", "build_sine",
]
