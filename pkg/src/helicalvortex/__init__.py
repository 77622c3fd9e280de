"""Vortex-blob simulation and kernel library for helically symmetric Euler flows."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    DomainError,
    HelixError,
    InsufficientDataError,
    IntegrationBlowupError,
    NormalizationError,
    SingularInputError,
    SingularPairError,
    ValidationError,
)
