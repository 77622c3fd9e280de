"""Exception types raised across the package."""


class HelixError(Exception):
    """Base class for all package errors."""


class DomainError(HelixError, ValueError):
    """Argument outside the domain of a special function."""


class SingularInputError(HelixError, ValueError):
    """A Green's function representation was asked to evaluate at its singularity."""


class SingularPairError(HelixError, ValueError):
    """Coincident points passed to an unregularized pair kernel."""


class NormalizationError(HelixError, ValueError):
    """A diagnostic that requires unit total circulation got something else."""


class InsufficientDataError(HelixError, ValueError):
    """Too few samples for a fit or sweep."""


class IntegrationBlowupError(HelixError, FloatingPointError):
    """Non-finite particle positions appeared during time integration."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"non-finite particle position at step {step}")


class ConfigError(HelixError, ValueError):
    """A configuration document could not be parsed."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)


class ValidationError(HelixError, ValueError):
    """A configuration value violates an invariant."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
