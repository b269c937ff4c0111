"""Exception hierarchy shared across the package."""


class ReconError(Exception):
    """Base class for all errors raised by nurbsct.

    ``detail`` carries machine-readable context (offending index, value...).
    """

    def __init__(self, message, **detail):
        super().__init__(message)
        self.detail = detail


class DomainError(ReconError, ValueError):
    """An argument lies outside the domain of an operation."""


class DegenerateError(ReconError, ArithmeticError):
    """A computation has no meaningful answer (zero denominators, empty sets)."""


class ConfigError(ReconError):
    """Invalid or inconsistent experiment configuration."""


class StageError(ReconError):
    """Wraps a failure inside a named pipeline stage."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
