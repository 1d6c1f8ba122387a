"""Exception types raised across the package."""


class OTError(Exception):
    """Base class for all errors raised by otsub."""


class ValidationError(OTError, ValueError):
    """Input data violates a documented invariant."""


class InvalidExponentError(ValidationError):
    pass


class SpaceMismatchError(ValidationError):
    pass


class DimensionError(ValidationError):
    pass


class OracleSizeError(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class DegenerateCostError(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class FitError(ValidationError):
    pass


class SolverError(OTError, RuntimeError):
    """A back-end failed; ``diagnostics`` carries whatever it knew."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class NonConvergenceError(SolverError):
    """Iteration budget exhausted.

    ``best`` holds the last feasible iterate (a TransportPlan for the
    simplex, a plan plus its marginal violation for Sinkhorn).
    """

    def __init__(self, message, best=None, diagnostics=None):
        super().__init__(message, diagnostics)
        self.best = best


class NumericUnderflowError(SolverError):
    pass


class RepetitionError(SolverError):
    """A back-end failure inside one repetition of the subsampler."""

    def __init__(self, repetition, cause):
        super().__init__(f"repetition {repetition} failed: {cause}")
        self.repetition = repetition
        self.__cause__ = cause
