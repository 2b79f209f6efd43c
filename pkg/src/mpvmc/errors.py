"""Exception types shared across the package."""


class MpvmcError(Exception):
    """Base class for all package errors."""


class EnumerationTooLargeError(MpvmcError):
    """State-space enumeration requested beyond the supported system size."""


class EvaluationFailureError(MpvmcError):
    """A numerical evaluation produced NaN/inf; carries offending context."""

    def __init__(self, message, context=None):
        super().__init__(message)
        self.context = context


class ReducibleKernelError(MpvmcError):
    """Transition kernel is not irreducible."""


class DegenerateInputError(MpvmcError):
    """Input data is degenerate (constant sample, empty batch, ...)."""


class SolverError(MpvmcError):
    """A linear solve failed or violated its residual contract."""


class ConfigError(MpvmcError):
    """Experiment configuration is malformed or fails schema validation."""
