"""Exception types shared across the package."""


class VbpgError(Exception):
    """Base class for all package errors."""


class DomainError(VbpgError):
    """A point produced a non-finite function value where finiteness is required."""


class NumericError(VbpgError):
    """NaN or other numeric failure; the message identifies the offending term."""


class RegimeError(VbpgError):
    """A step-size / modulus regime required by an inequality does not hold."""


class NonDescentError(RegimeError):
    """The configured constants give a <= 0, so monotone descent is not guaranteed."""


class CapabilityError(VbpgError):
    """A required analytic oracle is missing from the problem."""


class InnerSolverError(VbpgError):
    """The inner subproblem solver did not reach its tolerance within the cap."""

    def __init__(self, message, residual=None, iters=None):
        super().__init__(message)
        self.residual = residual
        self.iters = iters


class TargetValueError(VbpgError):
    """A supplied target value is not a strict lower value on the tail."""


class InsufficientSamplesError(VbpgError):
    """Rejection sampling accepted too few points to certify anything."""


class ConfigError(VbpgError):
    """Malformed or inconsistent experiment configuration."""
