"""Exception types shared across the package."""


class PassDeformError(Exception):
    """Base class for all package errors."""


class ValidationError(PassDeformError, ValueError):
    """Malformed input: wrong shape, non-Hermitian, bad probabilities, ..."""


class ResourceError(PassDeformError):
    """A requested object would exceed the configured size cap."""


class NumericalError(PassDeformError, ArithmeticError):
    """An eigensolver or matrix function failed to produce a trustworthy result."""


class ConsistencyError(PassDeformError):
    """A quantity that must be real (or otherwise constrained) was not, beyond tolerance."""


class DomainError(PassDeformError, ValueError):
    """Input outside the mathematical domain of the operation (e.g. log of zero)."""
