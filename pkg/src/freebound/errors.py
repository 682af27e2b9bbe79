"""Exception hierarchy shared across the package."""


class FreeBoundaryError(Exception):
    """Base class for all package errors."""


class DomainViolation(FreeBoundaryError, ValueError):
    """A state or parameter lies outside the admissible domain."""


class AssumptionViolation(FreeBoundaryError, ValueError):
    """The model primitives break a standing assumption (e.g. r <= kappa)."""


class UnsupportedConfiguration(FreeBoundaryError, ValueError):
    """The requested (diffusion, profit) pair has no implementation."""


class NumericalFailure(FreeBoundaryError, RuntimeError):
    """A numerical kernel did not converge."""


class QuadratureError(NumericalFailure):
    """Adaptive quadrature exhausted its budget.

    The partial estimate and its error bound are kept on the exception.
    """

    def __init__(self, message, value=float("nan"), abs_error=float("inf")):
        super().__init__(message)
        self.value = value
        self.abs_error = abs_error


class RootNotBracketed(NumericalFailure):
    """No sign change was found within the bracket expansion budget."""


class MonotonicityViolation(NumericalFailure):
    """A boundary curve decreases beyond the allowed slack."""

    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = tuple(indices)
