"""Exception hierarchy shared by all latsum modules."""


class LatsumError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(LatsumError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class PrecisionError(LatsumError):
    """A quantity cannot be resolved at working precision.

    Raised e.g. when a continued-fraction expansion hits a partial
    quotient so large that the input is rational to working precision.
    """


class ResourceError(LatsumError):
    """A computation would exceed a configured resource cap."""

    def __init__(self, message, cap=None, estimate=None):
        super().__init__(message)
        self.cap = cap
        self.estimate = estimate


class BoundedSearchError(LatsumError):
    """A bounded search ended without a witness.

    Carries the cap so the caller can decide to retry with a larger one.
    A witness always exists for irrational inputs (Dirichlet), so this
    only signals that the cap was too small.
    """

    def __init__(self, message, cap):
        super().__init__(message)
        self.cap = cap


class NearResonanceError(LatsumError):
    """A denominator factor fell below the resolvable threshold.

    Signals that some theta component is too close to a rational at
    working precision for the requested sum.  Carries the coordinate
    (0-based, within the first d-1) and the layer index at fault.
    """

    def __init__(self, message, coordinate, layer):
        super().__init__(message)
        self.coordinate = coordinate
        self.layer = layer


class UnsupportedCutoffError(LatsumError, TypeError):
    """The operation requires a product-form cutoff function."""
