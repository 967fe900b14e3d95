"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Tensor dimensions do not fit the requested operation."""


class CapacityError(ValueError):
    """Problem size exceeds what an exact oracle or exact contraction can hold."""


class StateError(RuntimeError):
    """Operation is not valid for the current coarse-graining state."""


class NumericError(ArithmeticError):
    """Non-finite data, failed convergence, or a non-positive contraction value.

    ``estimate`` and ``residual`` carry the last iterate and achieved
    tolerance when the failure comes from an iterative method.
    """

    def __init__(self, message, estimate=None, residual=None):
        super().__init__(message)
        self.estimate = estimate
        self.residual = residual
