"""Exception types raised across the package."""


class ValidationError(ValueError):
    """Input failed a structural check.

    ``invariant`` names the property that was violated (``"hermitian"``,
    ``"positive_definite"``, ``"trace"``, ``"dimension"``, ...).
    """

    def __init__(self, message, invariant=None):
        super().__init__(message)
        self.invariant = invariant


class NumericError(ArithmeticError):
    """A matrix that must be invertible or positive definite was not."""


class DegenerateHessianError(NumericError):
    pass


class ConvergenceError(RuntimeError):
    """Fixed-point iteration did not reach tolerance."""

    def __init__(self, message, residual, iterations):
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations
