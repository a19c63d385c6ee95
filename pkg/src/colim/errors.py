"""Exception types raised by the estimators and solvers."""


class ColimError(Exception):
    """Base class for all package errors."""


class ShapeError(ColimError, ValueError):
    """Input matrix has the wrong shape or contains non-finite entries."""


class NotPositiveDefiniteError(ColimError, ValueError):
    pass


class BranchCutError(ColimError):
    """An eigenvalue sits on the branch cut of the principal logarithm."""


class DecompositionError(ColimError):
    """Eigendecomposition is too ill-conditioned to be trusted (defective input)."""


class SingularSystemError(ColimError):
    """Linear system is singular or numerically rank deficient.

    Attributes
    ----------
    cond : float
        2-norm condition number estimate of the offending system.
    """

    def __init__(self, message, cond=float("inf")):
        super().__init__(f"{message} (condition number {cond:.3e})")
        self.cond = cond


class SimulationError(ColimError):
    """Integration produced a non-finite state."""


class InsufficientDataError(ColimError, ValueError):
    pass
