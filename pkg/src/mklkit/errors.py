"""Exception hierarchy shared by every module of the toolkit."""


class MKLError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(MKLError, ValueError):
    """Inputs violate a documented precondition."""


class MatrixValidationError(ValidationError):
    """A matrix is not symmetric, not finite, or not PSD within tolerance."""


class IrreparableMatrixError(MKLError):
    """Ridge repair could not make a matrix PSD within the doubling cap."""


class InfeasibleProblemError(ValidationError):
    """The SVM dual has no nontrivial feasible point (e.g. one class only)."""


class DegenerateDirectionError(MKLError):
    """A closed-form weight update received an all-zero direction."""


class NonConvergenceError(MKLError):
    """An iterative solver did not converge and the caller asked to fail."""
