"""Exception types raised across the library.

Every error below signals a *diagnosable* failure mode (degenerate data,
ill-posed estimating equation, a fit that never reached optimality, ...)
rather than a programming bug, so callers can catch them selectively.
"""


class OptevalError(Exception):
    """Base class for all library errors."""


class NonFiniteCost(OptevalError):
    """A cost evaluation produced NaN or infinity."""


class NonFiniteGradient(OptevalError):
    """A cost gradient produced NaN or infinity."""


class RowMismatch(OptevalError):
    """Influence rows do not align one-to-one with dataset rows."""


class MissingCovariates(OptevalError):
    """A contextual operation was called on data without covariates."""


class SingularJacobian(OptevalError):
    """The averaged estimating-equation Jacobian is not invertible."""


class SingularHessian(OptevalError):
    """The averaged cost Hessian is not invertible."""


class SingularDesign(OptevalError):
    """The regression design matrix is rank deficient."""


class SingularInnerHessian(OptevalError):
    """The inner-problem Hessian in an implicit-function solve is singular."""


class NotAtOptimum(OptevalError):
    """The supplied parameter does not satisfy first-order optimality."""


class LICQViolation(OptevalError):
    """Active-constraint gradients are linearly dependent."""


class NegativeMultiplier(OptevalError):
    """A recovered Lagrange multiplier is negative: wrong active set."""


class FitFailure(OptevalError):
    """A pipeline refit (fold, replicate, leave-one-out) failed."""

    def __init__(self, msg, index=None):
        super().__init__(msg)
        self.index = index


class MaxIterExceeded(OptevalError):
    """An iterative solver hit its iteration cap before converging."""


class AscentDetected(OptevalError):
    """Line search could not find a decreasing step."""


class DualDegenerate(OptevalError):
    """The DRO dual multiplier collapsed to zero with a positive radius."""


class InfeasibleStart(OptevalError):
    """The constrained solver was given an infeasible starting point."""


class KKTFailure(OptevalError):
    """The constrained solver could not certify a KKT point."""


class DegenerateSample(OptevalError):
    """A sample has zero variance where spread is required."""


class ModelEvalFailure(OptevalError):
    """A parametric model produced a non-finite expected cost."""


class ConfigError(OptevalError):
    """An experiment configuration failed validation."""

    def __init__(self, msg, field=None):
        super().__init__(f"{field}: {msg}" if field else msg)
        self.field = field
