"""Exception types raised across the package."""


class ExtremalError(Exception):
    """Base class for all package errors."""


class InputError(ExtremalError, ValueError):
    """Malformed or inconsistent input data (bad shapes, asymmetry, NaNs)."""


class DimensionError(InputError):
    pass


class SingularMatrixError(ExtremalError, ValueError):
    """A matrix that must be positive definite is (numerically) not."""


class PreconditionError(ExtremalError, ValueError):
    """An operation was called outside its documented domain."""


class InfeasibleError(PreconditionError):
    """A covariance violates the constraint ``0 <= K <= S``."""


class SolverError(ExtremalError, RuntimeError):
    """The matrix solver could not produce a usable point."""


class QuadratureError(ExtremalError, RuntimeError):
    """Adaptive quadrature hit its refinement cap before converging."""
