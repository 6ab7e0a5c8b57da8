class WGError(Exception):
    """Base class for numerical failures in the package."""


class DegenerateElementError(WGError, ValueError):
    def __init__(self, message, element=None):
        super().__init__(message)
        self.element = element


class NotPositiveDefiniteError(WGError):
    """Cholesky broke down: the matrix is not symmetric positive definite."""


class ConvergenceError(WGError):
    """The iterative solver hit its iteration cap before the tolerance."""
