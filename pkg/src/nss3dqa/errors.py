"""Exception types shared across the package."""


class Nss3dqaError(Exception):
    """Base class for all package errors."""


class ModelFormatError(Nss3dqaError):
    """Raised when a model file cannot be parsed or written."""


class InsufficientPointsError(Nss3dqaError):
    """Raised when a model has too few points for the requested operation."""


class NonManifoldEdgeError(Nss3dqaError):
    """Raised when a mesh edge is shared by more than two faces."""

    def __init__(self, edge, count):
        self.edge = tuple(edge)
        self.count = count
        super().__init__(
            f"edge {self.edge} is shared by {count} faces (at most 2 allowed)"
        )


class DegenerateDistributionError(Nss3dqaError):
    """Raised when a distribution fit is requested on degenerate data."""


class ConvergenceError(Nss3dqaError):
    """Raised when an iterative solver fails to reach its tolerance."""


class ModelFileError(Nss3dqaError):
    """Raised when a serialized regression model cannot be loaded."""


class CorrelationUndefinedError(Nss3dqaError):
    """Raised when a correlation is requested on zero-variance input.

    Carries the RMSE, which is still well defined.
    """

    def __init__(self, message, rmse):
        self.rmse = rmse
        super().__init__(message)
