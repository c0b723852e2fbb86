"""Shared exception types for the toolkit."""


class DataError(ValueError):
    """Malformed, inconsistent, or out-of-contract input data."""


class ConvergenceError(RuntimeError):
    """An iterative solve failed to reach its tolerance.

    ``residual`` carries the final (relative) residual when known.
    """

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual
