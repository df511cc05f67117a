"""Exception types shared across the package."""


class ModelError(ValueError):
    """A chain model document violates the schema or a physical invariant."""


class NumericalError(RuntimeError):
    """A numerical routine produced a non-finite or degenerate result."""


class ConvergenceError(NumericalError):
    """An iterative solver hit its iteration cap.

    The best residual seen is attached so callers can decide whether the
    partial answer is still usable.
    """

    def __init__(self, message, best_residual=None, best_value=None):
        super().__init__(message)
        self.best_residual = best_residual
        self.best_value = best_value
