class TvwaveError(Exception):
    pass


class ValidationError(TvwaveError, ValueError):
    """Invalid configuration, geometry, or array shapes. Raised before any solve."""


class InstabilityError(TvwaveError, ArithmeticError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class SolverError(TvwaveError, RuntimeError):
    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration
