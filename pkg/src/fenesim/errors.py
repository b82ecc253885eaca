"""Exception types shared across the package."""


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of a function."""


class ConfigError(ValueError):
    """Raised for invalid model parameters or run configuration."""


class QuadratureError(RuntimeError):
    """Raised when a quadrature rule is too coarse for the requested basis."""


class CapacityError(ValueError):
    """Raised when more basis functions are requested than the grid supports."""


class PicardDivergence(RuntimeError):
    """Raised when the per-step fixed-point iteration fails to converge."""

    def __init__(self, message, step=None, iterations=None, change=None):
        super().__init__(message)
        self.step = step
        self.iterations = iterations
        self.change = change
