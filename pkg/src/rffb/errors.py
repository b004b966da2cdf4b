"""Exception types raised across the package."""


class InvalidArgument(ValueError):
    """An argument has the wrong shape, sign or type."""


class DomainError(ValueError):
    """A numeric argument lies outside the domain of a function."""


class PreconditionError(ValueError):
    """A documented precondition of an operation does not hold."""


class ConvergenceError(RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class ConfigError(ValueError):
    """An experiment configuration is malformed.

    ``path`` names the offending field, e.g. ``grid.R[2]``.
    """

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
