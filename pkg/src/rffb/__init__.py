"""Random Fourier feature error bounds for the Gaussian kernel, with Monte Carlo checks."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    ConvergenceError,
    DomainError,
    InvalidArgument,
    PreconditionError,
)
