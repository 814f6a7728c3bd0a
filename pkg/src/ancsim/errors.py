"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: configuration errors
exit 2, divergence exits 3, I/O failures exit 4.
"""


class ConfigError(ValueError):
    """A scenario, algorithm, or noise configuration violates an invariant."""


class DataError(ValueError):
    """Input data is unusable (non-finite samples, too-short signals, ...)."""


class SingularMatrixError(RuntimeError):
    """A correlation matrix is singular or too ill-conditioned to solve."""

    def __init__(self, message: str, condition_estimate: float | None = None):
        super().__init__(message)
        self.condition_estimate = condition_estimate


class DivergedError(RuntimeError):
    """An adaptive controller produced non-finite state; the run was aborted."""
