"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: ConfigurationError and DataError are
usage/data problems (exit 1), ThinSetError and EmptySampleError are
statistical infeasibility (exit 2).
"""


class SeltestError(Exception):
    """Base class for all package errors."""

    stage: str | None = None

    def with_stage(self, stage: str) -> "SeltestError":
        self.stage = stage
        return self

    def __str__(self) -> str:  # pragma: no cover - trivial
        msg = super().__str__()
        return f"[{self.stage}] {msg}" if self.stage else msg


class ConfigurationError(SeltestError):
    """Invalid tuning parameters, grids, or option combinations."""


class DataError(SeltestError):
    """Malformed input data (schema, types, missing values)."""


class EstimationError(SeltestError):
    """A nonparametric fit could not be carried out at some point."""


class EmptySampleError(SeltestError):
    """No selected observations available for a statistic."""


class ThinSetError(SeltestError):
    """Too few observations near the propensity-score boundary.

    Carries the number of observations found in the kernel window so
    callers can report it and suggest remediation.
    """

    def __init__(self, message: str, n_window: int = 0):
        super().__init__(message)
        self.n_window = n_window
