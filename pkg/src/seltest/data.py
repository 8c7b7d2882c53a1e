"""Sample container and tuning-parameter plan.

A Dataset holds the outcome (observed only where the selection indicator
is one), the outcome-equation covariates x, and the selection-equation
predictors split into continuous (zc) and discrete (zd) blocks. At least
one z column must be excluded from x (the instrument); x may coincide
with zc otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, DataError

__all__ = ["Dataset", "BandwidthPlan", "trim_x_tails"]


def _as_2d(a, name: str) -> np.ndarray:
    if a is None:
        return np.zeros((0, 0))
    a = np.asarray(a)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise DataError(f"{name} must be one- or two-dimensional")
    return a


@dataclass(frozen=True)
class Dataset:
    """Observations (y, x, zc, zd, s); y is NaN wherever s = 0."""

    y: np.ndarray
    x: np.ndarray
    s: np.ndarray
    zc: np.ndarray | None = None
    zd: np.ndarray | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        x = _as_2d(self.x, "x").astype(float)
        s = np.asarray(self.s).ravel()
        zc = _as_2d(self.zc, "zc").astype(float) if self.zc is not None else None
        zd = _as_2d(self.zd, "zd") if self.zd is not None else None
        n = y.size
        for name, block in (("x", x), ("zc", zc), ("zd", zd)):
            if block is not None and block.shape[0] != n:
                raise DataError(f"{name} has {block.shape[0]} rows, expected {n}")
        if s.size != n:
            raise DataError(f"s has {s.size} entries, expected {n}")
        if not np.all(np.isin(s, (0, 1))):
            raise DataError("selection indicator must be binary")
        s = s.astype(np.int8)
        if np.any(s == 1) and not np.all(np.isfinite(y[s == 1])):
            raise DataError("outcome must be finite wherever the selection indicator is 1")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "zc", zc)
        object.__setattr__(self, "zd", zd)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def d_x(self) -> int:
        return self.x.shape[1]

    @property
    def n_selected(self) -> int:
        return int(self.s.sum())

    @property
    def selected(self) -> np.ndarray:
        return self.s == 1

    def require_instrument(self) -> None:
        """Check that some z column is not also an x column (exclusion restriction)."""
        blocks = []
        if self.zc is not None and self.zc.shape[1]:
            blocks.append(self.zc)
        if self.zd is not None and self.zd.shape[1]:
            blocks.append(self.zd.astype(float))
        if not blocks:
            raise DataError("no selection predictors (zc, zd) were provided")
        for block in blocks:
            for j in range(block.shape[1]):
                col = block[:, j]
                if not any(
                    np.array_equal(col, self.x[:, k]) for k in range(self.d_x)
                ):
                    return
        raise DataError(
            "every z column coincides with an x column; at least one excluded "
            "instrument is required"
        )

    def subset(self, mask: np.ndarray) -> "Dataset":
        return Dataset(
            y=self.y[mask],
            x=self.x[mask],
            s=self.s[mask],
            zc=self.zc[mask] if self.zc is not None else None,
            zd=self.zd[mask] if self.zd is not None else None,
        )


def trim_x_tails(data: Dataset, fraction: float = 0.025) -> Dataset:
    """Drop selected observations in the outer tails of each x coordinate.

    Cutoffs are the per-coordinate ``fraction`` and ``1 - fraction``
    quantiles of the selected subsample; selected rows outside the box are
    removed entirely, unselected rows are kept.
    """
    if not 0.0 <= fraction < 0.5:
        raise ConfigurationError("trim fraction must lie in [0, 0.5)")
    if fraction == 0.0 or data.n_selected == 0:
        return data
    sel = data.selected
    keep = np.ones(data.n, dtype=bool)
    for j in range(data.d_x):
        lo, hi = np.quantile(data.x[sel, j], [fraction, 1.0 - fraction])
        outside = sel & ((data.x[:, j] < lo) | (data.x[:, j] > hi))
        keep &= ~outside
    return data.subset(keep)


@dataclass(frozen=True)
class BandwidthPlan:
    """All tuning parameters used by the tests.

    ``h_x`` drives the local polynomial quantile fit of order ``r``;
    ``h_F`` smooths the conditional CDF entering the first test's
    bootstrap (one component for the residual argument followed by one
    per x coordinate); ``h_z``/``lam_z`` tune the propensity estimator;
    ``delta`` and ``h_p`` locate the near-one window of the second test,
    with ``eta``/``epsilon``/``c_scale`` governing the data-driven choice.
    """

    h_x: np.ndarray | None = None
    r: int = 3
    h_F: np.ndarray | None = None
    h_z: np.ndarray | None = None
    lam_z: np.ndarray | None = None
    h_p: float | None = None
    delta: float | None = None
    eta: float | None = None
    epsilon: float = 0.1
    c_scale: float = 1.0
    c_x: float | None = None

    def __post_init__(self):
        for name in ("h_x", "h_F", "h_z"):
            v = getattr(self, name)
            if v is not None:
                v = np.atleast_1d(np.asarray(v, dtype=float))
                if np.any(v <= 0):
                    raise ConfigurationError(f"{name} must be positive")
                object.__setattr__(self, name, v)
        if self.r < 0:
            raise ConfigurationError("polynomial order r must be nonnegative")
        if self.h_p is not None and self.h_p <= 0:
            raise ConfigurationError("h_p must be positive")
        if self.delta is not None and not 0.0 < self.delta <= 1.0:
            raise ConfigurationError("delta must lie in (0, 1]")
        if self.eta is not None and not 0.0 <= self.eta < 1.0:
            raise ConfigurationError("eta must lie in [0, 1)")
        if self.epsilon <= 0:
            raise ConfigurationError("epsilon must be positive")

    @property
    def trim_width(self) -> float | None:
        """H = 1 - delta, the distance of the window centre from one."""
        return None if self.delta is None else 1.0 - self.delta

    def updated(self, **kwargs) -> "BandwidthPlan":
        return replace(self, **kwargs)
