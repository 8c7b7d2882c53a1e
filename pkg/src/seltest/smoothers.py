"""Kernel smoothers: propensity score, conditional CDF, mean and density.

All estimators are local-constant ratios of kernel sums; evaluation
points where the denominator vanishes are flagged (never imputed) and
the counts surface in test diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import ConfigurationError, DataError, EstimationError
from .kernels import EPANECHNIKOV, DiscreteKernelSpec, KernelSpec
from .rng import RngStream

__all__ = [
    "PropensityFit",
    "fit_propensity",
    "cv_bandwidth_propensity",
    "fit_cond_cdf",
    "cond_cdf_table",
    "nw_mean_and_density",
    "rule_of_thumb_bandwidths",
]

_CHUNK = 512


@dataclass
class PropensityFit:
    """Estimated selection probabilities with the tuning actually used."""

    phat: np.ndarray
    h_z: np.ndarray | None
    lam: np.ndarray | None = None
    undefined: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def n_undefined(self) -> int:
        return int(self.undefined.sum())


def _z_blocks(data: Dataset) -> tuple[np.ndarray | None, np.ndarray | None]:
    zc = data.zc if data.zc is not None and data.zc.shape[1] else None
    zd = data.zd if data.zd is not None and data.zd.shape[1] else None
    if zc is None and zd is None:
        raise DataError("propensity estimation needs selection predictors (zc, zd)")
    return zc, zd


def _kernel_rows(
    zc, zd, zc_ref, zd_ref, h_z, lam_spec, kernel, rows: np.ndarray
) -> np.ndarray:
    """Kernel weights between the given evaluation rows and every sample row."""
    w = np.ones((rows.size, zc_ref.shape[0] if zc_ref is not None else zd_ref.shape[0]))
    if zc_ref is not None:
        diff = zc[rows][:, None, :] - zc_ref[None, :, :]
        w *= np.prod(kernel(diff / h_z), axis=-1)
    if zd_ref is not None:
        lam = lam_spec.lam if lam_spec is not None else np.zeros(zd_ref.shape[1])
        match = zd[rows][:, None, :] == zd_ref[None, :, :]
        w *= np.prod(np.where(match, 1.0, lam), axis=-1)
    return w


def fit_propensity(
    data: Dataset,
    h_z=None,
    lam: DiscreteKernelSpec | None = None,
    kernel: KernelSpec = EPANECHNIKOV,
    leave_one_out: bool = False,
) -> PropensityFit:
    """Local constant estimate of Pr(s = 1 | z) at every sample point.

    Continuous coordinates use the product kernel with bandwidths ``h_z``;
    discrete coordinates use the unordered category kernel. With a
    nonnegative kernel the estimate always lies in [0, 1]. Points with
    zero total weight are flagged as undefined.
    """
    zc, zd = _z_blocks(data)
    if zc is not None:
        if h_z is None:
            raise ConfigurationError("h_z is required for continuous z columns")
        h_z = np.broadcast_to(np.atleast_1d(np.asarray(h_z, dtype=float)), (zc.shape[1],))
        if np.any(h_z <= 0):
            raise ConfigurationError("h_z must be positive")
    if zd is not None and lam is not None and lam.lam.size not in (0, 1, zd.shape[1]):
        raise ConfigurationError("lambda dimension does not match zd")
    n = data.n
    s = data.s.astype(float)
    phat = np.zeros(n)
    undefined = np.zeros(n, dtype=bool)
    for start in range(0, n, _CHUNK):
        rows = np.arange(start, min(start + _CHUNK, n))
        w = _kernel_rows(zc, zd, zc, zd, h_z, lam, kernel, rows)
        if leave_one_out:
            w[np.arange(rows.size), rows] = 0.0
        denom = w.sum(axis=1)
        num = w @ s
        bad = denom <= 0
        undefined[rows] = bad
        with np.errstate(invalid="ignore", divide="ignore"):
            phat[rows] = np.where(bad, np.nan, num / np.where(bad, 1.0, denom))
    return PropensityFit(phat=phat, h_z=h_z, lam=lam.lam if lam else None,
                         undefined=undefined)


def cv_bandwidth_propensity(
    data: Dataset,
    subset_size: int = 450,
    reps: int = 50,
    stream: RngStream | None = None,
    kernel: KernelSpec = EPANECHNIKOV,
    theta_grid: np.ndarray | None = None,
    lam_grid: np.ndarray | None = None,
) -> tuple[np.ndarray | None, DiscreteKernelSpec]:
    """Least-squares cross-validation for the propensity bandwidths.

    Each replication draws a random subset, minimises the leave-one-out
    squared error of the selection indicator over a bandwidth-constant
    grid, and the coordinate-wise median of the per-replication choices
    is rescaled to the full sample size at the local-constant rates
    (n^{-1/(4+d_zc)} continuous, n^{-2/(4+d_zc)} discrete).
    """
    zc, zd = _z_blocks(data)
    d_zc = zc.shape[1] if zc is not None else 0
    stream = stream or RngStream(0)
    if theta_grid is None:
        theta_grid = np.geomspace(0.25, 8.0, 10)
    if lam_grid is None:
        lam_grid = np.array([0.0, 0.1, 0.25, 0.5, 0.8, 1.0])
    if data.n <= subset_size:
        subset_size = data.n
        reps = 1
    rate_c = (subset_size) ** (-1.0 / (4 + d_zc))
    sd_zc = zc.std(axis=0, ddof=1) if zc is not None else None
    if sd_zc is not None and np.any(sd_zc <= 0):
        j = int(np.argmin(sd_zc))
        raise EstimationError(f"zc column {j} has zero variance")

    thetas, lams, failures = [], [], 0
    for rep in range(reps):
        gen = stream.substream(rep).generator()
        rows = (
            np.sort(gen.choice(data.n, size=subset_size, replace=False))
            if subset_size < data.n
            else np.arange(data.n)
        )
        sub = data.subset(rows)
        try:
            best = None
            for theta in (theta_grid if zc is not None else [1.0]):
                h = theta * sd_zc * rate_c if zc is not None else None
                for lam in (lam_grid if zd is not None else [0.0]):
                    spec = (
                        DiscreteKernelSpec(np.full(zd.shape[1], lam))
                        if zd is not None
                        else None
                    )
                    fit = fit_propensity(sub, h, spec, kernel, leave_one_out=True)
                    ok = ~fit.undefined
                    if ok.sum() < subset_size // 2:
                        continue
                    err = float(np.mean((sub.s[ok] - fit.phat[ok]) ** 2))
                    if best is None or err < best[0]:
                        best = (err, theta, lam)
            if best is None:
                raise EstimationError("all CV candidates were undefined")
            thetas.append(best[1])
            lams.append(best[2])
        except EstimationError:
            failures += 1
    if failures > reps // 2:
        raise EstimationError(
            f"cross-validation failed on {failures} of {reps} replications"
        )
    theta = float(np.median(thetas))
    lam_c = float(np.median(lams))
    h_full = (
        theta * sd_zc * data.n ** (-1.0 / (4 + d_zc)) if zc is not None else None
    )
    lam_full = lam_c * (subset_size / data.n) ** (2.0 / (4 + d_zc))
    spec = DiscreteKernelSpec(
        np.full(zd.shape[1], min(1.0, lam_full)) if zd is not None else np.zeros(0)
    )
    return h_full, spec


def cond_cdf_table(
    data: Dataset,
    uhat: np.ndarray,
    phat: np.ndarray,
    cutpoints: np.ndarray,
    h_F: np.ndarray,
    kernel: KernelSpec = EPANECHNIKOV,
) -> tuple[np.ndarray, np.ndarray]:
    """CDF of the propensity score given x, a zero quantile error, and
    selection, evaluated at each selected x_i and every cutpoint.

    ``h_F`` carries one component for the residual kernel followed by one
    per x coordinate. Returns (F, undefined) with F of shape
    (n_selected, n_cutpoints); undefined rows have zero denominator and
    their F values are NaN.
    """
    sel = np.flatnonzero(data.selected)
    h_F = np.atleast_1d(np.asarray(h_F, dtype=float))
    if h_F.size == 1:
        h_F = np.full(1 + data.d_x, h_F[0])
    if h_F.size != 1 + data.d_x:
        raise ConfigurationError(
            "h_F needs one component for the residual plus one per x column"
        )
    ku = kernel(uhat / h_F[0])
    p_sel = phat[sel]
    ind = p_sel[:, None] <= cutpoints[None, :]      # (n_sel, P)
    F = np.empty((sel.size, cutpoints.size))
    undefined = np.zeros(sel.size, dtype=bool)
    x_sel = data.x[sel]
    for start in range(0, sel.size, _CHUNK):
        rows = slice(start, min(start + _CHUNK, sel.size))
        diff = x_sel[rows][:, None, :] - x_sel[None, :, :]
        w = np.prod(kernel(diff / h_F[1:]), axis=-1) * ku[None, :]
        denom = w.sum(axis=1)
        bad = denom <= 0
        undefined[rows] = bad
        with np.errstate(invalid="ignore", divide="ignore"):
            F[rows] = (w @ ind) / np.where(bad, np.nan, denom)[:, None]
    return F, undefined


def fit_cond_cdf(
    data: Dataset,
    tau: float,
    uhat: np.ndarray,
    phat: np.ndarray,
    p: float,
    i: int,
    h_F,
    kernel: KernelSpec = EPANECHNIKOV,
) -> float:
    """Single evaluation of the conditional CDF at (p, x_i); NaN if undefined."""
    sel = np.flatnonzero(data.selected)
    pos = np.flatnonzero(sel == i)
    if pos.size == 0:
        raise ConfigurationError(f"observation {i} is not selected")
    F, undefined = cond_cdf_table(data, uhat, phat, np.array([p]), h_F, kernel)
    return float(F[pos[0], 0])


def nw_mean_and_density(
    data: Dataset,
    x0=None,
    h=None,
    kernel: KernelSpec = EPANECHNIKOV,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Kernel regression mean on the selected sample and the sample density.

    Returns (mhat, fhat, undefined). The density uses all observations,
    f(x0) = sum_j K((x0-x_j)/h) / (n prod h); the mean is the kernel
    average of y over selected observations. Points where no selected
    observation carries weight are flagged and their mean is NaN.
    """
    if h is None:
        raise ConfigurationError("a bandwidth is required")
    h = np.broadcast_to(np.atleast_1d(np.asarray(h, dtype=float)), (data.d_x,))
    if np.any(h <= 0):
        raise ConfigurationError("bandwidth must be positive")
    x0 = data.x[data.selected] if x0 is None else np.atleast_2d(np.asarray(x0, float))
    y_clean = np.where(data.s == 1, np.nan_to_num(data.y), 0.0)
    s = data.s.astype(float)
    n = data.n
    norm = n * float(np.prod(h))
    m = np.empty(x0.shape[0])
    f = np.empty(x0.shape[0])
    undefined = np.zeros(x0.shape[0], dtype=bool)
    for start in range(0, x0.shape[0], _CHUNK):
        rows = slice(start, min(start + _CHUNK, x0.shape[0]))
        diff = x0[rows][:, None, :] - data.x[None, :, :]
        W = np.prod(kernel(diff / h), axis=-1)
        f[rows] = W.sum(axis=1) / norm
        denom = W @ s
        bad = denom <= 0
        undefined[rows] = bad
        with np.errstate(invalid="ignore", divide="ignore"):
            m[rows] = (W @ (s * y_clean)) / np.where(bad, np.nan, denom)
    return m, f, undefined


def rule_of_thumb_bandwidths(
    data: Dataset,
    c_x: float,
    tau_grid=None,
    uhat_by_tau: dict | None = None,
) -> tuple[np.ndarray, dict[float, np.ndarray] | None]:
    """Scale-adapted plug-in bandwidths.

    h_x is c_x * sd(x_j) * n^{-1/3} per coordinate of x (standard
    deviations over the selected sample). When residuals are supplied,
    each tau also gets an h_F vector with components 2.2 * sd * n^{-1/6}
    for the residual argument and every x coordinate, so all kernel
    arguments are measured in their own scale.
    """
    if data.n < 2:
        raise EstimationError("need at least two observations")
    sel = data.selected
    if sel.sum() < 2:
        raise EstimationError("need at least two selected observations")
    sd_x = data.x[sel].std(axis=0, ddof=1)
    if np.any(sd_x <= 0):
        j = int(np.argmin(sd_x))
        raise EstimationError(f"x column {j} has zero variance on the selected sample")
    n = data.n
    h_x = c_x * sd_x * n ** (-1.0 / 3.0)
    if uhat_by_tau is None:
        return h_x, None
    h_F: dict[float, np.ndarray] = {}
    for tau, u in uhat_by_tau.items():
        sd_u = np.asarray(u).std(ddof=1)
        if sd_u <= 0:
            sd_u = 1e-12
        h_F[float(tau)] = 2.2 * np.concatenate([[sd_u], sd_x]) * n ** (-1.0 / 6.0)
    return h_x, h_F
