"""Omnibus omitted-predictor test over quantile ranks, x boxes, and
propensity-score intervals.

The statistic is the supremum over the grid of normalised sums of
centred residual-sign indicators inside each cell. Its wild bootstrap
replaces the indicator with 1{U_i <= tau} (one uniform per observation
and replication, shared across tau so the multiplier process is coherent
in tau) and subtracts the smoothed conditional CDF of the propensity
score, which accounts for the quantile estimation error.
"""

from __future__ import annotations

import numpy as np

from .data import BandwidthPlan, Dataset
from .errors import ConfigurationError, EmptySampleError, SeltestError
from .grid import BoxIndexer, GridSpec, build_default_grid
from .kernels import EPANECHNIKOV, DiscreteKernelSpec, KernelSpec
from .quantile import cv_bandwidth_undersmoothed, quantile_residuals
from .reports import TestReport, critical_value, p_value
from .rng import RngStream
from .smoothers import (
    PropensityFit,
    cond_cdf_table,
    cv_bandwidth_propensity,
    fit_propensity,
    rule_of_thumb_bandwidths,
)

__all__ = ["statistic_z1", "bootstrap_z1", "run_test1"]

DEFAULT_TAU_GRID = np.round(np.arange(0.1, 0.91, 0.1), 10)


def _argmax_info(indexer: BoxIndexer, tau: float, arg: tuple) -> dict:
    (lo, hi), (p_lo, p_hi) = indexer.cell_bounds(*arg)
    return {
        "tau": float(tau),
        "x_lower": lo.tolist(),
        "x_upper": hi.tolist(),
        "p_lower": p_lo,
        "p_upper": p_hi,
    }


def statistic_z1(
    data: Dataset,
    uhat_by_tau: dict,
    phat: np.ndarray,
    grid: GridSpec,
    indexer: BoxIndexer | None = None,
) -> tuple[float, dict, dict]:
    """Supremum statistic; returns (statistic, per-tau sups, argmax cell)."""
    sel = np.flatnonzero(data.selected)
    if sel.size == 0:
        raise EmptySampleError("no selected observations")
    if indexer is None:
        indexer = BoxIndexer(data.x[sel], np.asarray(phat, float)[sel], grid)
    root_n = np.sqrt(data.n)
    per_tau: dict[float, float] = {}
    best, best_info = -1.0, None
    for tau in grid.tau_grid:
        u = uhat_by_tau[float(tau)]
        ind = u <= 0
        val, arg = indexer.sup_indicator(ind, float(tau))
        val /= root_n
        per_tau[float(tau)] = val
        if val > best:
            best = val
            best_info = _argmax_info(indexer, tau, arg)
    return best, per_tau, best_info


def bootstrap_z1(
    data: Dataset,
    phat: np.ndarray,
    grid: GridSpec,
    F_by_tau: dict,
    R: int,
    stream: RngStream,
    indexer: BoxIndexer | None = None,
) -> np.ndarray:
    """R wild-bootstrap supremum draws.

    ``F_by_tau`` maps each tau to the cached conditional-CDF table at the
    grid's p cutpoints (undefined rows already zeroed). One uniform is
    drawn per observation and replication; the indicator 1{U <= tau} is
    nondecreasing in tau by construction.
    """
    if R < 1:
        raise ConfigurationError("R must be at least 1")
    sel = np.flatnonzero(data.selected)
    if indexer is None:
        indexer = BoxIndexer(data.x[sel], np.asarray(phat, float)[sel], grid)
    root_n = np.sqrt(data.n)
    draws = np.empty(R)
    for rep in range(R):
        U = stream.substream(rep).generator().random(data.n)[sel]
        best = -1.0
        for tau in grid.tau_grid:
            b = (U <= tau).astype(float) - tau
            val, _ = indexer.sup_mixed(b, F_by_tau[float(tau)])
            best = max(best, val / root_n)
        draws[rep] = best
    return draws


def run_test1(
    data: Dataset,
    plan: BandwidthPlan | None = None,
    grid: GridSpec | None = None,
    R: int = 400,
    alphas=(0.05, 0.10),
    stream: RngStream = RngStream(0),
    tau_grid=None,
    p_score: np.ndarray | None = None,
    hx_method: str = "rule",
    trim: float = 0.0,
    kernel: KernelSpec = EPANECHNIKOV,
) -> TestReport:
    """Full first-test pipeline: propensity, residuals, statistic, bootstrap.

    ``p_score`` supplies known selection probabilities (one per row of
    the untrimmed data); otherwise the propensity is estimated with the
    plan's (h_z, lam_z), cross-validated when those are absent.
    ``hx_method`` is "rule" (c_x * sd * n^{-1/3}) or "cv".
    """
    plan = plan or BandwidthPlan()
    tau_grid = DEFAULT_TAU_GRID if tau_grid is None else np.atleast_1d(tau_grid)
    diagnostics: dict = {}
    if p_score is not None:
        p_score = np.asarray(p_score, dtype=float).ravel()
        if p_score.size != data.n:
            raise ConfigurationError("p_score length does not match the sample")

    if trim > 0:
        mask = _trim_mask(data, trim)
        if p_score is not None:
            p_score = p_score[mask]
        data = data.subset(mask)
    if data.n_selected == 0:
        raise EmptySampleError("no selected observations").with_stage("validate")

    try:
        if p_score is not None:
            prop = PropensityFit(phat=p_score, h_z=None)
        else:
            data.require_instrument()
            has_zc = data.zc is not None and data.zc.shape[1] > 0
            if plan.h_z is None and (has_zc or plan.lam_z is None):
                h_z, lam_spec = cv_bandwidth_propensity(data, stream=stream.substream(-1))
                diagnostics["h_z_cv"] = True
            else:
                h_z = plan.h_z
                lam_spec = DiscreteKernelSpec(
                    plan.lam_z if plan.lam_z is not None else np.zeros(
                        data.zd.shape[1] if data.zd is not None else 0
                    )
                )
            prop = fit_propensity(data, h_z, lam_spec, kernel)
            if prop.n_undefined:
                diagnostics["propensity_undefined"] = prop.n_undefined
    except SeltestError as e:
        raise e.with_stage("propensity")

    try:
        if plan.h_x is not None:
            h_x = plan.h_x
        elif hx_method == "cv":
            h_x = cv_bandwidth_undersmoothed(data, plan.r, stream=stream.substream(-2))
        else:
            c_x = plan.c_x if plan.c_x is not None else 4.0
            h_x, _ = rule_of_thumb_bandwidths(data, c_x)
        plan = plan.updated(h_x=h_x)
        fits = quantile_residuals(data, tau_grid, plan, kernel)
    except SeltestError as e:
        raise e.with_stage("quantile-fit")

    uhat = {t: f.uhat for t, f in fits.items()}
    try:
        if grid is None:
            grid = build_default_grid(data, prop.phat, tau_grid)
        sel = np.flatnonzero(data.selected)
        indexer = BoxIndexer(data.x[sel], prop.phat[sel], grid)
        stat, per_tau, argmax = statistic_z1(data, uhat, prop.phat, grid, indexer)
    except SeltestError as e:
        raise e.with_stage("statistic")

    try:
        if plan.h_F is not None:
            h_F = {float(t): plan.h_F for t in grid.tau_grid}
        else:
            _, h_F = rule_of_thumb_bandwidths(
                data, plan.c_x if plan.c_x is not None else 4.0, grid.tau_grid, uhat
            )
        F_by_tau = {}
        undefined_F = {}
        for t in grid.tau_grid:
            t = float(t)
            F, und = cond_cdf_table(
                data, uhat[t], prop.phat, grid.p_cutpoints, h_F[t], kernel
            )
            F[und] = 0.0
            F_by_tau[t] = F
            undefined_F[t] = int(und.sum())
        if any(undefined_F.values()):
            diagnostics["cdf_undefined"] = undefined_F
        draws = bootstrap_z1(data, prop.phat, grid, F_by_tau, R, stream, indexer)
    except SeltestError as e:
        raise e.with_stage("bootstrap")

    diagnostics.update(
        n_boxes=len(indexer.boxes),
        n_p_pairs=int(indexer.pairs.shape[0]),
        grid_degraded=grid.degraded,
    )
    config = {
        "tau_grid": [float(t) for t in grid.tau_grid],
        "h_x": np.asarray(plan.h_x).tolist(),
        "r": plan.r,
        "h_F": {str(t): np.asarray(v).tolist() for t, v in h_F.items()},
        "h_z": None if prop.h_z is None else np.asarray(prop.h_z).tolist(),
        "lam_z": None if prop.lam is None else np.asarray(prop.lam).tolist(),
        "R": R,
        "alphas": list(alphas),
        "trim": trim,
        "seed": stream.seed,
        "stream_id": stream.stream_id,
        "oracle_propensity": p_score is not None,
        "hx_method": "given" if plan.h_x is not None else hx_method,
    }
    return TestReport(
        statistic=stat,
        argmax=argmax,
        per_tau_sup=per_tau,
        boot_draws=draws,
        critical_values={a: critical_value(draws, a) for a in alphas},
        p_value=p_value(draws, stat),
        n_selected=data.n_selected,
        diagnostics=diagnostics,
        config=config,
    )


def _trim_mask(data: Dataset, fraction: float) -> np.ndarray:
    sel = data.selected
    keep = np.ones(data.n, dtype=bool)
    for j in range(data.d_x):
        lo, hi = np.quantile(data.x[sel, j], [fraction, 1.0 - fraction])
        keep &= ~(sel & ((data.x[:, j] < lo) | (data.x[:, j] > hi)))
    return keep
