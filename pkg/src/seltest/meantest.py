"""Conditional-mean variant of the omnibus test.

The statistic weights each selected observation's regression residual by
the sample density at its covariates and sums inside grid cells (weak
propensity-interval bounds here, in both the statistic and its
bootstrap). The wild bootstrap perturbs residuals with mean-zero,
unit-variance multipliers, rebuilds the outcome, and refits the kernel
mean; since the covariates and bandwidth are unchanged, the kernel
weight matrix is computed once and only the numerator of the ratio moves
across replications.
"""

from __future__ import annotations

import numpy as np

from .data import BandwidthPlan, Dataset
from .errors import ConfigurationError, EmptySampleError, SeltestError
from .grid import BoxIndexer, GridSpec, build_default_grid
from .kernels import EPANECHNIKOV, DiscreteKernelSpec, KernelSpec
from .reports import MeanTestReport, critical_value, p_value
from .rng import RngStream
from .smoothers import PropensityFit, cv_bandwidth_propensity, fit_propensity
from .test1 import _trim_mask

__all__ = ["statistic_z1m", "bootstrap_z1m", "run_meantest"]

_CHUNK = 1024


class _MeanFitCache:
    """Kernel weight matrix over the selected evaluation points, reused by
    every bootstrap refit."""

    def __init__(self, data: Dataset, h: np.ndarray, kernel: KernelSpec):
        sel = np.flatnonzero(data.selected)
        self.sel = sel
        y_clean = np.where(data.s == 1, np.nan_to_num(data.y), 0.0)
        self.y_sel = y_clean[sel]
        diff = data.x[sel][:, None, :] - data.x[None, :, :]
        W = np.prod(kernel(diff / h), axis=-1)       # (n_sel, n)
        self.fhat = W.sum(axis=1) / (data.n * float(np.prod(h)))
        self.Ws = W[:, sel]                          # weights on selected columns
        self.denom = self.Ws.sum(axis=1)
        self.undefined = self.denom <= 0

    def mean(self, y_sel: np.ndarray) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return (self.Ws @ y_sel) / np.where(self.undefined, np.nan, self.denom)


def _cell_weights(cache: _MeanFitCache, y_sel: np.ndarray) -> np.ndarray:
    m = cache.mean(y_sel)
    w = (y_sel - m) * cache.fhat
    return np.where(cache.undefined, 0.0, w)


def statistic_z1m(
    data: Dataset,
    phat: np.ndarray,
    grid: GridSpec,
    cache: _MeanFitCache,
    indexer: BoxIndexer | None = None,
) -> tuple[float, dict]:
    """Supremum of the density-weighted residual sums over the grid."""
    sel = cache.sel
    if sel.size == 0:
        raise EmptySampleError("no selected observations")
    if indexer is None:
        indexer = BoxIndexer(data.x[sel], np.asarray(phat, float)[sel], grid)
    w = _cell_weights(cache, cache.y_sel)
    val, arg = indexer.sup_weights_exact(w)
    (lo, hi), (p_lo, p_hi) = indexer.cell_bounds(*arg)
    argmax = {
        "x_lower": lo.tolist(),
        "x_upper": hi.tolist(),
        "p_lower": p_lo,
        "p_upper": p_hi,
    }
    return val / np.sqrt(data.n), argmax


def _multipliers(kind: str, gen: np.random.Generator, n: int) -> np.ndarray:
    if kind == "rademacher":
        return np.where(gen.random(n) < 0.5, -1.0, 1.0)
    if kind == "mammen":
        golden = (1.0 + np.sqrt(5.0)) / 2.0
        prob_low = golden / np.sqrt(5.0)
        low, high = 1.0 - golden, golden
        return np.where(gen.random(n) < prob_low, low, high)
    raise ConfigurationError(f"unknown multiplier law {kind!r}")


def bootstrap_z1m(
    data: Dataset,
    phat: np.ndarray,
    grid: GridSpec,
    cache: _MeanFitCache,
    R: int,
    stream: RngStream,
    multiplier: str = "rademacher",
    indexer: BoxIndexer | None = None,
) -> np.ndarray:
    """R wild-bootstrap draws: y* = mhat + v (y - mhat), refit, re-sup."""
    if R < 1:
        raise ConfigurationError("R must be at least 1")
    sel = cache.sel
    if indexer is None:
        indexer = BoxIndexer(data.x[sel], np.asarray(phat, float)[sel], grid)
    mhat = cache.mean(cache.y_sel)
    resid = np.where(cache.undefined, 0.0, cache.y_sel - mhat)
    base = np.where(cache.undefined, cache.y_sel, mhat)
    root_n = np.sqrt(data.n)
    draws = np.empty(R)
    for rep in range(R):
        gen = stream.substream(rep).generator()
        v = _multipliers(multiplier, gen, sel.size)
        y_star = base + v * resid
        w = _cell_weights(cache, y_star)
        val, _ = indexer.sup_weights_prefix(w)
        draws[rep] = val / root_n
    return draws


def run_meantest(
    data: Dataset,
    plan: BandwidthPlan | None = None,
    grid: GridSpec | None = None,
    R: int = 400,
    alphas=(0.05, 0.10),
    stream: RngStream = RngStream(0),
    p_score: np.ndarray | None = None,
    multiplier: str = "rademacher",
    trim: float = 0.0,
    kernel: KernelSpec = EPANECHNIKOV,
) -> MeanTestReport:
    """Full conditional-mean test pipeline.

    The default bandwidth follows h_x = c_x sd(x_j) n^{-1/3} with
    c_x = 0.25 unless the plan fixes h_x.
    """
    plan = plan or BandwidthPlan()
    diagnostics: dict = {}
    if p_score is not None:
        p_score = np.asarray(p_score, dtype=float).ravel()
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
            if plan.h_z is None:
                h_z, lam_spec = cv_bandwidth_propensity(data, stream=stream.substream(-1))
            else:
                h_z = plan.h_z
                lam_spec = DiscreteKernelSpec(
                    plan.lam_z if plan.lam_z is not None else np.zeros(
                        data.zd.shape[1] if data.zd is not None else 0
                    )
                )
            prop = fit_propensity(data, h_z, lam_spec, kernel)
    except SeltestError as e:
        raise e.with_stage("propensity")

    try:
        if plan.h_x is not None:
            h_x = np.broadcast_to(plan.h_x, (data.d_x,))
        else:
            c_x = plan.c_x if plan.c_x is not None else 0.25
            sel = data.selected
            sd_x = data.x[sel].std(axis=0, ddof=1)
            h_x = c_x * sd_x * data.n ** (-1.0 / 3.0)
        cache = _MeanFitCache(data, h_x, kernel)
        if cache.undefined.any():
            diagnostics["mean_undefined"] = int(cache.undefined.sum())
        if grid is None:
            grid = build_default_grid(data, prop.phat, tau_grid=[0.5])
        indexer = BoxIndexer(data.x[cache.sel], prop.phat[cache.sel], grid)
        stat, argmax = statistic_z1m(data, prop.phat, grid, cache, indexer)
    except SeltestError as e:
        raise e.with_stage("statistic")

    try:
        draws = bootstrap_z1m(
            data, prop.phat, grid, cache, R, stream, multiplier, indexer
        )
    except SeltestError as e:
        raise e.with_stage("bootstrap")

    config = {
        "h_x": np.asarray(h_x).tolist(),
        "multiplier": multiplier,
        "R": R,
        "alphas": list(alphas),
        "trim": trim,
        "seed": stream.seed,
        "stream_id": stream.stream_id,
        "oracle_propensity": p_score is not None,
    }
    return MeanTestReport(
        statistic=stat,
        argmax=argmax,
        per_tau_sup={},
        boot_draws=draws,
        critical_values={a: critical_value(draws, a) for a in alphas},
        p_value=p_value(draws, stat),
        n_selected=data.n_selected,
        diagnostics=diagnostics,
        config=config,
    )
