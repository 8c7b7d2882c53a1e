"""Identification-at-infinity test on observations with propensity score
near one.

The statistic studentises a kernel-weighted sum of centred residual-sign
indicators inside the window (delta - h_p, delta + h_p), delta = 1 - H,
so that it converges at the same (unknown) rate as its own standard
deviation even when the density of the score is thin near one. The
window parameters can be picked from the data by scanning an
irregularity exponent eta.
"""

from __future__ import annotations

import numpy as np

from .data import BandwidthPlan, Dataset
from .errors import ConfigurationError, SeltestError, ThinSetError
from .kernels import EPANECHNIKOV, KernelSpec
from .quantile import quantile_residuals
from .reports import Test2Report, TestReport, critical_value, p_value
from .rng import RngStream
from .smoothers import PropensityFit, cv_bandwidth_propensity, fit_propensity, \
    rule_of_thumb_bandwidths
from .test1 import DEFAULT_TAU_GRID, _trim_mask

__all__ = [
    "EtaScan",
    "select_eta",
    "statistic_z2",
    "bootstrap_z2",
    "run_test2",
    "decision_rule",
]

DEFAULT_ETA_GRID = np.round(np.arange(0.1, 0.91, 0.1), 10)


class EtaScan:
    """Result of the data-driven window scan over irregularity exponents."""

    def __init__(self, eta_grid, density_proxy, threshold, eta_hat, h_p, H, warning):
        self.eta_grid = np.asarray(eta_grid, dtype=float)
        self.density_proxy = np.asarray(density_proxy, dtype=float)
        self.threshold = float(threshold)
        self.eta_hat = float(eta_hat)
        self.h_p = float(h_p)
        self.H = float(H)
        self.warning = bool(warning)

    @property
    def delta(self) -> float:
        return 1.0 - self.H


def window_bandwidth(eta: float, n: int, epsilon: float = 0.1, C: float = 1.0) -> float:
    """h_p(eta) = C n^{-(1+eps)/(1+eps+eta)} log n."""
    return C * n ** (-(1.0 + epsilon) / (1.0 + epsilon + eta)) * np.log(n)


def select_eta(
    phat: np.ndarray,
    n: int,
    epsilon: float = 0.1,
    eta_grid=None,
    threshold: float = 0.1,
    C: float = 1.0,
    kernel: KernelSpec = EPANECHNIKOV,
) -> EtaScan:
    """Smallest eta whose local density proxy clears the threshold.

    For each eta the proxy is the kernel density mass of the estimated
    scores around 1 - H(eta), normalised by (n h_p(eta))^{1-eta} with
    H(eta) = h_p(eta)^{1/(1+epsilon)}. Small eta means a fast-rate window;
    the scan returns the smallest grid value whose proxy exceeds the
    threshold, or the grid maximum with a warning flag when none does.
    """
    eta_grid = DEFAULT_ETA_GRID if eta_grid is None else np.asarray(eta_grid, float)
    if eta_grid.size == 0:
        raise ConfigurationError("eta grid is empty")
    if np.any(np.diff(eta_grid) <= 0):
        raise ConfigurationError("eta grid must be ascending")
    phat = np.asarray(phat, dtype=float)
    phat = phat[np.isfinite(phat)]
    proxy = np.empty(eta_grid.size)
    for k, eta in enumerate(eta_grid):
        h_p = window_bandwidth(eta, n, epsilon, C)
        H = h_p ** (1.0 / (1.0 + epsilon))
        proxy[k] = np.sum(kernel((phat - (1.0 - H)) / h_p)) / (n * h_p) ** (1.0 - eta)
    hits = np.flatnonzero(proxy > threshold)
    warning = hits.size == 0
    k = int(hits[0]) if hits.size else eta_grid.size - 1
    eta_hat = float(eta_grid[k])
    h_p = window_bandwidth(eta_hat, n, epsilon, C)
    return EtaScan(
        eta_grid, proxy, threshold, eta_hat, h_p, h_p ** (1.0 / (1.0 + epsilon)), warning
    )


def _window_weights(
    phat: np.ndarray, s: np.ndarray, delta: float, h_p: float, kernel: KernelSpec
) -> tuple[np.ndarray, int]:
    kp = kernel((np.asarray(phat, dtype=float) - delta) / h_p)
    kp = np.where(s == 1, kp, 0.0)
    return kp, int(np.sum(kp > 0))


def statistic_z2(
    data: Dataset,
    uhat_by_tau: dict,
    phat: np.ndarray,
    plan: BandwidthPlan,
    kernel: KernelSpec = EPANECHNIKOV,
) -> tuple[float, dict, int]:
    """Studentized near-one statistic; returns (sup, per-tau values, n_window)."""
    if plan.delta is None or plan.h_p is None:
        raise ConfigurationError("delta and h_p must be set")
    kp_all, n_window = _window_weights(phat, data.s, plan.delta, plan.h_p, kernel)
    if n_window == 0:
        raise ThinSetError(
            f"no selected observations with propensity score in "
            f"({plan.delta - plan.h_p:.4f}, {plan.delta + plan.h_p:.4f})",
            n_window=0,
        )
    sel = np.flatnonzero(data.selected)
    kp = kp_all[sel]
    int_k2 = kernel.square_integral
    per_tau: dict[float, float] = {}
    for tau, u in uhat_by_tau.items():
        a = (u <= 0) - tau
        num = float(np.sum(a * kp))
        den = float(np.sqrt(int_k2 * np.sum(a * a * kp)))
        per_tau[float(tau)] = num / den
    stat = max(abs(v) for v in per_tau.values())
    return stat, per_tau, n_window


def bootstrap_z2(
    data: Dataset,
    phat: np.ndarray,
    plan: BandwidthPlan,
    tau_grid,
    R: int,
    stream: RngStream,
    kernel: KernelSpec = EPANECHNIKOV,
) -> np.ndarray:
    """R studentized wild-bootstrap draws of the near-one statistic.

    The bootstrap variance uses the average of (B - tau)^2 over all n
    observations but kernel weights only over selected ones, exactly as
    the statistic is defined.
    """
    if R < 1:
        raise ConfigurationError("R must be at least 1")
    taus = np.atleast_1d(np.asarray(tau_grid, dtype=float))
    kp_all, n_window = _window_weights(phat, data.s, plan.delta, plan.h_p, kernel)
    if n_window == 0:
        raise ThinSetError("empty near-one window", n_window=0)
    sel = np.flatnonzero(data.selected)
    kp = kp_all[sel]
    sum_kp = float(np.sum(kp))
    int_k2 = kernel.square_integral
    draws = np.empty(R)
    for rep in range(R):
        U = stream.substream(rep).generator().random(data.n)
        best = 0.0
        for tau in taus:
            b_all = (U <= tau).astype(float) - tau
            num = float(np.sum(b_all[sel] * kp))
            var = float(np.mean(b_all**2)) * int_k2 * sum_kp
            best = max(best, abs(num) / np.sqrt(var))
        draws[rep] = best
    return draws


def run_test2(
    data: Dataset,
    plan: BandwidthPlan | None = None,
    tau_grid=None,
    R: int = 400,
    alphas=(0.05, 0.10),
    stream: RngStream = RngStream(0),
    p_score: np.ndarray | None = None,
    hx_method: str = "rule",
    trim: float = 0.0,
    kernel: KernelSpec = EPANECHNIKOV,
) -> Test2Report:
    """Full second-test pipeline.

    When the plan fixes (delta, h_p) they are used as given; otherwise
    the window is selected by the eta scan. Intended after a first-test
    rejection, but that is not enforced.
    """
    plan = plan or BandwidthPlan()
    tau_grid = DEFAULT_TAU_GRID if tau_grid is None else np.atleast_1d(tau_grid)
    diagnostics: dict = {}
    if p_score is not None:
        p_score = np.asarray(p_score, dtype=float).ravel()
    if trim > 0:
        mask = _trim_mask(data, trim)
        if p_score is not None:
            p_score = p_score[mask]
        data = data.subset(mask)

    try:
        if p_score is not None:
            prop = PropensityFit(phat=p_score, h_z=None)
        else:
            data.require_instrument()
            if plan.h_z is None:
                h_z, lam_spec = cv_bandwidth_propensity(data, stream=stream.substream(-1))
            else:
                from .kernels import DiscreteKernelSpec

                h_z = plan.h_z
                lam_spec = DiscreteKernelSpec(
                    plan.lam_z if plan.lam_z is not None else np.zeros(
                        data.zd.shape[1] if data.zd is not None else 0
                    )
                )
            prop = fit_propensity(data, h_z, lam_spec, kernel)
    except SeltestError as e:
        raise e.with_stage("propensity")

    eta_used = None
    if plan.delta is None or plan.h_p is None:
        scan = select_eta(
            prop.phat, data.n, plan.epsilon, threshold=0.1, C=plan.c_scale, kernel=kernel
        )
        eta_used = scan.eta_hat
        plan = plan.updated(delta=scan.delta, h_p=scan.h_p, eta=scan.eta_hat)
        diagnostics["eta_scan_warning"] = scan.warning
        diagnostics["density_proxy"] = scan.density_proxy.tolist()
    elif plan.trim_width is not None and plan.h_p is not None:
        if plan.trim_width <= plan.h_p and plan.delta < 1.0:
            diagnostics["window_warning"] = (
                "H = 1 - delta does not exceed h_p; the trimming-rate "
                "condition is violated at this sample size"
            )

    try:
        if plan.h_x is not None:
            pass
        elif hx_method == "cv":
            from .quantile import cv_bandwidth_undersmoothed

            plan = plan.updated(
                h_x=cv_bandwidth_undersmoothed(data, plan.r, stream=stream.substream(-2))
            )
        else:
            c_x = plan.c_x if plan.c_x is not None else 3.5
            h_x, _ = rule_of_thumb_bandwidths(data, c_x)
            plan = plan.updated(h_x=h_x)
        fits = quantile_residuals(data, tau_grid, plan, kernel)
        uhat = {t: f.uhat for t, f in fits.items()}
    except SeltestError as e:
        raise e.with_stage("quantile-fit")

    try:
        stat, per_tau, n_window = statistic_z2(data, uhat, prop.phat, plan, kernel)
        draws = bootstrap_z2(data, prop.phat, plan, tau_grid, R, stream, kernel)
    except ThinSetError as e:
        e.args = (
            e.args[0] + "; consider increasing h_p or lowering delta",
        )
        raise e.with_stage("statistic")
    except SeltestError as e:
        raise e.with_stage("statistic")

    config = {
        "tau_grid": [float(t) for t in tau_grid],
        "h_x": np.asarray(plan.h_x).tolist(),
        "r": plan.r,
        "delta": plan.delta,
        "h_p": plan.h_p,
        "eta": eta_used,
        "epsilon": plan.epsilon,
        "c_scale": plan.c_scale,
        "R": R,
        "alphas": list(alphas),
        "trim": trim,
        "seed": stream.seed,
        "stream_id": stream.stream_id,
        "oracle_propensity": p_score is not None,
    }
    return Test2Report(
        statistic=stat,
        per_tau=per_tau,
        boot_draws=draws,
        critical_values={a: critical_value(draws, a) for a in alphas},
        p_value=p_value(draws, stat),
        n_window=n_window,
        eta_used=eta_used,
        diagnostics=diagnostics,
        config=config,
    )


def decision_rule(
    report1: TestReport,
    report2: Test2Report | None,
    alpha1: float = 0.05,
    alpha2: float = 0.05,
) -> str:
    """Sequential classification from the two tests.

    Returns one of 'no-selection-evidence' (first test does not reject),
    'selection-only' (first rejects, second does not), or
    'misspecification-possibly-with-selection' (both reject).
    """
    for a in (alpha1, alpha2):
        if not 0.0 < a < 1.0:
            raise ConfigurationError("significance levels must lie in (0, 1)")
    if not report1.rejects(alpha1):
        return "no-selection-evidence"
    if report2 is None:
        raise ConfigurationError(
            "the first test rejected; run the second test to classify the cause"
        )
    if report2.rejects(alpha2):
        return "misspecification-possibly-with-selection"
    return "selection-only"
