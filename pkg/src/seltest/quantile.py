"""Local polynomial conditional quantile estimation on the selected sample.

The fit at a point x0 minimises the kernel-weighted check loss of an
order-r polynomial in (x - x0); the intercept coefficient is the
quantile estimate. Multi-index basis columns follow the usual
lexicographic convention grouped by total degree with highest priority
on the last coordinate, so coefficient vectors are comparable across
runs: for d_x = 1 the columns are 1, (x-x0), ..., (x-x0)^r.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import BandwidthPlan, Dataset
from .errors import ConfigurationError, EstimationError
from .kernels import EPANECHNIKOV, KernelSpec
from .qrsolve import check_loss, solve_qr_batch, weighted_quantile

__all__ = [
    "poly_multi_indices",
    "local_design",
    "QuantileFit",
    "fit_local_poly_quantile",
    "fit_local_poly_quantile_near_one",
    "quantile_residuals",
    "cv_bandwidth_undersmoothed",
]


def poly_multi_indices(d: int, r: int) -> list[tuple[int, ...]]:
    """All multi-indices t with 0 <= |t| <= r, grouped by total degree."""
    out: list[tuple[int, ...]] = []
    for degree in range(r + 1):
        block: list[tuple[int, ...]] = []

        def extend(prefix, remaining, coords_left):
            if coords_left == 1:
                block.append(prefix + (remaining,))
                return
            for k in range(remaining + 1):
                extend(prefix + (k,), remaining - k, coords_left - 1)

        extend((), degree, d)
        block.sort(key=lambda t: tuple(reversed(t)), reverse=True)
        out.extend(block)
    return out


def local_design(x: np.ndarray, x0: np.ndarray, indices) -> np.ndarray:
    """Design matrix with columns prod_j (x_j - x0_j)^t_j per multi-index."""
    dx = np.atleast_2d(x) - np.asarray(x0, dtype=float)
    cols = [np.prod(dx ** np.asarray(t, dtype=float), axis=1) for t in indices]
    return np.column_stack(cols)


@dataclass
class QuantileFit:
    """Per-tau leave-in fit at every selected observation."""

    tau: float
    qhat: np.ndarray        # fitted quantile at each selected x_i
    uhat: np.ndarray        # residuals y_i - qhat_i on the selected sample
    coeffs: np.ndarray      # (n_selected, p) local coefficient vectors
    indices: list           # multi-index basis ordering
    h_x: np.ndarray


def _gather_windows(
    x_train: np.ndarray, x_eval: np.ndarray, h: np.ndarray
) -> np.ndarray:
    """Per evaluation point, indices of training rows inside the kernel box.

    Returns an integer array (B, Nmax) padded with -1.
    """
    n, d = x_train.shape
    if d == 1:
        order = np.argsort(x_train[:, 0], kind="stable")
        xs = x_train[order, 0]
        lo = np.searchsorted(xs, x_eval[:, 0] - h[0], side="left")
        hi = np.searchsorted(xs, x_eval[:, 0] + h[0], side="right")
        width = int(np.max(hi - lo)) if len(x_eval) else 0
        idx = lo[:, None] + np.arange(width)[None, :]
        valid = idx < hi[:, None]
        idx = np.where(valid, np.minimum(idx, n - 1), 0)
        out = np.where(valid, order[idx], -1)
        return out
    members = [
        np.flatnonzero(np.all(np.abs(x_train - xe) < h, axis=1)) for xe in x_eval
    ]
    width = max((m.size for m in members), default=0)
    out = np.full((len(x_eval), width), -1, dtype=np.int64)
    for b, m in enumerate(members):
        out[b, : m.size] = m
    return out


def _fit_batch(
    x_train: np.ndarray,
    y_train: np.ndarray,
    base_weight: np.ndarray,
    x_eval: np.ndarray,
    taus: np.ndarray,
    h: np.ndarray,
    r: int,
    kernel: KernelSpec,
    loo: bool = False,
    train_ids: np.ndarray | None = None,
    eval_ids: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Fit at every (eval point, tau) pair; returns (beta (T,B,p), qhat (T,B))."""
    d = x_train.shape[1]
    indices = poly_multi_indices(d, r)
    p = len(indices)
    windows = _gather_windows(x_train, x_eval, h)
    B, Nmax = windows.shape
    if Nmax < p:
        raise EstimationError("kernel windows contain too few observations")
    safe = np.maximum(windows, 0)
    xw = x_train[safe]                       # (B, Nmax, d)
    yw = y_train[safe]
    dx = xw - x_eval[:, None, :]
    w = base_weight[safe] * np.prod(kernel(dx / h), axis=-1)
    w[windows < 0] = 0.0
    if loo and train_ids is not None and eval_ids is not None:
        w[train_ids[safe] == eval_ids[:, None]] = 0.0
    n_eff = (w > 0).sum(axis=1)
    if np.any(n_eff < p):
        b = int(np.argmin(n_eff))
        raise EstimationError(
            f"only {int(n_eff[b])} selected observations carry positive kernel "
            f"weight near x0={x_eval[b]}, need at least {p}"
        )
    X = np.empty((B, Nmax, p))
    for j, t in enumerate(indices):
        X[:, :, j] = np.prod(dx ** np.asarray(t, dtype=float), axis=-1)
    T = taus.size
    Xb = np.broadcast_to(X, (T,) + X.shape).reshape(T * B, Nmax, p)
    yb = np.broadcast_to(yw, (T, B, Nmax)).reshape(T * B, Nmax)
    wb = np.broadcast_to(w, (T, B, Nmax)).reshape(T * B, Nmax)
    tb = np.repeat(taus, B)
    fit = solve_qr_batch(Xb, yb, wb, tb)
    beta = fit.beta.reshape(T, B, p)
    return beta, beta[:, :, 0]


def fit_local_poly_quantile(
    data: Dataset,
    tau: float,
    x0,
    h_x,
    r: int = 3,
    kernel: KernelSpec = EPANECHNIKOV,
    extra_weight: np.ndarray | None = None,
) -> np.ndarray:
    """Coefficients of the order-r check-loss fit at a single point x0.

    The first coefficient is the conditional quantile estimate. On a
    rank-deficient local design the order is reduced until the fit is
    identified (an intercept-only fit is a weighted quantile).
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    h = np.broadcast_to(np.atleast_1d(np.asarray(h_x, dtype=float)), (data.d_x,))
    if np.any(h <= 0):
        raise ConfigurationError("h_x must be positive")
    sel_w = data.s.astype(float)
    if extra_weight is not None:
        sel_w = sel_w * extra_weight
    y_clean = np.where(data.s == 1, np.nan_to_num(data.y), 0.0)
    w = sel_w * np.prod(kernel((data.x - x0) / h), axis=-1)
    rows = np.flatnonzero(w > 0)
    if rows.size == 0:
        raise EstimationError(f"no selected observations near x0={x0}")
    for order in range(r, 0, -1):
        indices = poly_multi_indices(data.d_x, order)
        p = len(indices)
        if rows.size < p:
            continue
        X = local_design(data.x[rows], x0, indices)
        if np.linalg.matrix_rank(X * w[rows, None]) < p:
            continue
        fit = solve_qr_batch(
            X[None], y_clean[rows][None], w[rows][None], np.array([tau])
        )
        return fit.beta[0]
    b0 = weighted_quantile(y_clean[rows], w[rows], tau)
    return np.array([b0])


def fit_local_poly_quantile_near_one(
    data: Dataset,
    tau: float,
    x0,
    plan: BandwidthPlan,
    phat: np.ndarray,
    kernel: KernelSpec = EPANECHNIKOV,
) -> np.ndarray:
    """Quantile fit using only observations with propensity score near one.

    Adds the window weight K((phat - delta) / h_p) to the usual fit; this
    is the post-test estimator appropriate when only selection (and not
    misspecification) was detected.
    """
    if plan.delta is None or plan.h_p is None:
        raise ConfigurationError("plan must fix delta and h_p for the near-one fit")
    pw = kernel((np.asarray(phat, dtype=float) - plan.delta) / plan.h_p)
    n_window = int(np.sum((pw > 0) & (data.s == 1)))
    indices = poly_multi_indices(data.d_x, plan.r)
    if n_window < len(indices):
        from .errors import ThinSetError

        raise ThinSetError(
            f"only {n_window} selected observations have propensity score in "
            f"({plan.delta - plan.h_p:.4f}, {plan.delta + plan.h_p:.4f})",
            n_window=n_window,
        )
    h_x = plan.h_x if plan.h_x is not None else None
    if h_x is None:
        raise ConfigurationError("plan.h_x is required")
    return fit_local_poly_quantile(
        data, tau, x0, h_x, plan.r, kernel, extra_weight=pw
    )


def quantile_residuals(
    data: Dataset,
    tau_grid,
    plan: BandwidthPlan,
    kernel: KernelSpec = EPANECHNIKOV,
) -> dict[float, QuantileFit]:
    """Leave-in residuals y_i - qhat_tau(x_i) at every selected observation."""
    taus = np.atleast_1d(np.asarray(tau_grid, dtype=float))
    if np.any((taus <= 0) | (taus >= 1)):
        raise ConfigurationError("tau grid must lie strictly inside (0, 1)")
    if plan.h_x is None:
        raise ConfigurationError("plan.h_x is required for quantile fitting")
    h = np.broadcast_to(plan.h_x, (data.d_x,))
    sel = np.flatnonzero(data.selected)
    if sel.size == 0:
        raise EstimationError("no selected observations")
    y_clean = np.where(data.s == 1, np.nan_to_num(data.y), 0.0)
    beta, qhat = _fit_batch(
        data.x, y_clean, data.s.astype(float), data.x[sel], taus, h, plan.r, kernel
    )
    indices = poly_multi_indices(data.d_x, plan.r)
    out: dict[float, QuantileFit] = {}
    for k, tau in enumerate(taus):
        out[float(tau)] = QuantileFit(
            tau=float(tau),
            qhat=qhat[k],
            uhat=y_clean[sel] - qhat[k],
            coeffs=beta[k],
            indices=indices,
            h_x=h.copy(),
        )
    return out


def cv_bandwidth_undersmoothed(
    data: Dataset,
    r: int,
    tau: float = 0.5,
    multipliers: np.ndarray | None = None,
    kernel: KernelSpec = EPANECHNIKOV,
    max_eval: int | None = None,
    stream=None,
) -> np.ndarray:
    """Bandwidth for an order-r fit via leave-one-out CV at a lower order.

    Cross-validation targets a local linear fit (order 1), whose optimal
    rate undersmooths the order-r fit as the rate conditions require. The
    criterion is the summed check loss at ``tau`` of the leave-one-out
    predictions over the selected sample (optionally a random subset of
    at most ``max_eval`` points). If the minimiser sits at the edge of
    the multiplier grid the grid is widened once before giving up.
    """
    if r <= 1:
        raise ConfigurationError("cv_bandwidth_undersmoothed expects order r > 1")
    if multipliers is None:
        multipliers = np.geomspace(0.5, 6.0, 10)
    multipliers = np.sort(np.asarray(multipliers, dtype=float))
    sel = np.flatnonzero(data.selected)
    if sel.size < 10:
        raise EstimationError("too few selected observations for cross-validation")
    sd = data.x[sel].std(axis=0, ddof=1)
    if np.any(sd <= 0):
        j = int(np.argmin(sd))
        raise EstimationError(f"x column {j} has zero variance")
    base = sd * sel.size ** (-1.0 / (4 + data.d_x))
    eval_rows = sel
    if max_eval is not None and sel.size > max_eval:
        gen = stream.generator() if stream is not None else np.random.default_rng(0)
        eval_rows = np.sort(gen.choice(sel, size=max_eval, replace=False))
    y_clean = np.where(data.s == 1, np.nan_to_num(data.y), 0.0)
    ids = np.arange(data.n)

    def cv_value(mult: float) -> float:
        _, qhat = _fit_batch(
            data.x,
            y_clean,
            data.s.astype(float),
            data.x[eval_rows],
            np.array([tau]),
            mult * base,
            1,
            kernel,
            loo=True,
            train_ids=ids,
            eval_ids=eval_rows,
        )
        return check_loss(y_clean[eval_rows] - qhat[0], tau)

    grid = list(multipliers)
    for attempt in range(2):
        values = [cv_value(m) for m in grid]
        k = int(np.argmin(values))
        if len(grid) == 1 or 0 < k < len(grid) - 1:
            return grid[k] * base
        if attempt == 1:
            raise EstimationError(
                "cross-validation criterion is monotone over the widened "
                "bandwidth grid"
            )
        if k == 0:
            grid = sorted(set(np.geomspace(grid[0] / 8, grid[0], 4)) | set(grid))
        else:
            grid = sorted(set(grid) | set(np.geomspace(grid[-1], grid[-1] * 8, 4)))
    raise AssertionError("unreachable")
