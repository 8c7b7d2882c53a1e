"""Exact weighted quantile regression solver.

Minimises sum_i w_i * l_tau(y_i - x_i'b) with the check loss
l_tau(v) = 2 v (tau - 1{v <= 0}) over coefficient vectors b. Because the
check loss is positively homogeneous, the weighted problem equals the
unweighted one on rows scaled by w_i, and its LP dual is

    max y~'a   s.t.  X~'a = (1 - tau) X~'1,   a in [0, 1]^n

with X~, y~ the scaled design. We follow the dual path with a
primal-dual predictor-corrector method, batched over many small
problems at once (one per evaluation point), then polish the returned
point to an exact vertex: the lexicographically smallest set of
interpolated observations spanning the design defines the reported
coefficients, interpolated residuals are set to exactly zero, and the
polished point is accepted only if it does not worsen the objective.
This makes residual signs deterministic, including under affine maps of
the outcome.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EstimationError

__all__ = ["check_loss", "QRFit", "solve_qr_batch", "solve_qr", "weighted_quantile"]

_STEP_DAMP = 0.9995
_MAX_ITER = 120


def check_loss(resid: np.ndarray, tau, weights: np.ndarray | None = None) -> float:
    """Weighted check-loss objective 2 v (tau - 1{v <= 0}) summed over rows."""
    resid = np.asarray(resid, dtype=float)
    loss = 2.0 * resid * (tau - (resid <= 0))
    if weights is not None:
        loss = loss * weights
    return float(np.sum(loss))


@dataclass
class QRFit:
    """Result of a batch solve: coefficients, residuals, and diagnostics."""

    beta: np.ndarray          # (B, p)
    resid: np.ndarray         # (B, N) residuals on the original scale
    converged: np.ndarray     # (B,) IP convergence flag
    polished: np.ndarray      # (B,) exact-vertex polish applied
    basis: list               # per problem: indices of interpolated rows


def _max_step(pairs: list[tuple[np.ndarray, np.ndarray]], mask: np.ndarray) -> np.ndarray:
    """Largest alpha in (0, 1] with v + alpha dv > 0 for every (v, dv) pair."""
    step = np.full(mask.shape[0], 1.0 / _STEP_DAMP)
    with np.errstate(divide="ignore", invalid="ignore"):
        for v, dv in pairs:
            ratio = np.where((dv < 0) & mask, v / -dv, np.inf)
            step = np.minimum(step, ratio.min(axis=1))
    return _STEP_DAMP * step


def solve_qr_batch(
    X: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    tau: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = _MAX_ITER,
) -> QRFit:
    """Solve a batch of weighted quantile regressions.

    Parameters
    ----------
    X : (B, N, p) stacked design matrices.
    y : (B, N) responses.
    w : (B, N) nonnegative weights; rows with zero weight are inert.
    tau : (B,) or scalar quantile levels in (0, 1).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    B, N, p = X.shape
    tau = np.broadcast_to(np.asarray(tau, dtype=float), (B,)).copy()
    if np.any((tau <= 0) | (tau >= 1)):
        raise EstimationError("quantile levels must lie strictly inside (0, 1)")

    mask = w > 0  # (B, N)
    n_eff = mask.sum(axis=1)
    if np.any(n_eff < p):
        bad = int(np.argmin(n_eff))
        raise EstimationError(
            f"only {int(n_eff[bad])} observations carry positive weight at "
            f"evaluation point {bad}, need at least {p}"
        )

    Xt = X * w[:, :, None]
    yt = y * w
    tcol = tau[:, None]
    XtT = Xt.transpose(0, 2, 1)

    # Start from the weighted least-squares fit; the dual start a = 1 - tau
    # satisfies the equality constraints exactly.
    gram = np.matmul(XtT, Xt) + 1e-10 * np.eye(p)
    beta = np.linalg.solve(gram, np.matmul(XtT, yt[:, :, None]))[..., 0]
    r = yt - np.matmul(Xt, beta[:, :, None])[..., 0]
    scale = np.maximum(1.0, np.abs(yt).sum(axis=1) / np.maximum(n_eff, 1))
    eps0 = 0.1 * scale[:, None]
    z = np.maximum(-r, 0.0) + eps0
    u = z + r  # upper-bound multipliers; z - u = -r holds exactly at the start
    a = np.where(mask, 1.0 - tcol, 0.5)
    s = 1.0 - a

    b_eq = np.matmul(XtT, ((1.0 - tcol) * mask)[:, :, None])[..., 0]
    b_eq_scale = 1.0 + np.max(np.abs(b_eq), axis=1)
    active = np.ones(B, dtype=bool)
    converged = np.zeros(B, dtype=bool)
    eye_p = np.eye(p)

    for _ in range(max_iter):
        r = yt - np.matmul(Xt, beta[:, :, None])[..., 0]
        rp = np.matmul(XtT, a[:, :, None])[..., 0] - b_eq
        gap = np.sum((z * a + u * s) * mask, axis=1)
        obj = np.sum(np.maximum(tcol * r, (tcol - 1.0) * r) * mask, axis=1)
        done = (gap <= tol * (1.0 + np.abs(obj))) & (
            np.max(np.abs(rp), axis=1) <= 1e-8 * b_eq_scale
        )
        converged |= done & active
        active &= ~done
        if not active.any():
            break

        az = np.where(mask, np.maximum(a, 1e-14), 1.0)
        sz = np.where(mask, np.maximum(s, 1e-14), 1.0)
        d = np.where(mask, 1.0 / (z / az + u / sz), 0.0)

        M = np.matmul(XtT, Xt * d[:, :, None]) + 1e-13 * eye_p

        # Predictor: for the affine system the centring terms collapse and
        # the row-space right-hand side is the plain residual.
        rhs = rp + np.matmul(XtT, (d * r)[:, :, None])[..., 0]
        dbeta = np.linalg.solve(M, rhs[:, :, None])[..., 0]
        da = d * (r - np.matmul(Xt, dbeta[:, :, None])[..., 0])
        dz = -z - (z / az) * da
        du = -u + (u / sz) * da
        da, dz, du = (np.where(mask, v, 0.0) for v in (da, dz, du))

        ap = _max_step([(a, da), (s, -da)], mask)
        ad = _max_step([(z, dz), (u, du)], mask)
        gap_aff = np.sum(
            ((z + ad[:, None] * dz) * (a + ap[:, None] * da)
             + (u + ad[:, None] * du) * (s - ap[:, None] * da)) * mask,
            axis=1,
        )
        sigma = np.clip(gap_aff / np.maximum(gap, 1e-300), 0.0, 1.0) ** 3
        mu = sigma * gap / np.maximum(2.0 * n_eff, 1.0)

        # Corrector with Mehrotra second-order terms.
        t = (r + mu[:, None] * (1.0 / az - 1.0 / sz)
             - (da * dz) / az - (da * du) / sz)
        t = np.where(mask, t, 0.0)
        rhs = rp + np.matmul(XtT, (d * t)[:, :, None])[..., 0]
        dbeta = np.linalg.solve(M, rhs[:, :, None])[..., 0]
        da_c = d * (t - np.matmul(Xt, dbeta[:, :, None])[..., 0])
        v1 = mu[:, None] - z * a - da * dz
        v2 = mu[:, None] - u * s + da * du
        dz_c = (v1 - z * da_c) / az
        du_c = (v2 + u * da_c) / sz
        da_c, dz_c, du_c = (np.where(mask, v, 0.0) for v in (da_c, dz_c, du_c))

        ap = np.where(active, _max_step([(a, da_c), (s, -da_c)], mask), 0.0)
        ad = np.where(active, _max_step([(z, dz_c), (u, du_c)], mask), 0.0)
        a = a + ap[:, None] * da_c
        s = 1.0 - a
        z = z + ad[:, None] * dz_c
        u = u + ad[:, None] * du_c
        beta = beta + ad[:, None] * dbeta

    resid = y - np.matmul(X, beta[:, :, None])[..., 0]
    fit = QRFit(
        beta=beta,
        resid=resid,
        converged=converged,
        polished=np.zeros(B, dtype=bool),
        basis=[None] * B,
    )
    _polish_to_vertex(fit, X, y, w, tau, mask)
    return fit


def _polish_to_vertex(fit: QRFit, X, y, w, tau, mask) -> None:
    """Snap each solution to the exact vertex through the lexicographically
    smallest independent set of near-interpolated rows, provided that does
    not worsen the objective."""
    B, N, p = X.shape
    for b in range(B):
        rows = np.flatnonzero(mask[b])
        r = fit.resid[b]
        scale = max(1.0, float(np.max(np.abs(y[b][rows]))))
        obj0 = check_loss(r[rows], tau[b], w[b][rows])
        band = 1e-7 * scale
        chosen = None
        for _ in range(5):
            cand = rows[np.abs(r[rows]) <= band]
            if cand.size >= p:
                sel = _greedy_independent(X[b], cand, p)
                if sel is not None:
                    chosen = sel
                    break
            band *= 10.0
        if chosen is None:
            continue
        try:
            beta_v = np.linalg.solve(X[b][chosen], y[b][chosen])
        except np.linalg.LinAlgError:  # pragma: no cover - rank guard above
            continue
        r_v = y[b] - X[b] @ beta_v
        r_v[chosen] = 0.0
        # Interpolation noise well below float resolution of the data is
        # genuinely zero; snapping keeps residual signs reproducible.
        r_v[np.abs(r_v) <= 4096.0 * np.finfo(float).eps * scale] = 0.0
        obj_v = check_loss(r_v[rows], tau[b], w[b][rows])
        if obj_v <= obj0 + 1e-9 * (1.0 + abs(obj0)):
            fit.beta[b] = beta_v
            fit.resid[b] = r_v
            fit.polished[b] = True
            fit.basis[b] = chosen


def _greedy_independent(X: np.ndarray, cand: np.ndarray, p: int) -> np.ndarray | None:
    """First (by index) subset of rows of X[cand] with full column rank p."""
    Q = np.zeros((p, p))
    picked: list[int] = []
    for i in cand:
        v = X[i].astype(float)
        k = len(picked)
        u = v - Q[:k].T @ (Q[:k] @ v)
        nrm = np.linalg.norm(u)
        if nrm > 1e-9 * (1.0 + np.linalg.norm(v)):
            Q[k] = u / nrm
            picked.append(int(i))
            if len(picked) == p:
                return np.array(picked)
    return None


def solve_qr(
    X: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    tau: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Single weighted quantile regression; returns (beta, residuals).

    Intercept-only designs are solved directly as a weighted quantile;
    everything else goes through the batched interior-point path.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    n, p = X.shape
    if p == 1 and np.all(X[:, 0] == 1.0):
        b0 = weighted_quantile(y[w > 0], w[w > 0], tau)
        return np.array([b0]), y - b0
    fit = solve_qr_batch(X[None], y[None], w[None], np.array([tau]))
    return fit.beta[0], fit.resid[0]


def weighted_quantile(y: np.ndarray, w: np.ndarray, tau: float) -> float:
    """Smallest y value whose cumulative weight reaches tau of the total."""
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    if y.size == 0:
        raise EstimationError("cannot take a quantile of an empty sample")
    order = np.argsort(y, kind="stable")
    cw = np.cumsum(w[order])
    k = int(np.searchsorted(cw, tau * cw[-1], side="left"))
    return float(y[order][min(k, y.size - 1)])
