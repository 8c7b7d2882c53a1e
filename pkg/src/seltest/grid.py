"""Finite search grids for the supremum statistics.

The tests take suprema over quantile ranks, coordinate boxes in x, and
intervals in the propensity score. A GridSpec carries sorted cutpoint
vectors; cells are all (box, interval) pairs of cutpoints. A BoxIndexer
pre-sorts each box's members by estimated propensity score so that every
cell sum is a difference of prefix sums at cutpoint positions, shared
across quantile ranks and bootstrap replications.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, EmptySampleError

__all__ = ["GridSpec", "build_default_grid", "BoxIndexer"]


@dataclass(frozen=True)
class GridSpec:
    """Cutpoints defining the search grid."""

    tau_grid: np.ndarray
    x_cutpoints: list          # one strictly increasing array per x coordinate
    p_cutpoints: np.ndarray
    max_cells: int = 20000
    degraded: bool = False     # marginal-box fallback engaged

    def __post_init__(self):
        tau = np.sort(np.unique(np.asarray(self.tau_grid, dtype=float)))
        if tau.size == 0 or np.any((tau <= 0) | (tau >= 1)):
            raise ConfigurationError("tau grid must lie strictly inside (0, 1)")
        object.__setattr__(self, "tau_grid", tau)
        xc = [np.asarray(g, dtype=float) for g in self.x_cutpoints]
        for g in xc:
            if g.size < 2 or np.any(np.diff(g) <= 0):
                raise ConfigurationError("cutpoints must be strictly increasing, >= 2")
        object.__setattr__(self, "x_cutpoints", xc)
        pc = np.asarray(self.p_cutpoints, dtype=float)
        if pc.size < 2 or np.any(np.diff(pc) <= 0):
            raise ConfigurationError("p cutpoints must be strictly increasing, >= 2")
        object.__setattr__(self, "p_cutpoints", pc)

    @property
    def n_p_pairs(self) -> int:
        return self.p_cutpoints.size * (self.p_cutpoints.size - 1) // 2

    def boxes(self) -> tuple[np.ndarray, np.ndarray]:
        """Lower and upper corners (n_boxes, d) of the enumerated x boxes."""
        if not self.degraded or len(self.x_cutpoints) == 1:
            idx = [
                [(a, b) for a in range(g.size) for b in range(a + 1, g.size)]
                for g in self.x_cutpoints
            ]
            lows, highs = [], []
            for combo in itertools.product(*idx):
                lows.append([self.x_cutpoints[j][a] for j, (a, b) in enumerate(combo)])
                highs.append([self.x_cutpoints[j][b] for j, (a, b) in enumerate(combo)])
            return np.asarray(lows), np.asarray(highs)
        # marginal fallback: per-dimension intervals, full range elsewhere
        lows, highs = [], []
        for j, g in enumerate(self.x_cutpoints):
            for a in range(g.size):
                for b in range(a + 1, g.size):
                    lo = [gg[0] for gg in self.x_cutpoints]
                    hi = [gg[-1] for gg in self.x_cutpoints]
                    lo[j], hi[j] = g[a], g[b]
                    lows.append(lo)
                    highs.append(hi)
        return np.asarray(lows), np.asarray(highs)


def _decile_cutpoints(values: np.ndarray, n_quantiles: int = 11) -> np.ndarray:
    qs = np.linspace(0.0, 1.0, n_quantiles)
    cuts = np.unique(np.quantile(values, qs))
    span = max(cuts[-1] - cuts[0], 1.0) if cuts.size > 1 else 1.0
    eps = 1e-9 * span
    # widen the outermost cutpoints so the strict box indicators keep the
    # boundary observations inside the full-range box
    cuts[0] -= eps
    cuts[-1] += eps
    if cuts.size == 1:
        cuts = np.array([cuts[0], cuts[0] + 2 * eps])
    return cuts


def build_default_grid(
    data,
    phat: np.ndarray,
    tau_grid,
    n_quantiles: int = 11,
    max_cells: int = 20000,
) -> GridSpec:
    """Decile-based grid over the selected sample.

    Cutpoints sit at the empirical deciles (including min and max) of
    each x coordinate and of the estimated propensity score; duplicate
    decile values collapse. When the full product of boxes and intervals
    exceeds ``max_cells`` the x boxes degrade to per-dimension marginal
    intervals with the remaining coordinates at full range, and the
    degradation is recorded on the spec.
    """
    sel = data.selected
    if not np.any(sel):
        raise EmptySampleError("no selected observations to build a grid from")
    x_cuts = [_decile_cutpoints(data.x[sel, j], n_quantiles) for j in range(data.d_x)]
    p_vals = np.asarray(phat, dtype=float)[sel]
    p_vals = p_vals[np.isfinite(p_vals)]
    if p_vals.size == 0:
        raise EmptySampleError("propensity estimates are undefined everywhere")
    p_cuts = _decile_cutpoints(p_vals, n_quantiles)
    full = math.prod(g.size * (g.size - 1) // 2 for g in x_cuts)
    n_pairs = p_cuts.size * (p_cuts.size - 1) // 2
    degraded = full * n_pairs > max_cells and data.d_x > 1
    return GridSpec(
        tau_grid=np.asarray(tau_grid, dtype=float),
        x_cutpoints=x_cuts,
        p_cutpoints=p_cuts,
        max_cells=max_cells,
        degraded=degraded,
    )


@dataclass
class _Box:
    members: np.ndarray     # indices into the selected sample
    order: np.ndarray       # members sorted by phat
    pos_lt: np.ndarray      # per cutpoint: count of members with phat < c
    pos_le: np.ndarray      # per cutpoint: count of members with phat <= c


class BoxIndexer:
    """Per-box membership and propensity-ordering shared by all cell sums."""

    def __init__(self, x_sel: np.ndarray, p_sel: np.ndarray, grid: GridSpec):
        self.grid = grid
        self.lows, self.highs = grid.boxes()
        self.n_sel = x_sel.shape[0]
        cuts = grid.p_cutpoints
        pairs = [
            (j, k) for j in range(cuts.size) for k in range(j + 1, cuts.size)
        ]
        self.pairs = np.asarray(pairs, dtype=np.int64)
        self.boxes: list[_Box] = []
        for lo, hi in zip(self.lows, self.highs):
            inside = np.all((x_sel > lo) & (x_sel < hi), axis=1)
            mem = np.flatnonzero(inside)
            p_mem = p_sel[mem]
            order = np.argsort(p_mem, kind="stable")
            p_sorted = p_mem[order]
            self.boxes.append(
                _Box(
                    members=mem,
                    order=mem[order],
                    pos_lt=np.searchsorted(p_sorted, cuts, side="left"),
                    pos_le=np.searchsorted(p_sorted, cuts, side="right"),
                )
            )

    def cell_bounds(self, box_id: int, pair_id: int):
        lo, hi = self.lows[box_id], self.highs[box_id]
        j, k = self.pairs[pair_id]
        cuts = self.grid.p_cutpoints
        return (lo.copy(), hi.copy()), (float(cuts[j]), float(cuts[k]))

    # ---- cell-sum engines ------------------------------------------------

    def sup_indicator(self, ind: np.ndarray, tau: float) -> tuple[float, tuple]:
        """sup over cells of |#neg - tau * #members| with strict p bounds.

        ``ind`` is the boolean vector 1{residual <= 0} on the selected
        sample; the returned value is not normalised by sqrt(n).
        """
        jj, kk = self.pairs[:, 0], self.pairs[:, 1]
        best, arg = -1.0, (0, 0)
        for b, box in enumerate(self.boxes):
            cnt1 = np.concatenate([[0], np.cumsum(ind[box.order])])[box.pos_lt]
            n1 = cnt1[kk] - cnt1[jj]
            m = box.pos_lt[kk] - box.pos_lt[jj]
            vals = np.abs(n1 - tau * m)
            i = int(np.argmax(vals))
            if vals[i] > best:
                best, arg = float(vals[i]), (b, i)
        return best, arg

    def sup_mixed(self, bvec: np.ndarray, F: np.ndarray) -> tuple[float, tuple]:
        """sup over cells of |prefix-sum difference minus the CDF correction|.

        Cell value: sum over members of bvec * (1{phat < upper} -
        1{phat < lower} - (F[:, upper] - F[:, lower])).
        """
        jj, kk = self.pairs[:, 0], self.pairs[:, 1]
        best, arg = -1.0, (0, 0)
        for b, box in enumerate(self.boxes):
            bs = bvec[box.order]
            A = np.concatenate([[0.0], np.cumsum(bs)])[box.pos_lt]
            G = F[box.members].T @ bvec[box.members]
            D = A - G
            vals = np.abs(D[kk] - D[jj])
            i = int(np.argmax(vals))
            if vals[i] > best:
                best, arg = float(vals[i]), (b, i)
        return best, arg

    def sup_weights_exact(self, w: np.ndarray) -> tuple[float, tuple]:
        """sup over cells of |sum of weights|, weak p bounds, correctly
        rounded per cell (order-independent summation)."""
        jj, kk = self.pairs[:, 0], self.pairs[:, 1]
        best, arg = -1.0, (0, 0)
        for b, box in enumerate(self.boxes):
            ws = w[box.order]
            for i, (j, k) in enumerate(zip(jj, kk)):
                v = abs(math.fsum(ws[box.pos_lt[j]: box.pos_le[k]]))
                if v > best:
                    best, arg = float(v), (b, i)
        return best, arg

    def sup_weights_prefix(self, w: np.ndarray) -> tuple[float, tuple]:
        """Fast prefix-sum variant of sup_weights_exact for bootstrap draws."""
        jj, kk = self.pairs[:, 0], self.pairs[:, 1]
        best, arg = -1.0, (0, 0)
        for b, box in enumerate(self.boxes):
            cum = np.concatenate([[0.0], np.cumsum(w[box.order])])
            vals = np.abs(cum[box.pos_le[kk]] - cum[box.pos_lt[jj]])
            i = int(np.argmax(vals))
            if vals[i] > best:
                best, arg = float(vals[i]), (b, i)
        return best, arg
