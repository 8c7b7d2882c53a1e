"""Simulation harness: data generating processes, warp-speed bootstrap
loops, and benchmark table replication.

The outcome equation is a cubic (quantile designs) or quadratic (mean
designs) polynomial in a uniform covariate plus an instrument term and
Gaussian noise; selection follows a linear threshold-crossing rule whose
noise correlates with the outcome noise (the selection strength). Four
instrument laws cover continuous through binary variation. The
warp-speed loop computes one bootstrap draw per replication and pools
the draws into critical values.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .data import BandwidthPlan, Dataset
from .errors import ConfigurationError, SeltestError
from .meantest import run_meantest
from .reports import critical_value
from .rng import RngStream
from .test1 import run_test1
from .test2 import run_test2

__all__ = [
    "DgpConfig",
    "McResult",
    "generate_dgp",
    "true_quantile_cubic",
    "run_warp_speed",
    "replicate_table",
    "TABLE_IDS",
]

DESIGNS = ("normal", "binomial", "poisson", "discrete-uniform")
_MC_TAUS = (0.3, 0.5, 0.7)


@dataclass(frozen=True)
class DgpConfig:
    """One simulation design cell."""

    design: str = "normal"
    rho: float = 0.0
    gamma1: float = 0.0
    sigma: float = 1.0
    n: int = 1000
    outcome: str = "cubic-quantile"   # or "quadratic-mean"
    instrument_variance: float = 1.0  # normal design only

    def __post_init__(self):
        if self.design not in DESIGNS:
            raise ConfigurationError(f"unknown design {self.design!r}")
        if not -1.0 <= self.rho <= 1.0:
            raise ConfigurationError("rho must lie in [-1, 1]")
        if self.n < 1:
            raise ConfigurationError("n must be positive")
        if self.outcome not in ("cubic-quantile", "quadratic-mean"):
            raise ConfigurationError(f"unknown outcome kind {self.outcome!r}")


def _draw_instrument(config: DgpConfig, gen: np.random.Generator) -> np.ndarray:
    if config.design == "normal":
        return gen.normal(0.0, np.sqrt(config.instrument_variance), config.n)
    if config.design == "binomial":
        return gen.integers(0, 2, config.n).astype(float) - 0.5
    if config.design == "poisson":
        return 1.5 - gen.poisson(1.5, config.n).astype(float)
    # seven equiprobable support points recentred to mean zero
    return gen.integers(0, 7, config.n).astype(float) - 3.0


def true_quantile_cubic(x: np.ndarray, tau: float) -> np.ndarray:
    """Closed-form conditional quantile of the cubic design when the
    instrument is irrelevant and selection noise is independent."""
    xc = np.asarray(x, dtype=float) - 0.5
    return xc**3 + xc**2 + xc + 0.5 * norm.ppf(tau)


def generate_dgp(config: DgpConfig, stream: RngStream) -> tuple[Dataset, np.ndarray]:
    """Draw one sample; returns (dataset, oracle propensity scores)."""
    gen = stream.generator()
    n = config.n
    x = gen.random(n)
    z = _draw_instrument(config, gen)
    e1 = gen.normal(size=n)
    e2 = gen.normal(size=n)
    eps = e1
    v = config.rho * e1 + np.sqrt(1.0 - config.rho**2) * e2
    index = 0.75 * (x - 0.5) + 0.75 * z
    s = (index > config.sigma * v).astype(np.int8)
    if config.outcome == "cubic-quantile":
        xc = x - 0.5
        y = xc**3 + xc**2 + xc + config.gamma1 * z + 0.5 * eps
    else:
        y = x**2 + 0.5 * x + config.gamma1 * z + 0.5 * eps
    y = np.where(s == 1, y, np.nan)
    p_oracle = norm.cdf(index / config.sigma)
    continuous = config.design == "normal"
    data = Dataset(
        y=y,
        x=x,
        s=s,
        zc=z if continuous else None,
        zd=None if continuous else z,
    )
    return data, p_oracle


@dataclass
class McResult:
    """Rejection rates of one Monte Carlo cell."""

    rejection_rates: dict
    reps: int
    failures: int = 0
    statistics: np.ndarray = field(default_factory=lambda: np.zeros(0))
    boot_draws: np.ndarray = field(default_factory=lambda: np.zeros(0))
    config: dict = field(default_factory=dict)


_DEFAULT_TUNING = {
    "c_x": 4.0,
    "hx_method": "rule",
    "oracle_p": True,
    "trim": 0.025,
    "tau_grid": _MC_TAUS,
    "delta": None,
    "h_p": None,
    "auto_eta": False,
    "cv_max_eval": 150,
    "multiplier": "rademacher",
}


def _one_replication(args) -> tuple[float, float, str | None]:
    config, test, tuning, seed, stream_id, rep = args
    stream = RngStream(seed, stream_id).substream(rep)
    data, p_oracle = generate_dgp(config, stream.substream(0))
    p_score = p_oracle if tuning["oracle_p"] else None
    run_stream = stream.substream(1)
    tau_grid = np.asarray(tuning["tau_grid"], dtype=float)
    try:
        if test == "test1":
            plan = BandwidthPlan(c_x=tuning["c_x"])
            report = run_test1(
                data,
                plan=plan,
                R=1,
                stream=run_stream,
                tau_grid=tau_grid,
                p_score=p_score,
                hx_method=tuning["hx_method"],
                trim=tuning["trim"],
            )
        elif test == "test2":
            plan = BandwidthPlan(
                c_x=tuning["c_x"],
                delta=None if tuning["auto_eta"] else tuning["delta"],
                h_p=None if tuning["auto_eta"] else tuning["h_p"],
            )
            report = run_test2(
                data,
                plan=plan,
                tau_grid=tau_grid,
                R=1,
                stream=run_stream,
                p_score=p_score,
                hx_method=tuning["hx_method"],
                trim=tuning["trim"],
            )
        elif test == "meantest":
            plan = BandwidthPlan(c_x=tuning["c_x"])
            report = run_meantest(
                data,
                plan=plan,
                R=1,
                stream=run_stream,
                p_score=p_score,
                trim=tuning["trim"],
                multiplier=tuning["multiplier"],
            )
        else:
            raise ConfigurationError(f"unknown test {test!r}")
    except SeltestError as e:
        return np.nan, np.nan, str(e)
    return report.statistic, float(report.boot_draws[0]), None


def run_warp_speed(
    config: DgpConfig,
    test: str = "test1",
    tuning: dict | None = None,
    reps: int = 500,
    alphas=(0.05, 0.10),
    stream: RngStream = RngStream(0),
    threads: int = 1,
) -> McResult:
    """Warp-speed Monte Carlo: one bootstrap draw per replication.

    Critical values are percentiles of the pooled draws; a replication
    that fails (thin set, degenerate fit) is recorded and excluded, and
    more than 2% failures aborts the run.
    """
    tuning = {**_DEFAULT_TUNING, **(tuning or {})}
    jobs = [
        (config, test, tuning, stream.seed, stream.stream_id, rep)
        for rep in range(reps)
    ]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_one_replication, jobs, chunksize=8))
    else:
        results = [_one_replication(j) for j in jobs]
    stats = np.array([r[0] for r in results])
    draws = np.array([r[1] for r in results])
    failures = int(sum(r[2] is not None for r in results))
    if failures > 0.02 * reps:
        msgs = {r[2] for r in results if r[2] is not None}
        raise SeltestError(
            f"{failures} of {reps} replications failed; first causes: "
            + "; ".join(sorted(msgs)[:3])
        )
    ok = np.isfinite(stats) & np.isfinite(draws)
    rates = {
        float(a): float(np.mean(stats[ok] > critical_value(draws[ok], a)))
        for a in alphas
    }
    return McResult(
        rejection_rates=rates,
        reps=int(ok.sum()),
        failures=failures,
        statistics=stats[ok],
        boot_draws=draws[ok],
        config={"dgp": config.__dict__ | {}, "test": test, "tuning": dict(tuning)},
    )


# ---------------------------------------------------------------------------
# Benchmark tables: published rejection rates for side-by-side comparison.
# Quantile first test: cell key (case, alpha, n) -> rates by c in (3.5, 4, 4.5)
# or a single rate for cross-validated cells.

BENCH_T1 = {
    ("I", 0.05, 1000): (0.071, 0.090, 0.080, 0.381, 0.393, 0.379, 0.888, 0.902, 0.892),
    ("I", 0.05, 2000): (0.065, 0.060, 0.054, 0.631, 0.614, 0.517, 0.986, 0.986, 0.987),
    ("I", 0.10, 1000): (0.143, 0.157, 0.147, 0.497, 0.517, 0.476, 0.940, 0.950, 0.937),
    ("I", 0.10, 2000): (0.114, 0.108, 0.126, 0.762, 0.715, 0.679, 0.999, 0.995, 0.994),
    ("II", 0.05, 1000): (0.076, 0.068, 0.066, 0.240, 0.243, 0.245, 0.652, 0.668, 0.654),
    ("II", 0.05, 2000): (0.041, 0.049, 0.058, 0.388, 0.362, 0.341, 0.905, 0.898, 0.920),
    ("II", 0.10, 1000): (0.130, 0.120, 0.112, 0.352, 0.377, 0.330, 0.784, 0.787, 0.771),
    ("II", 0.10, 2000): (0.090, 0.101, 0.111, 0.505, 0.489, 0.443, 0.950, 0.951, 0.955),
    ("III", 0.05, 1000): (0.119, 0.099, 0.094, 0.338, 0.375, 0.338, 0.858, 0.902, 0.870),
    ("III", 0.05, 2000): (0.086, 0.072, 0.065, 0.624, 0.550, 0.558, 0.994, 0.988, 0.992),
    ("III", 0.10, 1000): (0.174, 0.162, 0.133, 0.492, 0.494, 0.478, 0.933, 0.942, 0.931),
    ("III", 0.10, 2000): (0.141, 0.133, 0.149, 0.743, 0.696, 0.692, 0.997, 0.995, 0.997),
    ("IV", 0.05, 1000): (0.083, 0.083, 0.077, 0.466, 0.421, 0.437, 0.937, 0.944, 0.931),
    ("IV", 0.05, 2000): (0.096, 0.092, 0.088, 0.683, 0.698, 0.663, 0.998, 0.996, 0.996),
    ("IV", 0.10, 1000): (0.152, 0.156, 0.135, 0.589, 0.528, 0.543, 0.968, 0.974, 0.968),
    ("IV", 0.10, 2000): (0.150, 0.154, 0.181, 0.794, 0.798, 0.778, 1.000, 0.999, 0.999),
    ("V", 0.05, 1000): (0.072, 0.331, 0.876),
    ("V", 0.05, 2000): (0.045, 0.546, 0.989),
    ("V", 0.10, 1000): (0.123, 0.482, 0.930),
    ("V", 0.10, 2000): (0.111, 0.686, 0.996),
    ("VI", 0.05, 1000): (0.060, 0.325, 0.842),
    ("VI", 0.05, 2000): (0.040, 0.565, 0.991),
    ("VI", 0.10, 1000): (0.130, 0.426, 0.908),
    ("VI", 0.10, 2000): (0.104, 0.673, 0.997),
    ("VII", 0.05, 1000): (1.000, 1.000),
    ("VII", 0.05, 2000): (1.000, 1.000),
    ("VII", 0.10, 1000): (1.000, 1.000),
    ("VII", 0.10, 2000): (1.000, 1.000),
    ("VIII", 0.05, 1000): (0.997, 1.000),
    ("VIII", 0.05, 2000): (1.000, 1.000),
    ("VIII", 0.10, 1000): (0.999, 1.000),
    ("VIII", 0.10, 2000): (1.000, 1.000),
}

# Second test: (case, alpha, n) -> rates by (delta, h_p) group x c, then the
# data-driven row as a single rate.
BENCH_T2 = {
    ("I*", 0.05, 1000): (0.067, 0.076, 0.067, 0.066, 0.060, 0.067,
                         0.079, 0.070, 0.080, 0.075, 0.083, 0.089),
    ("I*", 0.05, 2000): (0.088, 0.129, 0.131, 0.121, 0.096, 0.105,
                         0.102, 0.080, 0.072, 0.068, 0.080, 0.078),
    ("I*", 0.10, 1000): (0.113, 0.112, 0.124, 0.112, 0.111, 0.118,
                         0.125, 0.120, 0.122, 0.141, 0.140, 0.143),
    ("I*", 0.10, 2000): (0.215, 0.210, 0.227, 0.174, 0.167, 0.169,
                         0.124, 0.127, 0.129, 0.138, 0.144, 0.141),
    ("II*", 0.05, 1000): (0.998, 0.998, 0.997, 0.991, 0.987, 0.986,
                          0.875, 0.858, 0.876, 0.761, 0.777, 0.805),
    ("II*", 0.05, 2000): (1.000, 1.000, 1.000, 1.000, 1.000, 1.000,
                          0.999, 0.999, 0.998, 0.984, 0.988, 0.986),
    ("II*", 0.10, 1000): (0.998, 0.999, 0.998, 0.994, 0.993, 0.994,
                          0.924, 0.922, 0.922, 0.884, 0.882, 0.879),
    ("II*", 0.10, 2000): (1.000, 1.000, 1.000, 1.000, 1.000, 1.000,
                          1.000, 1.000, 1.000, 0.996, 0.996, 0.995),
    ("III*", 0.05, 1000): (1.000, 1.000, 1.000, 1.000, 1.000, 1.000,
                           0.998, 0.998, 0.997, 0.967, 0.973, 0.980),
    ("III*", 0.05, 2000): (1.000,) * 12,
    ("III*", 0.10, 1000): (1.000, 1.000, 1.000, 1.000, 1.000, 1.000,
                           1.000, 1.000, 1.000, 0.995, 0.995, 0.995),
    ("III*", 0.10, 2000): (1.000,) * 12,
    ("IV*", 0.05, 1000): (0.005, 0.003, 0.004, 0.007, 0.005, 0.005),
    ("IV*", 0.05, 2000): (0.002, 0.002, 0.003, 0.001, 0.003, 0.003),
    ("IV*", 0.10, 1000): (0.013, 0.009, 0.012, 0.010, 0.007, 0.012),
    ("IV*", 0.10, 2000): (0.011, 0.014, 0.015, 0.011, 0.009, 0.006),
    ("V*", 0.05, 1000): (0.177, 0.156, 0.184, 0.084, 0.088, 0.078),
    ("V*", 0.05, 2000): (0.536, 0.554, 0.518, 0.271, 0.250, 0.253),
    ("V*", 0.10, 1000): (0.256, 0.278, 0.291, 0.129, 0.130, 0.150),
    ("V*", 0.10, 2000): (0.721, 0.716, 0.720, 0.425, 0.421, 0.424),
    ("VI*", 0.05, 1000): (0.779, 0.739, 0.760, 0.457, 0.472, 0.438),
    ("VI*", 0.05, 2000): (1.000, 0.997, 0.998, 0.899, 0.915, 0.910),
    ("VI*", 0.10, 1000): (0.868, 0.864, 0.870, 0.571, 0.573, 0.588),
    ("VI*", 0.10, 2000): (1.000, 1.000, 0.999, 0.960, 0.962, 0.962),
}

BENCH_T2_AUTO = {
    ("I*", 0.05, 1000): 0.076, ("I*", 0.05, 2000): 0.0831,
    ("I*", 0.10, 1000): 0.115, ("I*", 0.10, 2000): 0.140,
    ("II*", 0.05, 1000): 0.821, ("II*", 0.05, 2000): 0.857,
    ("II*", 0.10, 1000): 0.888, ("II*", 0.10, 2000): 0.927,
    ("III*", 0.05, 1000): 0.993, ("III*", 0.05, 2000): 0.981,
    ("III*", 0.10, 1000): 1.000, ("III*", 0.10, 2000): 0.994,
    ("IV*", 0.05, 1000): 0.001, ("IV*", 0.05, 2000): 0.003,
    ("IV*", 0.10, 1000): 0.008, ("IV*", 0.10, 2000): 0.011,
    ("V*", 0.05, 1000): 0.209, ("V*", 0.05, 2000): 0.472,
    ("V*", 0.10, 1000): 0.350, ("V*", 0.10, 2000): 0.641,
    ("VI*", 0.05, 1000): 0.612, ("VI*", 0.05, 2000): 0.996,
    ("VI*", 0.10, 1000): 0.679, ("VI*", 0.10, 2000): 1.000,
}

# Conditional-mean first test: (case, alpha, n) -> rates by c in
# (0.125, 0.25, 0.5) within rho in (0, 0.25, 0.5).
BENCH_S1 = {
    ("I", 0.05, 400): (0.073, 0.061, 0.056, 0.204, 0.179, 0.238, 0.455, 0.535, 0.568),
    ("I", 0.05, 1000): (0.054, 0.046, 0.053, 0.355, 0.350, 0.414, 0.917, 0.931, 0.905),
    ("I", 0.10, 400): (0.142, 0.126, 0.117, 0.302, 0.298, 0.355, 0.648, 0.662, 0.709),
    ("I", 0.10, 1000): (0.118, 0.094, 0.098, 0.459, 0.480, 0.537, 0.957, 0.966, 0.960),
    ("II", 0.05, 400): (0.067, 0.072, 0.084, 0.115, 0.143, 0.164, 0.369, 0.435, 0.384),
    ("II", 0.05, 1000): (0.047, 0.040, 0.052, 0.224, 0.215, 0.299, 0.770, 0.702, 0.730),
    ("II", 0.10, 400): (0.129, 0.126, 0.163, 0.211, 0.224, 0.244, 0.487, 0.530, 0.499),
    ("II", 0.10, 1000): (0.102, 0.112, 0.108, 0.337, 0.346, 0.390, 0.826, 0.792, 0.815),
    ("III", 0.05, 400): (0.051, 0.043, 0.055, 0.153, 0.168, 0.211, 0.545, 0.585, 0.560),
    ("III", 0.05, 1000): (0.044, 0.032, 0.038, 0.393, 0.377, 0.358, 0.908, 0.903, 0.911),
    ("III", 0.10, 400): (0.103, 0.090, 0.129, 0.265, 0.279, 0.305, 0.647, 0.675, 0.699),
    ("III", 0.10, 1000): (0.110, 0.081, 0.092, 0.501, 0.518, 0.484, 0.954, 0.946, 0.953),
    ("IV", 0.05, 400): (0.077, 0.059, 0.056, 0.218, 0.218, 0.239, 0.606, 0.587, 0.586),
    ("IV", 0.05, 1000): (0.061, 0.074, 0.062, 0.396, 0.465, 0.422, 0.964, 0.967, 0.948),
    ("IV", 0.10, 400): (0.134, 0.118, 0.117, 0.316, 0.339, 0.349, 0.714, 0.674, 0.709),
    ("IV", 0.10, 1000): (0.111, 0.122, 0.146, 0.531, 0.577, 0.583, 0.984, 0.989, 0.980),
    ("V", 0.05, 400): (0.073, 0.068, 0.071, 0.172, 0.177, 0.178, 0.536, 0.526, 0.640),
    ("V", 0.05, 1000): (0.056, 0.039, 0.040, 0.349, 0.343, 0.405, 0.916, 0.911, 0.918),
    ("V", 0.10, 400): (0.128, 0.132, 0.152, 0.280, 0.295, 0.287, 0.660, 0.686, 0.730),
    ("V", 0.10, 1000): (0.120, 0.102, 0.093, 0.462, 0.438, 0.512, 0.954, 0.955, 0.969),
    ("VI", 0.05, 400): (0.066, 0.053, 0.064, 0.160, 0.134, 0.142, 0.375, 0.350, 0.375),
    ("VI", 0.05, 1000): (0.049, 0.063, 0.046, 0.212, 0.211, 0.229, 0.718, 0.695, 0.712),
    ("VI", 0.10, 400): (0.111, 0.124, 0.132, 0.220, 0.197, 0.225, 0.474, 0.453, 0.488),
    ("VI", 0.10, 1000): (0.082, 0.100, 0.096, 0.329, 0.303, 0.338, 0.811, 0.808, 0.808),
}

_ROMAN_T1 = ("I", "II", "III", "IV", "V", "VI", "VII", "VIII")
_ROMAN_T2 = ("I*", "II*", "III*", "IV*", "V*", "VI*")
_ROMAN_S1 = ("I", "II", "III", "IV", "V", "VI")
TABLE_IDS = (
    tuple(f"T1-case{c}" for c in _ROMAN_T1)
    + tuple(f"T2-case{c}" for c in _ROMAN_T2)
    + tuple(f"S1-case{c}" for c in _ROMAN_S1)
)

_FULL_REPS = 999


def _t1_cells(case: str):
    designs = {"I": "normal", "II": "binomial", "III": "poisson",
               "IV": "discrete-uniform", "V": "normal", "VI": "normal",
               "VII": "normal", "VIII": "binomial"}
    design = designs[case]
    cells = []
    if case in ("VII", "VIII"):
        for n in (1000, 2000):
            for gamma1 in (0.25, 0.5):
                cells.append({
                    "label": f"gamma1={gamma1}", "n": n,
                    "config": DgpConfig(design=design, rho=0.0, gamma1=gamma1, n=n),
                    "tuning": {"hx_method": "cv", "oracle_p": True},
                })
        return cells
    rhos = (0.0, 0.25, 0.5)
    if case in ("V", "VI"):
        for n in (1000, 2000):
            for rho in rhos:
                cells.append({
                    "label": f"rho={rho}", "n": n,
                    "config": DgpConfig(design=design, rho=rho, n=n),
                    "tuning": {"hx_method": "cv", "oracle_p": case == "V"},
                })
        return cells
    for n in (1000, 2000):
        for rho in rhos:
            for c in (3.5, 4.0, 4.5):
                cells.append({
                    "label": f"rho={rho}, c={c}", "n": n,
                    "config": DgpConfig(design=design, rho=rho, n=n),
                    "tuning": {"c_x": c, "oracle_p": True},
                })
    return cells


def _t2_cells(case: str):
    idx = _ROMAN_T2.index(case)
    gamma1 = (0.0, 0.25, 0.5)[idx % 3]
    binary = idx >= 3
    windows = ((0.95, 0.075), (0.95, 0.05)) if binary else (
        (0.95, 0.075), (0.95, 0.05), (0.975, 0.03), (0.98, 0.02))
    base = dict(
        design="binomial" if binary else "normal",
        rho=0.25,
        gamma1=gamma1,
        sigma=0.5 if binary else 1.0,
        instrument_variance=1.0 if binary else 0.5,
    )
    cells = []
    for n in (1000, 2000):
        for delta, h_p in windows:
            for c in (3.5, 4.0, 4.5):
                cells.append({
                    "label": f"delta={delta}, h_p={h_p}, c={c}", "n": n,
                    "config": DgpConfig(n=n, **base),
                    "tuning": {"c_x": c, "delta": delta, "h_p": h_p,
                               "oracle_p": True},
                })
        cells.append({
            "label": "data-driven", "n": n,
            "config": DgpConfig(n=n, **base),
            "tuning": {"hx_method": "cv", "auto_eta": True, "oracle_p": True},
        })
    return cells


def _s1_cells(case: str):
    designs = {"I": "normal", "II": "binomial", "III": "poisson",
               "IV": "discrete-uniform", "V": "normal", "VI": "binomial"}
    oracle = case in ("I", "II", "III", "IV")
    cells = []
    for n in (400, 1000):
        for rho in (0.0, 0.25, 0.5):
            for c in (0.125, 0.25, 0.5):
                cells.append({
                    "label": f"rho={rho}, c={c}", "n": n,
                    "config": DgpConfig(
                        design=designs[case], rho=rho, n=n,
                        outcome="quadratic-mean"
                    ),
                    "tuning": {"c_x": c, "oracle_p": oracle},
                })
    return cells


def _benchmark_for(table: str, case: str, alpha: float, n: int, pos: int):
    key = (case, alpha, n)
    if table == "T1":
        ref = BENCH_T1.get(key)
    elif table == "S1":
        ref = BENCH_S1.get(key)
    else:
        if pos < 0:
            return BENCH_T2_AUTO.get(key)
        ref = BENCH_T2.get(key)
    if ref is None or pos >= len(ref):
        return None
    return ref[pos]


def replicate_table(
    table_id: str,
    scale: float = 1.0,
    stream: RngStream = RngStream(0),
    alphas=(0.05, 0.10),
    threads: int = 1,
) -> tuple[dict, str]:
    """Re-run one benchmark table case at a fraction of the full
    replication count; returns (cell results, formatted text table)."""
    if not 0.0 < scale <= 1.0:
        raise ConfigurationError("scale must lie in (0, 1]")
    if table_id not in TABLE_IDS:
        raise ConfigurationError(
            f"unknown table id {table_id!r}; choose one of {', '.join(TABLE_IDS)}"
        )
    table, case = table_id.split("-case")
    reps = max(20, int(round(_FULL_REPS * scale)))
    if table == "T1":
        cells, test = _t1_cells(case), "test1"
    elif table == "T2":
        cells, test = _t2_cells(case), "test2"
    else:
        cells, test = _s1_cells(case), "meantest"

    results = {}
    lines = [f"{table_id}  ({reps} replications, warp-speed)", "-" * 72]
    header = f"{'cell':<34}{'n':>6}{'alpha':>7}{'rate':>8}{'published':>11}"
    lines.append(header)
    lines.append("-" * 72)
    for k, cell in enumerate(cells):
        res = run_warp_speed(
            cell["config"], test=test, tuning=cell["tuning"], reps=reps,
            alphas=alphas, stream=stream.substream(k), threads=threads,
        )
        results[(cell["label"], cell["n"])] = res
        pos = _cell_position(table, case, cell, cells)
        for a in alphas:
            ref = _benchmark_for(table, case, a, cell["n"], pos)
            ref_s = f"{ref:.3f}" if ref is not None else "-"
            lines.append(
                f"{cell['label']:<34}{cell['n']:>6}{a:>7.2f}"
                f"{res.rejection_rates[float(a)]:>8.3f}{ref_s:>11}"
            )
    return results, "\n".join(lines) + "\n"


def _cell_position(table: str, case: str, cell: dict, cells: list) -> int:
    """Column index of a cell inside its benchmark row."""
    same_n = [c for c in cells if c["n"] == cell["n"]]
    pos = same_n.index(cell)
    if table == "T2" and cell["label"] == "data-driven":
        return -1
    return pos
