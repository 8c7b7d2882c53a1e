"""Nonparametric tests for sample selection in conditional quantile and
mean functions: an omnibus omitted-predictor test with the propensity
score as the omitted variable, a follow-up test on observations with
score near one that separates selection from misspecification, wild
bootstrap inference for both, and a Monte Carlo harness."""

from .data import BandwidthPlan, Dataset, trim_x_tails
from .errors import (
    ConfigurationError,
    DataError,
    EmptySampleError,
    EstimationError,
    SeltestError,
    ThinSetError,
)
from .grid import BoxIndexer, GridSpec, build_default_grid
from .kernels import (
    EPANECHNIKOV,
    DiscreteKernelSpec,
    KernelSpec,
    discrete_kernel,
    kernel_eval,
    product_kernel,
)
from .meantest import bootstrap_z1m, run_meantest, statistic_z1m
from .montecarlo import (
    DgpConfig,
    McResult,
    generate_dgp,
    replicate_table,
    run_warp_speed,
    true_quantile_cubic,
)
from .quantile import (
    cv_bandwidth_undersmoothed,
    fit_local_poly_quantile,
    fit_local_poly_quantile_near_one,
    poly_multi_indices,
    quantile_residuals,
)
from .reports import MeanTestReport, Test2Report, TestReport, critical_value, p_value
from .rng import RngStream, draw_uniforms
from .smoothers import (
    PropensityFit,
    cond_cdf_table,
    cv_bandwidth_propensity,
    fit_cond_cdf,
    fit_propensity,
    nw_mean_and_density,
    rule_of_thumb_bandwidths,
)
from .test1 import bootstrap_z1, run_test1, statistic_z1
from .test2 import (
    EtaScan,
    bootstrap_z2,
    decision_rule,
    run_test2,
    select_eta,
    statistic_z2,
)

__version__ = "0.1.0"
