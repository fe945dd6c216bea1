"""Average age of information for K-of-N multicast status updating under a
hard service deadline: exact closed forms, a Monte Carlo validator, numerical
oracles, and deadline/quorum optimization."""

__version__ = "0.1.0"

from .params import (
    DeadlineNotAboveShift,
    NonPositiveRate,
    NonPositiveShift,
    ParamError,
    QuorumOutOfRange,
    SystemParams,
    validate,
)
from .orderstats import (
    STABILITY_LIMIT_N,
    CoeffTable,
    DegenerateConditioning,
    OverflowRisk,
    QuadratureNonConvergence,
    build_coeffs,
    cond_moments_tnk,
    order_stat_cdf,
    quadrature_moments_tnk,
)
from .renewal import (
    AnalyticBreakdown,
    average_aoi,
    prob_f2,
    prob_s1,
    prob_success,
    t_hat_mean,
    t_hat_mean_quadrature,
    w_moments,
    xf_moments,
    xs_moments,
)
from .simulator import SimConfig, SimEstimate, estimate, run_trial, run_update, sample_service
from .optimize import (
    MinimizeResult,
    SweepRecord,
    argmin_quorum,
    minimize_deadline,
    sweep_deadline,
    sweep_quorum,
)

__all__ = [
    "AnalyticBreakdown", "CoeffTable", "DeadlineNotAboveShift",
    "DegenerateConditioning", "MinimizeResult", "NonPositiveRate",
    "NonPositiveShift", "OverflowRisk", "ParamError", "QuadratureNonConvergence",
    "QuorumOutOfRange", "STABILITY_LIMIT_N", "SimConfig", "SimEstimate",
    "SweepRecord", "SystemParams", "argmin_quorum", "average_aoi",
    "build_coeffs", "cond_moments_tnk", "estimate", "minimize_deadline",
    "order_stat_cdf", "prob_f2", "prob_s1", "prob_success",
    "quadrature_moments_tnk", "run_trial", "run_update", "sample_service",
    "sweep_deadline", "sweep_quorum", "t_hat_mean", "t_hat_mean_quadrature",
    "validate", "w_moments", "xf_moments", "xs_moments",
]
