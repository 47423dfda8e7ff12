"""Weighted random closed polygons via conformal barycenter closure."""

from .barycenter import (
    BarycenterResult,
    SolverSettings,
    close,
    conformal_barycenter,
    interpolate_closure,
    is_stable,
    open_polygon,
    solve_batch,
)
from .errors import (
    AbortAfterRedraws,
    BudgetExceeded,
    DegenerateDenominator,
    DegenerateSpan,
    InvalidEdgeLengths,
    NonConvergence,
    PolySampleError,
    SingularGram,
    Unstable,
    ZeroWeightSum,
)
from .estimator import (
    EstimateReport,
    HistogramSpec,
    chord_length,
    gyradius_squared,
    ratio_ci,
    ratio_estimate,
    run_until_ci,
    weighted_histogram,
)
from .hyperbolic import shift
from .sampler import SampleBatch, SamplerConfig, WeightedSample, next_sample, sample_batch
from .weights import RhoPreset, chi, jacobian_opening, weight_K, weight_K_hat

__all__ = [
    "AbortAfterRedraws", "BarycenterResult", "BudgetExceeded", "DegenerateDenominator",
    "DegenerateSpan", "EstimateReport", "HistogramSpec", "InvalidEdgeLengths",
    "NonConvergence", "PolySampleError", "RhoPreset", "SampleBatch", "SamplerConfig",
    "SingularGram", "SolverSettings", "Unstable", "WeightedSample", "ZeroWeightSum",
    "chi", "chord_length", "close", "conformal_barycenter", "gyradius_squared",
    "interpolate_closure", "is_stable", "jacobian_opening", "next_sample", "open_polygon",
    "ratio_ci", "ratio_estimate", "run_until_ci", "sample_batch", "shift",
    "weighted_histogram", "weight_K", "weight_K_hat",
]
