"""Ladder-time branching structure of transient (1,R) random walks in
random environments.

The package provides environment construction (`env`), path simulation
(`walk`), the excursion-to-branching-process decomposition (`decompose`),
matrix-product exit and crossing-back probabilities (`exitprob`), derived
quantities such as expected ladder durations, invariant densities and the
LLN velocity (`analytics`), and a CLI (`rwre`).

Numeric kernels are compiled with numba when available; set
``RWRE_BACKEND=python`` to force the pure-numpy fallback (``rwre.BACKEND``
reports which one is active).
"""

from ._backend import BACKEND
from .analytics import (
    DensityEstimate,
    DriftReport,
    GeometricSeries,
    HomogeneousSolution,
    WaldResiduals,
    drift,
    estimate_density_mc,
    expected_t1,
    geometric_series_mean_matrix,
    homogeneous_closed_forms,
    immigration_law,
    invariant_density,
    kernel_step,
    wald_check,
)
from .decompose import (
    BranchingRecord,
    OffspringTables,
    decompose_general,
    decompose_r2,
    empirical_offspring,
    time_weights,
    type_count,
    type_index,
    type_of,
    verify_time_identity,
)
from .env import (
    Environment,
    EnvironmentLaw,
    SiteLaw,
    homogeneous_law,
    iid_law,
    periodic_law,
    sample_environment,
    shift,
    site_law,
    site_law_new,
)
from .errors import (
    ConditioningStarved,
    DegenerateDenominator,
    DenominatorNonpositive,
    EllipticityViolated,
    InsufficientData,
    MalformedPath,
    MaxStepsExceeded,
    NotConverged,
    NotDriftPositive,
    NotSimplex,
    NumericalOverflow,
    RwreError,
    SeriesDiverged,
    SpectralRadiusAtLeastOne,
)
from .exitprob import (
    CrossingBackProbs,
    ExitDistribution,
    MeanMatrix,
    companion_matrix,
    crossing_back_probs_general,
    crossing_back_probs_r2,
    exit_probs_finite,
    exit_probs_limit,
    mean_matrix,
)
from .walk import (
    LocalTimes,
    RngStream,
    WalkPath,
    final_position,
    local_times,
    simulate_fixed_n,
    simulate_until_ladder,
    step,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "__version__",
    # env
    "SiteLaw", "Environment", "EnvironmentLaw", "site_law", "site_law_new",
    "homogeneous_law", "periodic_law", "iid_law", "sample_environment", "shift",
    # walk
    "RngStream", "WalkPath", "LocalTimes", "step", "simulate_until_ladder",
    "local_times", "simulate_fixed_n", "final_position",
    # decompose
    "BranchingRecord", "OffspringTables", "type_index", "type_of", "type_count",
    "time_weights", "decompose_r2", "decompose_general", "verify_time_identity",
    "empirical_offspring",
    # exitprob
    "ExitDistribution", "CrossingBackProbs", "MeanMatrix", "companion_matrix",
    "exit_probs_finite", "exit_probs_limit", "crossing_back_probs_r2",
    "crossing_back_probs_general", "mean_matrix",
    # analytics
    "HomogeneousSolution", "WaldResiduals", "GeometricSeries", "DensityEstimate",
    "DriftReport", "immigration_law", "expected_t1", "homogeneous_closed_forms",
    "wald_check", "geometric_series_mean_matrix", "invariant_density",
    "estimate_density_mc", "kernel_step", "drift",
    # errors
    "RwreError", "NotSimplex", "EllipticityViolated", "MaxStepsExceeded",
    "MalformedPath", "InsufficientData", "NumericalOverflow", "NotConverged",
    "DegenerateDenominator", "SeriesDiverged", "NotDriftPositive",
    "SpectralRadiusAtLeastOne", "ConditioningStarved", "DenominatorNonpositive",
]
