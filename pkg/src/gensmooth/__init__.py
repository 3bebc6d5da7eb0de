"""Derivative-free optimization with generalized-smoothing gradient estimators.

The package estimates gradients of a black-box objective from noisy
evaluations at randomly perturbed parameters, supporting several
perturbation distributions (Gaussian, standardized Bernoulli, their
variance-shrunk variants, orthogonalized and guided directions), runs SGD
on the estimates, and ships the closed-form error theory the estimator
choices are derived from, together with the experiment harness that
validates it.
"""

from .errors import (
    DivergenceError,
    EvaluationError,
    GensmoothError,
    GridSearchError,
    HypothesisError,
    ParameterError,
    RankDeficiencyError,
    UnsupportedSamplerError,
)
from .estimators import (
    EstimatorConfig,
    GradientEstimate,
    empirical_mse,
    estimate_at,
    estimate_fd,
    estimate_gs_single,
    mse_from_samples,
)
from .optimizer import (
    GridSearchResult,
    RoundMetrics,
    RunConfig,
    RunRecord,
    grid_search,
    run,
    sgd_step,
)
from .problems import (
    DFO_NAMES,
    DfoObjective,
    LinRegModel,
    PointBatch,
    Problem,
    ProblemSpec,
    build_problem,
)
from .randomness import (
    RngStream,
    bernoulli_standardized,
    derive,
    derive_path,
    haar_rotation,
    standard_normal,
)
from .samplers import (
    ALL_KINDS,
    IID_KINDS,
    DirectionSet,
    SamplerSpec,
    bes_shrinkage_scale,
    gs_shrinkage_variance,
    guided_update,
    orthogonalize,
    sample_directions,
)
from .theory import (
    Moments,
    MseDecomposition,
    ProblemStatistics,
    bes_shrinkage_objective,
    convergence_bound,
    distribution_moments,
    fd_mse_closed_form,
    gs_shrinkage_objective,
    mse_gap_gss_vs_bess,
    trace_quartic_closed_form,
)

__version__ = "0.1.0"
