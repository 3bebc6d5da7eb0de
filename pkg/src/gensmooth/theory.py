"""Closed-form expressions for the gradient estimators' error behavior.

All formulas describe the small-spacing limit of the multi-direction
finite-difference estimator under IID zero-mean direction entries.  They
serve as the analytic counterpart to the Monte-Carlo quantities computed
in :mod:`gensmooth.estimators`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import HypothesisError, ParameterError, UnsupportedSamplerError
from .samplers import SamplerSpec

__all__ = [
    "Moments",
    "MseDecomposition",
    "ProblemStatistics",
    "distribution_moments",
    "fd_mse_closed_form",
    "gs_shrinkage_objective",
    "bes_shrinkage_objective",
    "mse_gap_gss_vs_bess",
    "convergence_bound",
    "trace_quartic_closed_form",
]


@dataclass(frozen=True)
class Moments:
    """Variance and kurtosis of a single direction entry.

    Kurtosis is the raw fourth standardized moment; its minimum over all
    distributions is 1, attained by the symmetric two-point distribution.
    """

    variance: float
    kurtosis: float

    def __post_init__(self):
        if self.variance <= 0.0:
            raise ParameterError(f"variance must be positive, got {self.variance}")
        if self.kurtosis < 1.0:
            raise ParameterError(f"kurtosis must be at least 1, got {self.kurtosis}")


@dataclass(frozen=True)
class ProblemStatistics:
    """Objective statistics entering the closed-form MSE.

    grad_norm_sq is the squared norm of the exact gradient at the point of
    interest; noise_trace is the trace of the covariance of the per-sample
    gradient of the random evaluation.
    """

    grad_norm_sq: float
    noise_trace: float

    def __post_init__(self):
        if not (self.grad_norm_sq >= 0.0 and math.isfinite(self.grad_norm_sq)):
            raise ParameterError("grad_norm_sq must be finite and non-negative")
        if not (self.noise_trace >= 0.0 and math.isfinite(self.noise_trace)):
            raise ParameterError("noise_trace must be finite and non-negative")


@dataclass(frozen=True)
class MseDecomposition:
    """Mean squared error of a gradient estimate, split two ways.

    total = squared_bias + trace_variance (bias/variance split) and, for
    closed-form decompositions, total = gradient_term + noise_term (split
    by the objective statistic each term scales with).
    """

    squared_bias: float
    trace_variance: float
    total: float
    gradient_term: float = 0.0
    noise_term: float = 0.0


def distribution_moments(spec: SamplerSpec) -> Moments:
    """Entry variance and kurtosis for an IID-entry sampler spec."""
    if spec.kind in ("gs", "gs-shrinkage"):
        return Moments(variance=spec.sigma_sq, kurtosis=3.0)
    if spec.kind in ("bes", "bes-shrinkage"):
        x = spec.p * (1.0 - spec.p)
        return Moments(variance=x / spec.m**2, kurtosis=3.0 + (1.0 - 6.0 * x) / x)
    raise UnsupportedSamplerError(
        f"moments are undefined for kind {spec.kind!r}: entries are not IID")


def fd_mse_closed_form(moments: Moments, L: int, N: int, d: int,
                       stats: ProblemStatistics) -> MseDecomposition:
    """Small-spacing MSE of the L-direction, N-evaluation FD estimator.

    The same expression holds for the antithetic estimator.
    """
    if L < 1 or N < 1 or d < 1:
        raise ParameterError(f"L, N, d must be at least 1, got {(L, N, d)}")
    s2, k = moments.variance, moments.kurtosis
    gradient_term = ((s2 - 1.0) ** 2 + s2**2 / L * (d + k - 2.0)) * stats.grad_norm_sq
    noise_term = s2**2 / (L * N) * (d + k - 1.0) * stats.noise_trace
    squared_bias = (s2 - 1.0) ** 2 * stats.grad_norm_sq
    total = gradient_term + noise_term
    return MseDecomposition(
        squared_bias=squared_bias,
        trace_variance=total - squared_bias,
        total=total,
        gradient_term=gradient_term,
        noise_term=noise_term,
    )


def gs_shrinkage_objective(sigma_sq: float, L: int, d: int) -> float:
    """Gradient-scaled MSE term for a centered Gaussian entry of variance sigma_sq."""
    if sigma_sq <= 0.0:
        raise ParameterError(f"sigma_sq must be positive, got {sigma_sq}")
    return (sigma_sq - 1.0) ** 2 + sigma_sq**2 / L * (d + 1.0)


def bes_shrinkage_objective(p: float, m: float, L: int, d: int) -> float:
    """Gradient-scaled MSE term for a (B_p - p) / m entry."""
    if not 0.0 < p < 1.0:
        raise ParameterError(f"p must be in (0, 1), got {p}")
    if m <= 0.0:
        raise ParameterError(f"m must be positive, got {m}")
    x = p * (1.0 - p)
    return (x / m**2 - 1.0) ** 2 + x**2 / (L * m**4) * (d + 1.0 + (1.0 - 6.0 * x) / x)


def mse_gap_gss_vs_bess(L: int, N: int, d: int, stats: ProblemStatistics) -> float:
    """Closed-form MSE(Gaussian shrinkage) - MSE(Bernoulli shrinkage).

    Positive means the Gaussian-shrinkage estimator has the larger MSE.
    The gradient part of the gap is always positive; the noise part flips
    it negative once the per-sample gradient noise dominates (for d > L).
    """
    if L < 1 or N < 1 or d < 1:
        raise ParameterError(f"L, N, d must be at least 1, got {(L, N, d)}")
    if L + d <= 5:
        raise HypothesisError(f"requires L + d > 5, got L={L}, d={d}")
    lead = 2.0 * L / ((L + d - 1.0) * (L + d + 1.0))
    noise_coef = (L**2 - 2.0 * L + 2.0 - (d + 1.0) ** 2) / (
        N * (L + d - 1.0) * (L + d + 1.0))
    return lead * (stats.grad_norm_sq + noise_coef * stats.noise_trace)


def convergence_bound(M: float, B: float, delta: float, mu: float, T: int) -> float:
    """Bound on the mean squared gradient norm over T biased-SGD steps.

    Requires relative gradient bias B < 0.5; M bounds the estimate MSE,
    delta the objective range, mu the smoothness constant, and the step
    size is 1 / (mu * sqrt(T)).
    """
    if B >= 0.5:
        raise HypothesisError(f"bound requires B < 0.5, got B={B}")
    if B < 0.0 or M < 0.0 or delta < 0.0:
        raise ParameterError("M, B, delta must be non-negative")
    if mu <= 0.0:
        raise ParameterError(f"mu must be positive, got {mu}")
    if T < 1:
        raise ParameterError(f"T must be at least 1, got {T}")
    return (M + 4.0 * delta * mu) / ((1.0 - 2.0 * B) * math.sqrt(T))


def trace_quartic_closed_form(moments: Moments, d: int, A: np.ndarray) -> float:
    """trace(E[eps eps^T A eps eps^T]) for a d-vector of IID entries.

    Equals variance**2 * (d + kurtosis - 1) * trace(A).
    """
    A = np.asarray(A, dtype=np.float64)
    if A.shape != (d, d):
        raise ParameterError(f"A must be {d} x {d}, got shape {A.shape}")
    return moments.variance**2 * (d + moments.kurtosis - 1.0) * float(np.trace(A))
