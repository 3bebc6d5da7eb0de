"""Zeroth-order gradient estimators built from objective evaluations.

Three estimators: a single-direction smoothing estimate, and the
multi-direction forward-difference (FD) and antithetic (AT) estimators.
FD and AT average over L directions with N noise draws per direction; each
direction gets its own fresh noise batch, shared between its perturbed and
base evaluations when the problem supports shared contexts.  Every
estimate therefore consumes exactly 2 L N objective evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EvaluationError, ParameterError
from .randomness import RngStream, derive, standard_normal
from .samplers import DirectionSet, SamplerSpec, sample_directions
from .theory import MseDecomposition

KIND_SINGLE = "gs-single"
KIND_FD = "fd"
KIND_AT = "at"

# Sub-stream labels within one estimate.
_LABEL_DIRECTION = 0
_LABEL_NOISE = 1
_LABEL_NOISE_MINUS = 2

# Floor for the reward standard deviation used in standardization.
_STD_FLOOR = 1e-8


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimator kind and its sampling sizes.

    c is the finite-difference spacing, L the number of directions per
    estimate, N the number of noise draws per direction.  When
    standardize_rewards is set, the evaluation differences are divided by
    the standard deviation of all evaluations collected for the estimate.
    """

    kind: str
    c: float
    L: int
    N: int = 1
    standardize_rewards: bool = False

    def __post_init__(self):
        if self.kind not in (KIND_SINGLE, KIND_FD, KIND_AT):
            raise ParameterError(f"unknown estimator kind {self.kind!r}")
        if self.c <= 0.0:
            raise ParameterError(f"c must be positive, got {self.c}")
        if self.L < 1 or self.N < 1:
            raise ParameterError(f"L and N must be at least 1, got {(self.L, self.N)}")


@dataclass(frozen=True)
class GradientEstimate:
    """A gradient estimate plus how it was produced.

    evaluations_used is the exact number of objective evaluations made:
    2 L N for the FD and AT estimators, 1 for the single-direction one.
    std_clamped records that reward standardization hit its floor.
    """

    vector: np.ndarray
    config: EstimatorConfig
    evaluations_used: int
    std_clamped: bool = False


def _check_finite(values: np.ndarray, thetas: np.ndarray) -> None:
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    if np.all(np.isfinite(values)):
        return
    row = int(np.argwhere(~np.isfinite(values))[0][0])
    raise EvaluationError("objective evaluation is not finite",
                          theta=np.atleast_2d(thetas)[row])


def _check_vector(vector: np.ndarray, theta: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(vector)):
        raise EvaluationError("gradient estimate overflowed", theta=theta)
    return vector


def _standardize(diffs: np.ndarray, pools: tuple[np.ndarray, ...]) -> tuple[np.ndarray, bool]:
    """Divide the differences by the pooled evaluation standard deviation."""
    std = float(np.std(np.concatenate([p.ravel() for p in pools])))
    clamped = std < _STD_FLOOR
    return diffs / max(std, _STD_FLOOR), clamped


def _pair_evaluations(problem, thetas_a: np.ndarray, thetas_b: np.ndarray,
                      N: int, stream: RngStream) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate two parameter sets row-paired over per-direction noise.

    Row l of each set is evaluated N times.  For shared-noise problems the
    same N contexts serve both evaluations of a row (fresh contexts per
    row); otherwise every evaluation draws fresh noise.  Returns two
    (L, N) arrays.
    """
    L = thetas_a.shape[0]
    if problem.shares_noise:
        noise = problem.draw_noise(derive(stream, 0), L * N)
        values_a = problem.eval_noise_blocks(thetas_a, noise)
        values_b = problem.eval_noise_blocks(thetas_b, noise)
    else:
        values_a = problem.noisy_eval_many(thetas_a, N, derive(stream, 0))
        values_b = problem.noisy_eval_many(thetas_b, N, derive(stream, 1))
    return values_a, values_b


def estimate_gs_single(problem, theta: np.ndarray, c: float,
                       stream: RngStream) -> GradientEstimate:
    """Single-direction smoothing estimate: (1/c) f(theta + c eps) eps."""
    if c <= 0.0:
        raise ParameterError(f"c must be positive, got {c}")
    theta = np.asarray(theta, dtype=np.float64)
    eps = standard_normal(derive(stream, _LABEL_DIRECTION), theta.size)
    point = theta + c * eps
    value = problem.noisy_eval(point, derive(stream, _LABEL_NOISE))
    _check_finite(np.asarray(value), point)
    config = EstimatorConfig(kind=KIND_SINGLE, c=c, L=1, N=1)
    return GradientEstimate(vector=_check_vector((value / c) * eps, theta),
                            config=config, evaluations_used=1)


def estimate_fd(problem, theta: np.ndarray, cfg: EstimatorConfig,
                dirs: DirectionSet, stream: RngStream) -> GradientEstimate:
    """Forward-difference estimate over the given direction set.

    (1 / (c L N)) * sum over directions l and noise draws i of
    (f(theta + c eps_l, xi_li) - f(theta, xi_li)) eps_l.
    """
    if cfg.kind != KIND_FD:
        raise ParameterError(f"config kind must be {KIND_FD!r}, got {cfg.kind!r}")
    theta = np.asarray(theta, dtype=np.float64)
    eps = dirs.directions
    if eps.shape != (cfg.L, theta.size):
        raise ParameterError(
            f"direction set shape {eps.shape} does not match (L, d) = "
            f"{(cfg.L, theta.size)}")
    perturbed_thetas = theta[None, :] + cfg.c * eps
    base_thetas = np.broadcast_to(theta, (cfg.L, theta.size))
    perturbed, base = _pair_evaluations(
        problem, perturbed_thetas, base_thetas, cfg.N, derive(stream, _LABEL_NOISE))
    _check_finite(perturbed, perturbed_thetas)
    _check_finite(base, base_thetas)
    diffs = perturbed - base
    clamped = False
    if cfg.standardize_rewards:
        diffs, clamped = _standardize(diffs, (perturbed, base))
    vector = eps.T @ diffs.sum(axis=1) / (cfg.c * cfg.L * cfg.N)
    return GradientEstimate(vector=_check_vector(vector, theta), config=cfg,
                            evaluations_used=2 * cfg.L * cfg.N, std_clamped=clamped)


def estimate_at(problem, theta: np.ndarray, cfg: EstimatorConfig,
                dirs: DirectionSet, stream: RngStream) -> GradientEstimate:
    """Antithetic estimate over the given direction set.

    (1 / (2 c L N)) * sum over directions l and noise draws i of
    (f(theta + c eps_l, xi_li) - f(theta - c eps_l, xi_li)) eps_l.
    """
    if cfg.kind != KIND_AT:
        raise ParameterError(f"config kind must be {KIND_AT!r}, got {cfg.kind!r}")
    theta = np.asarray(theta, dtype=np.float64)
    eps = dirs.directions
    if eps.shape != (cfg.L, theta.size):
        raise ParameterError(
            f"direction set shape {eps.shape} does not match (L, d) = "
            f"{(cfg.L, theta.size)}")
    plus_thetas = theta[None, :] + cfg.c * eps
    minus_thetas = theta[None, :] - cfg.c * eps
    plus, minus = _pair_evaluations(
        problem, plus_thetas, minus_thetas, cfg.N, derive(stream, _LABEL_NOISE))
    _check_finite(plus, plus_thetas)
    _check_finite(minus, minus_thetas)
    diffs = plus - minus
    clamped = False
    if cfg.standardize_rewards:
        diffs, clamped = _standardize(diffs, (plus, minus))
    vector = eps.T @ diffs.sum(axis=1) / (2.0 * cfg.c * cfg.L * cfg.N)
    return GradientEstimate(vector=_check_vector(vector, theta), config=cfg,
                            evaluations_used=2 * cfg.L * cfg.N, std_clamped=clamped)


def estimate(problem, theta: np.ndarray, cfg: EstimatorConfig,
             dirs: DirectionSet, stream: RngStream) -> GradientEstimate:
    """Dispatch to the FD or AT estimator by config kind."""
    if cfg.kind == KIND_FD:
        return estimate_fd(problem, theta, cfg, dirs, stream)
    if cfg.kind == KIND_AT:
        return estimate_at(problem, theta, cfg, dirs, stream)
    raise ParameterError(f"cannot dispatch estimator kind {cfg.kind!r}")


def mse_from_samples(estimates: np.ndarray, gradient: np.ndarray) -> MseDecomposition:
    """Decompose the empirical MSE of gradient estimates against a reference.

    total is the mean of ||g_r - gradient||^2 over rows; it splits exactly
    into the squared norm of the mean error (bias part) and the trace of
    the population covariance of the rows (variance part).
    """
    estimates = np.asarray(estimates, dtype=np.float64)
    if estimates.ndim != 2 or estimates.shape[0] < 2:
        raise ParameterError("need at least 2 estimate rows")
    gradient = np.asarray(gradient, dtype=np.float64)
    mean = estimates.mean(axis=0)
    squared_bias = float(np.sum((mean - gradient) ** 2))
    trace_variance = float(estimates.var(axis=0).sum())
    return MseDecomposition(
        squared_bias=squared_bias,
        trace_variance=trace_variance,
        total=squared_bias + trace_variance,
    )


def empirical_mse(problem, theta: np.ndarray, cfg: EstimatorConfig,
                  spec: SamplerSpec, replications: int,
                  stream: RngStream) -> MseDecomposition:
    """Monte-Carlo MSE of the estimator against the analytic gradient.

    Draws ``replications`` independent estimates, each with fresh
    directions and fresh noise, and decomposes their mean squared error
    around problem.analytic_gradient(theta).
    """
    if not problem.has_analytic_gradient:
        raise ParameterError("problem does not expose an analytic gradient")
    if replications < 2:
        raise ParameterError(f"need at least 2 replications, got {replications}")
    theta = np.asarray(theta, dtype=np.float64)
    dir_stream = derive(stream, 0)
    noise_stream = derive(stream, 1)
    samples = np.empty((replications, theta.size))
    for r in range(replications):
        dirs = sample_directions(spec, cfg.L, theta.size, derive(dir_stream, r))
        est = estimate(problem, theta, cfg, dirs, derive(noise_stream, r))
        samples[r] = est.vector
    return mse_from_samples(samples, problem.analytic_gradient(theta))
