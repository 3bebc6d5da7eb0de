"""Experiment objectives: a synthetic linear-regression stream and four
classical noisy benchmark functions.

Both expose the black-box interface the estimators consume: noisy
evaluations, and where available an exact objective and analytic gradient.
A problem either shares noise contexts across parameter points (the
regression model, whose context is a data point that any parameter vector
can be scored on) or draws fresh noise on every evaluation (the benchmark
functions, whose noise is injected per call).
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ParameterError
from .randomness import RngStream, derive, haar_rotation

DFO_NAMES = ("sphere", "rosenbrock", "cigar", "hm")


class Problem(abc.ABC):
    """Black-box minimization target of dimension ``d``.

    Capability flags tell callers what is available beyond noisy
    evaluations; ``shares_noise`` tells the estimators whether one noise
    context can be re-evaluated at several parameter vectors.
    """

    d: int
    shares_noise: bool = False
    has_exact_objective: bool = False
    has_analytic_gradient: bool = False

    @abc.abstractmethod
    def noisy_eval(self, theta: np.ndarray, stream: RngStream) -> float:
        """One unbiased noisy evaluation of the objective at ``theta``."""

    def noisy_eval_many(self, thetas: np.ndarray, n: int,
                        stream: RngStream) -> np.ndarray:
        """Fresh-noise evaluations: n per row of thetas, shape (m, n)."""
        thetas = np.atleast_2d(thetas)
        out = np.empty((thetas.shape[0], n))
        for i in range(thetas.shape[0]):
            for j in range(n):
                out[i, j] = self.noisy_eval(thetas[i], derive(derive(stream, i), j))
        return out

    def draw_noise(self, stream: RngStream, n: int):
        """Draw a batch of n shareable noise contexts (shares_noise only)."""
        raise NotImplementedError(f"{type(self).__name__} does not share noise")

    def eval_noise(self, thetas: np.ndarray, noise) -> np.ndarray:
        """Evaluate each theta on every context: (..., d) x n -> (..., n)."""
        raise NotImplementedError(f"{type(self).__name__} does not share noise")

    def eval_noise_blocks(self, thetas: np.ndarray, noise) -> np.ndarray:
        """Evaluate thetas[l] on the l-th equal block of the batch.

        ``noise`` holds L * n contexts for thetas of shape (L, d); returns
        shape (L, n).  Default implementation slices and delegates to
        :meth:`eval_noise`; subclasses may override with a fused path,
        which must stay numerically equivalent to this one.
        """
        L = thetas.shape[0]
        n = self.noise_batch_size(noise) // L
        return np.stack([
            self.eval_noise(thetas[l], self.slice_noise(noise, l * n, (l + 1) * n))
            for l in range(L)
        ])

    def noise_batch_size(self, noise) -> int:
        raise NotImplementedError

    def slice_noise(self, noise, start: int, stop: int):
        raise NotImplementedError

    def exact_objective(self, theta: np.ndarray) -> float:
        raise NotImplementedError(f"{type(self).__name__} has no exact objective")

    def analytic_gradient(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no analytic gradient")


class PointBatch(NamedTuple):
    """A batch of regression data points."""

    x: np.ndarray  # (n, d)
    y: np.ndarray  # (n,)


class LinRegModel(Problem):
    """Random-design linear regression with squared-error loss.

    Each data point draws its own coefficient vector gamma ~ U([0, 2]^d),
    noise variance ~ U([0, 2]) and feature covariance Q = V diag(gamma) V^T
    with V a uniformly random rotation, then x ~ N(0, Q) and
    y = gamma . x + noise.  The population objective of the loss
    (y - theta . x)^2 / 2 is quadratic with identity Hessian, and its
    gradient is theta - E[Q gamma]; that expectation is estimated once at
    construction by Monte Carlo, along with the theta-free offset that
    makes the stored exact objective match the mean of noisy evaluations.
    """

    shares_noise = True
    has_exact_objective = True
    has_analytic_gradient = True

    def __init__(self, d: int, stream: RngStream, mc_samples: int = 1000):
        if d < 1:
            raise ParameterError(f"d must be at least 1, got {d}")
        if mc_samples < 2:
            raise ParameterError(f"mc_samples must be at least 2, got {mc_samples}")
        self.d = d
        self.mc_samples = mc_samples
        gen = stream.generator
        qgamma = np.empty((mc_samples, d))
        quad = np.empty(mc_samples)
        # Chunked so the stacked rotation draws stay modest in memory.
        chunk = max(1, min(mc_samples, 4_000_000 // (d * d)))
        for lo in range(0, mc_samples, chunk):
            hi = min(lo + chunk, mc_samples)
            gamma = gen.uniform(0.0, 2.0, (hi - lo, d))
            V = haar_rotation(stream, d, size=hi - lo)
            w = np.einsum("sij,si->sj", V, gamma)
            qgamma[lo:hi] = np.einsum("sij,sj->si", V, gamma * w)
            quad[lo:hi] = np.einsum("si,si->s", gamma, qgamma[lo:hi])
        sigma_sq = gen.uniform(0.0, 2.0, mc_samples)
        self.mean_Qgamma = qgamma.mean(axis=0)
        self.mean_Qgamma_se = qgamma.std(axis=0, ddof=1) / math.sqrt(mc_samples)
        offset_samples = 0.5 * quad + 0.5 * sigma_sq
        self.objective_offset = float(offset_samples.mean())
        self.objective_offset_se = float(
            offset_samples.std(ddof=1) / math.sqrt(mc_samples))

    def sample_points(self, stream: RngStream, n: int) -> PointBatch:
        """Draw n IID data points.

        x is sampled through the polar identity: applying a uniformly
        random rotation to a fixed vector yields a uniformly random
        direction, so x = V (sqrt(gamma) * z) has the same law as
        ||sqrt(gamma) * z|| times a uniform unit vector.  This keeps the
        draw O(d) per point instead of O(d^3).
        """
        d = self.d
        gen = stream.generator
        uniforms = gen.uniform(0.0, 2.0, (n, d + 1))
        gamma, sigma_sq = uniforms[:, :d], uniforms[:, d]
        normals = gen.standard_normal((n, 2 * d + 1))
        z, u, eps = normals[:, :d], normals[:, d:2 * d], normals[:, 2 * d]
        u = u / np.linalg.norm(u, axis=1, keepdims=True)
        radius = np.linalg.norm(np.sqrt(gamma) * z, axis=1)
        x = radius[:, None] * u
        y = np.einsum("ij,ij->i", gamma, x) + np.sqrt(sigma_sq) * eps
        return PointBatch(x=x, y=y)

    def draw_noise(self, stream: RngStream, n: int) -> PointBatch:
        return self.sample_points(stream, n)

    def eval_noise(self, thetas: np.ndarray, noise: PointBatch) -> np.ndarray:
        residual = noise.y - np.asarray(thetas) @ noise.x.T
        with np.errstate(over="ignore"):
            return 0.5 * residual**2

    def eval_noise_blocks(self, thetas: np.ndarray, noise: PointBatch) -> np.ndarray:
        L = thetas.shape[0]
        n = noise.y.size // L
        x3 = noise.x.reshape(L, n, self.d)
        residual = noise.y.reshape(L, n) - np.einsum("ld,lnd->ln", thetas, x3)
        with np.errstate(over="ignore"):
            return 0.5 * residual**2

    def noise_batch_size(self, noise: PointBatch) -> int:
        return noise.y.size

    def slice_noise(self, noise: PointBatch, start: int, stop: int) -> PointBatch:
        return PointBatch(x=noise.x[start:stop], y=noise.y[start:stop])

    def noisy_eval(self, theta: np.ndarray, stream: RngStream) -> float:
        return float(self.eval_noise(theta, self.sample_points(stream, 1))[0])

    def noisy_eval_many(self, thetas: np.ndarray, n: int,
                        stream: RngStream) -> np.ndarray:
        thetas = np.atleast_2d(thetas)
        batch = self.sample_points(stream, thetas.shape[0] * n)
        return self.eval_noise_blocks(thetas, batch)

    def exact_objective(self, theta: np.ndarray) -> float:
        theta = np.asarray(theta)
        return float(0.5 * theta @ theta - self.mean_Qgamma @ theta
                     + self.objective_offset)

    def analytic_gradient(self, theta: np.ndarray) -> np.ndarray:
        return np.asarray(theta, dtype=np.float64) - self.mean_Qgamma

    def noise_trace_from_points(self, theta: np.ndarray, batch: PointBatch) -> float:
        """Trace of the sample covariance of the per-point loss gradient.

        The per-point gradient of the loss at (x, y) is -(y - theta . x) x.
        """
        residual = batch.y - batch.x @ np.asarray(theta)
        grads = -residual[:, None] * batch.x
        return float(grads.var(axis=0, ddof=1).sum())

    def noise_trace(self, theta: np.ndarray, mc: int, stream: RngStream) -> float:
        """Monte-Carlo estimate of the gradient-noise trace over mc points."""
        if mc < 2:
            raise ParameterError(f"mc must be at least 2, got {mc}")
        return self.noise_trace_from_points(theta, self.sample_points(stream, mc))


@dataclass(frozen=True)
class DfoObjective(Problem):
    """Classical benchmark function with additive Gaussian evaluation noise.

    Definitions (no external library is consulted):
      sphere      sum(t_i^2)
      rosenbrock  sum over i < d of 100 (t_{i+1} - t_i^2)^2 + (t_i - 1)^2
      cigar       t_1^2 + 1e6 * sum over i >= 2 of t_i^2
      hm          sum(t_i^2 * (1.1 + cos(1 / t_i))), term taken as 0 at
                  t_i = 0 (the squeezed limit)
    """

    name: str
    d: int
    noise_level: float = 0.1

    shares_noise = False
    has_exact_objective = True
    has_analytic_gradient = False

    def __post_init__(self):
        if self.name not in DFO_NAMES:
            raise ParameterError(
                f"unknown objective {self.name!r}; expected one of {DFO_NAMES}")
        if self.d < 1:
            raise ParameterError(f"d must be at least 1, got {self.d}")
        if self.noise_level < 0.0:
            raise ParameterError(
                f"noise_level must be non-negative, got {self.noise_level}")

    def value_batch(self, thetas: np.ndarray) -> np.ndarray:
        """Noiseless objective values, one per row."""
        t = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            if self.name == "sphere":
                return np.sum(t**2, axis=1)
            if self.name == "rosenbrock":
                return np.sum(100.0 * (t[:, 1:] - t[:, :-1] ** 2) ** 2
                              + (t[:, :-1] - 1.0) ** 2, axis=1)
            if self.name == "cigar":
                return t[:, 0] ** 2 + 1e6 * np.sum(t[:, 1:] ** 2, axis=1)
            terms = np.where(t == 0.0, 0.0, t**2 * (1.1 + np.cos(1.0 / t)))
            return np.sum(terms, axis=1)

    def value(self, theta: np.ndarray) -> float:
        """Noiseless objective value at a single point."""
        return float(self.value_batch(theta)[0])

    def exact_objective(self, theta: np.ndarray) -> float:
        return self.value(theta)

    def noisy_eval(self, theta: np.ndarray, stream: RngStream) -> float:
        z = stream.generator.standard_normal()
        return self.value(theta) + self.noise_level * z

    def noisy_eval_many(self, thetas: np.ndarray, n: int,
                        stream: RngStream) -> np.ndarray:
        thetas = np.atleast_2d(thetas)
        values = self.value_batch(thetas)
        z = stream.generator.standard_normal((thetas.shape[0], n))
        return values[:, None] + self.noise_level * z


@dataclass(frozen=True)
class ProblemSpec:
    """Serializable description of an experiment objective."""

    kind: str  # "linreg" or "dfo"
    d: int
    objective: str = "sphere"
    noise_level: float = 0.1
    mc_samples: int = 1000

    def __post_init__(self):
        if self.kind not in ("linreg", "dfo"):
            raise ParameterError(f"unknown problem kind {self.kind!r}")


def build_problem(spec: ProblemSpec, stream: RngStream) -> Problem:
    """Construct the problem a spec describes, deterministically in the stream."""
    if spec.kind == "linreg":
        return LinRegModel(spec.d, stream, mc_samples=spec.mc_samples)
    return DfoObjective(name=spec.objective, d=spec.d, noise_level=spec.noise_level)
