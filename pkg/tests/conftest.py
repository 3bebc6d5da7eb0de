"""Shared test problems implementing the black-box interface."""

import numpy as np

from gensmooth.problems import Problem


class LinearProblem(Problem):
    """Noise-free linear objective a . theta."""

    has_exact_objective = True
    has_analytic_gradient = True

    def __init__(self, a):
        self.a = np.asarray(a, dtype=np.float64)
        self.d = self.a.size

    def noisy_eval(self, theta, stream):
        return float(self.a @ np.asarray(theta))

    def noisy_eval_many(self, thetas, n, stream):
        values = np.atleast_2d(thetas) @ self.a
        return np.repeat(values[:, None], n, axis=1)

    def exact_objective(self, theta):
        return float(self.a @ np.asarray(theta))

    def analytic_gradient(self, theta):
        return self.a.copy()


class ConstantProblem(Problem):
    """Objective fixed at a constant value."""

    has_exact_objective = True

    def __init__(self, d, value=3.0):
        self.d = d
        self.value = value

    def noisy_eval(self, theta, stream):
        return self.value

    def noisy_eval_many(self, thetas, n, stream):
        return np.full((np.atleast_2d(thetas).shape[0], n), self.value)

    def exact_objective(self, theta):
        return self.value


class SquaredNormProblem(Problem):
    """Noise-free even objective ||theta||^2."""

    has_exact_objective = True

    def __init__(self, d):
        self.d = d

    def noisy_eval(self, theta, stream):
        theta = np.asarray(theta)
        return float(theta @ theta)

    def noisy_eval_many(self, thetas, n, stream):
        values = np.sum(np.atleast_2d(thetas) ** 2, axis=1)
        return np.repeat(values[:, None], n, axis=1)

    def exact_objective(self, theta):
        return self.noisy_eval(theta, None)


class CountingProblem(Problem):
    """Wrapper counting every objective evaluation of an inner problem."""

    def __init__(self, inner):
        self.inner = inner
        self.d = inner.d
        self.shares_noise = inner.shares_noise
        self.has_exact_objective = inner.has_exact_objective
        self.has_analytic_gradient = inner.has_analytic_gradient
        self.calls = 0

    def noisy_eval(self, theta, stream):
        self.calls += 1
        return self.inner.noisy_eval(theta, stream)

    def noisy_eval_many(self, thetas, n, stream):
        values = self.inner.noisy_eval_many(thetas, n, stream)
        self.calls += values.size
        return values

    def draw_noise(self, stream, n):
        return self.inner.draw_noise(stream, n)

    def eval_noise(self, thetas, noise):
        values = self.inner.eval_noise(thetas, noise)
        self.calls += np.asarray(values).size
        return values

    def eval_noise_blocks(self, thetas, noise):
        values = self.inner.eval_noise_blocks(thetas, noise)
        self.calls += values.size
        return values

    def exact_objective(self, theta):
        return self.inner.exact_objective(theta)

    def analytic_gradient(self, theta):
        return self.inner.analytic_gradient(theta)
