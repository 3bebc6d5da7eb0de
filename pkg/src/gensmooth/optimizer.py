"""SGD over estimated gradients, the round-based experiment loop, and the
hyperparameter grid-search driver.

A run is a pure function of its configuration: every random draw comes
from a sub-stream derived from the run seed, so identical configurations
reproduce identical records regardless of scheduling.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DivergenceError, EvaluationError, GridSearchError, ParameterError
from .estimators import EstimatorConfig, GradientEstimate, estimate
from .problems import LinRegModel, ProblemSpec, build_problem
from .randomness import RngStream, derive, derive_path, standard_normal
from .samplers import SamplerSpec, guided_update, sample_directions

# Sub-stream labels of a run, under the root stream of the seed.
_LABEL_PROBLEM = 0
_LABEL_TEST_SET = 1
_LABEL_INIT = 2
_LABEL_DIRECTIONS = 3
_LABEL_NOISE = 4

_TEST_SET_SIZE = 1000


@dataclass(frozen=True)
class RunConfig:
    """Everything one optimization run depends on."""

    problem: ProblemSpec
    algo: str
    c: float
    L: int
    learning_rate: float
    N: int = 1
    estimator: str = "fd"
    standardize_rewards: bool = False
    rounds: int = 100
    iters_per_round: int = 10
    seed: int = 0
    direction: str = "minimize"

    def __post_init__(self):
        if self.rounds < 1 or self.iters_per_round < 0:
            raise ParameterError(
                f"rounds must be >= 1 and iters_per_round >= 0, got "
                f"{(self.rounds, self.iters_per_round)}")
        if self.learning_rate < 0.0:
            raise ParameterError(
                f"learning_rate must be non-negative, got {self.learning_rate}")
        if self.direction not in ("minimize", "maximize"):
            raise ParameterError(f"unknown direction {self.direction!r}")

    def estimator_config(self) -> EstimatorConfig:
        return EstimatorConfig(kind=self.estimator, c=self.c, L=self.L, N=self.N,
                               standardize_rewards=self.standardize_rewards)


@dataclass(frozen=True)
class RoundMetrics:
    """Metrics recorded after one round."""

    round_index: int
    test_metric: float
    grad_mse: float  # NaN when no analytic gradient or no iterations
    evaluations: int  # cumulative objective evaluations so far


@dataclass(frozen=True)
class RunRecord:
    """Per-round metrics and final state of one run."""

    config: RunConfig
    rows: tuple[RoundMetrics, ...]
    final_theta: np.ndarray
    total_evaluations: int
    diverged: bool = False
    diverged_at: tuple[int, int] | None = None  # (round, iteration)


def sgd_step(theta: np.ndarray, estimate: GradientEstimate | np.ndarray,
             learning_rate: float, direction: str = "minimize") -> np.ndarray:
    """One SGD update; raises :class:`DivergenceError` on non-finite output."""
    g = estimate.vector if isinstance(estimate, GradientEstimate) else np.asarray(estimate)
    sign = -1.0 if direction == "minimize" else 1.0
    with np.errstate(over="ignore", invalid="ignore"):
        theta_next = np.asarray(theta, dtype=np.float64) + sign * learning_rate * g
    if not np.all(np.isfinite(theta_next)):
        raise DivergenceError("parameters became non-finite")
    return theta_next


def _test_metric(problem, theta: np.ndarray, test_set) -> float:
    """Test loss on the held-out set (regression) or the noiseless
    objective at theta (benchmarks)."""
    if test_set is not None:
        with np.errstate(over="ignore"):
            value = float(np.mean(problem.eval_noise(theta, test_set)))
        return value
    return float(problem.exact_objective(theta))


def run(config: RunConfig) -> RunRecord:
    """Execute one optimization run.

    Each round applies ``iters_per_round`` SGD steps, every step using
    freshly sampled directions and noise, then records the test metric
    and, when the problem has an analytic gradient, the squared error of
    the step's gradient estimates averaged over the round.  Divergence
    (non-finite parameters or evaluations) aborts the run and returns the
    partial record flagged accordingly.
    """
    root = RngStream(config.seed)
    problem = build_problem(config.problem, derive(root, _LABEL_PROBLEM))
    test_set = None
    if isinstance(problem, LinRegModel):
        test_set = problem.sample_points(derive(root, _LABEL_TEST_SET), _TEST_SET_SIZE)
    theta = standard_normal(derive(root, _LABEL_INIT), problem.d)
    spec = SamplerSpec.for_kind(config.algo, config.L, problem.d)
    cfg = config.estimator_config()

    rows: list[RoundMetrics] = []
    evaluations = 0
    diverged = False
    diverged_at = None
    for round_index in range(config.rounds):
        mses: list[float] = []
        for iteration in range(config.iters_per_round):
            t = round_index * config.iters_per_round + iteration
            try:
                dirs = sample_directions(
                    spec, config.L, problem.d,
                    derive_path(root, _LABEL_DIRECTIONS, t))
                est = estimate(problem, theta, cfg, dirs,
                               derive_path(root, _LABEL_NOISE, t))
                evaluations += est.evaluations_used
                if problem.has_analytic_gradient:
                    error = est.vector - problem.analytic_gradient(theta)
                    mses.append(float(error @ error))
                theta = sgd_step(theta, est, config.learning_rate, config.direction)
                spec = guided_update(spec, est.vector)
            except (DivergenceError, EvaluationError):
                diverged = True
                diverged_at = (round_index, iteration)
                break
        if diverged:
            break
        grad_mse = float(np.mean(mses)) if mses else math.nan
        rows.append(RoundMetrics(
            round_index=round_index,
            test_metric=_test_metric(problem, theta, test_set),
            grad_mse=grad_mse,
            evaluations=evaluations,
        ))
    return RunRecord(config=config, rows=tuple(rows), final_theta=theta,
                     total_evaluations=evaluations, diverged=diverged,
                     diverged_at=diverged_at)


@dataclass(frozen=True)
class CellResult:
    """Outcome of one grid-search cell."""

    c: float
    learning_rate: float
    mean_metric: float  # NaN when diverged
    diverged: bool
    per_seed: tuple[float, ...]


@dataclass(frozen=True)
class GridSearchResult:
    """Selected hyperparameters plus the full cell table."""

    c: float
    learning_rate: float
    cells: tuple[CellResult, ...]


def grid_search(base: RunConfig, c_grid: list[float], lr_grid: list[float],
                selection_seeds: list[int],
                eval_seeds: list[int] | None = None) -> GridSearchResult:
    """Pick (c, learning rate) by the seed-averaged final-round test metric.

    Every cell runs once per selection seed; a cell counts as diverged if
    any of its runs diverged or produced a non-finite final metric, and
    diverged cells rank last.  Ties break toward the smaller learning
    rate, then the smaller c.  Selection seeds must be disjoint from the
    evaluation seeds when those are given.
    """
    if not c_grid or not lr_grid or not selection_seeds:
        raise ParameterError("grids and selection seeds must be non-empty")
    if eval_seeds is not None:
        overlap = set(selection_seeds) & set(eval_seeds)
        if overlap:
            raise ParameterError(
                f"selection seeds overlap evaluation seeds: {sorted(overlap)}")

    cells = []
    for c, lr in itertools.product(c_grid, lr_grid):
        per_seed = []
        diverged = False
        for seed in selection_seeds:
            record = run(replace(base, c=c, learning_rate=lr, seed=seed))
            if record.diverged or not record.rows:
                diverged = True
                per_seed.append(math.nan)
                continue
            metric = record.rows[-1].test_metric
            if not math.isfinite(metric):
                diverged = True
            per_seed.append(metric)
        mean_metric = math.nan if diverged else float(np.mean(per_seed))
        cells.append(CellResult(c=c, learning_rate=lr, mean_metric=mean_metric,
                                diverged=diverged, per_seed=tuple(per_seed)))

    finite = [cell for cell in cells if not cell.diverged]
    if not finite:
        raise GridSearchError("every grid cell diverged", cells=cells)
    sign = 1.0 if base.direction == "minimize" else -1.0
    best = min(finite, key=lambda cell: (sign * cell.mean_metric,
                                         cell.learning_rate, cell.c))
    return GridSearchResult(c=best.c, learning_rate=best.learning_rate,
                            cells=tuple(cells))
