"""Exception types shared across the package."""

from __future__ import annotations


class GensmoothError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(GensmoothError, ValueError):
    """An argument is outside its valid domain."""


class HypothesisError(GensmoothError, ValueError):
    """A closed-form result was requested outside its hypotheses."""


class UnsupportedSamplerError(GensmoothError, ValueError):
    """The requested quantity is undefined for this sampler kind."""


class RankDeficiencyError(GensmoothError):
    """A direction row is numerically in the span of its predecessors.

    Callers that generated the rows randomly should resample and retry.
    """


class EvaluationError(GensmoothError):
    """An objective evaluation returned a non-finite value."""

    def __init__(self, message: str, theta=None):
        super().__init__(message)
        self.theta = theta


class DivergenceError(GensmoothError):
    """An SGD update produced non-finite parameters."""

    def __init__(self, message: str, round_index: int | None = None,
                 iteration: int | None = None):
        super().__init__(message)
        self.round_index = round_index
        self.iteration = iteration


class GridSearchError(GensmoothError):
    """Every grid-search cell diverged; carries the per-cell status table."""

    def __init__(self, message: str, cells=None):
        super().__init__(message)
        self.cells = cells or []
