"""Direction-set samplers for one optimization iteration.

Four IID-entry families (Gaussian and standardized Bernoulli, each with an
optional variance-shrinkage tuned to the run's direction count and
dimension) plus two structured baselines: orthogonalized Gaussian
directions and a guided sampler whose covariance tilts toward the span of
recent gradient estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import HypothesisError, ParameterError, RankDeficiencyError
from .randomness import RngStream, bernoulli_standardized, derive, standard_normal

IID_KINDS = ("gs", "bes", "gs-shrinkage", "bes-shrinkage")
ALL_KINDS = IID_KINDS + ("orthogonal", "guided")

# Attempts to redraw an orthogonal direction set on numerical rank collapse.
_MAX_RESAMPLE_ATTEMPTS = 4
_RANK_TOL = 1e-12


def gs_shrinkage_variance(L: int, d: int) -> float:
    """Variance minimizing the gradient term of the FD-estimator MSE over
    centered Gaussians: L / (L + d + 1), always in (0, 1)."""
    if L < 1 or d < 1:
        raise ParameterError(f"L and d must be at least 1, got L={L}, d={d}")
    return L / (L + d + 1.0)


def bes_shrinkage_scale(L: int, d: int) -> float:
    """Scale m minimizing the gradient term of the FD-estimator MSE over
    standardized Bernoullis at p = 0.5: sqrt((L + d - 1) / (4 L)).

    The optimum is only valid for L + d > 5.
    """
    if L < 1 or d < 1:
        raise ParameterError(f"L and d must be at least 1, got L={L}, d={d}")
    if L + d <= 5:
        raise HypothesisError(f"requires L + d > 5, got L={L}, d={d}")
    return math.sqrt((L + d - 1.0) / (4.0 * L))


@dataclass(frozen=True)
class SamplerSpec:
    """Which distribution generates the direction entries, with parameters.

    Shrinkage parameters depend on (L, d) and are fixed at construction by
    :meth:`for_kind`; they are never recomputed against a different run
    configuration.  For the guided kind, ``guided_buffer`` holds up to
    ``guided_k`` past gradient estimates, most recent last, and the mixing
    weight stays at 1 (isotropic phase) until the buffer first fills.
    """

    kind: str
    sigma_sq: float = 1.0
    p: float = 0.5
    m: float = 0.5
    guided_alpha: float = 0.5
    guided_k: int = 0
    guided_buffer: tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        if self.kind not in ALL_KINDS:
            raise ParameterError(f"unknown sampler kind {self.kind!r}")
        if self.sigma_sq <= 0.0:
            raise ParameterError(f"sigma_sq must be positive, got {self.sigma_sq}")
        if not 0.0 < self.p < 1.0:
            raise ParameterError(f"p must be in (0, 1), got {self.p}")
        if self.m <= 0.0:
            raise ParameterError(f"m must be positive, got {self.m}")
        if not 0.0 <= self.guided_alpha <= 1.0:
            raise ParameterError(
                f"guided_alpha must be in [0, 1], got {self.guided_alpha}")

    @classmethod
    def for_kind(cls, kind: str, L: int, d: int) -> "SamplerSpec":
        """Build the spec for a run with L directions in dimension d."""
        if kind == "gs":
            return cls(kind="gs", sigma_sq=1.0)
        if kind == "bes":
            return cls(kind="bes", p=0.5, m=0.5)
        if kind == "gs-shrinkage":
            return cls(kind="gs-shrinkage", sigma_sq=gs_shrinkage_variance(L, d))
        if kind == "bes-shrinkage":
            return cls(kind="bes-shrinkage", p=0.5, m=bes_shrinkage_scale(L, d))
        if kind == "orthogonal":
            return cls(kind="orthogonal", sigma_sq=1.0)
        if kind == "guided":
            return cls(kind="guided", guided_alpha=0.5,
                       guided_k=50 if d >= 50 else 10)
        raise ParameterError(f"unknown sampler kind {kind!r}")

    @property
    def effective_alpha(self) -> float:
        """Guided mixing weight: 1 until the buffer first holds guided_k
        estimates, then the configured guided_alpha."""
        if len(self.guided_buffer) < self.guided_k:
            return 1.0
        return self.guided_alpha


@dataclass(frozen=True)
class DirectionSet:
    """L perturbation directions of dimension d plus their provenance."""

    directions: np.ndarray
    spec: SamplerSpec

    @property
    def L(self) -> int:
        return self.directions.shape[0]

    @property
    def d(self) -> int:
        return self.directions.shape[1]


def orthogonalize(raw: DirectionSet) -> DirectionSet:
    """Make the rows mutually orthogonal, keeping each row's original norm.

    Rows are processed in order (row i is projected off rows 0..i-1 and
    then rescaled to its input norm), so the span of the first j output
    rows equals the span of the first j input rows.  Requires L <= d.
    Raises :class:`RankDeficiencyError` when a row is numerically in the
    span of its predecessors; random callers should resample.
    """
    eps = raw.directions
    L, d = eps.shape
    if L > d:
        raise ParameterError(f"cannot orthogonalize {L} rows in dimension {d}")
    if L == 1:
        return raw
    norms = np.linalg.norm(eps, axis=1)
    q, r = np.linalg.qr(eps.T)
    diag = np.diag(r)
    if np.any(np.abs(diag) < _RANK_TOL):
        raise RankDeficiencyError(
            "direction set is numerically rank deficient; resample")
    # LAPACK may flip column signs; realign with the Gram-Schmidt convention.
    basis = q * np.where(diag < 0, -1.0, 1.0)
    return DirectionSet(directions=basis.T * norms[:, None], spec=raw.spec)


def _orthogonal_directions(spec: SamplerSpec, L: int, d: int,
                           stream: RngStream) -> np.ndarray:
    """Gaussian rows orthogonalized in independent blocks of at most d."""
    out = np.empty((L, d))
    n_blocks = (L + d - 1) // d
    for b in range(n_blocks):
        lo, hi = b * d, min((b + 1) * d, L)
        block_stream = derive(stream, b)
        for attempt in range(_MAX_RESAMPLE_ATTEMPTS):
            rows = standard_normal(derive(block_stream, attempt),
                                   (hi - lo) * d).reshape(hi - lo, d)
            try:
                out[lo:hi] = orthogonalize(
                    DirectionSet(directions=rows, spec=spec)).directions
                break
            except RankDeficiencyError:
                continue
        else:
            raise RankDeficiencyError(
                f"orthogonalization failed {_MAX_RESAMPLE_ATTEMPTS} times")
    return out


def _guided_basis(buffer: tuple[np.ndarray, ...]) -> np.ndarray | None:
    """Orthonormal basis (d x r) of the buffered gradient estimates."""
    if not buffer:
        return None
    stacked = np.stack(buffer, axis=1)
    q, r = np.linalg.qr(stacked)
    keep = np.abs(np.diag(r)) > _RANK_TOL * max(1.0, np.abs(stacked).max())
    if not np.any(keep):
        return None
    return q[:, keep]


def _guided_directions(spec: SamplerSpec, L: int, d: int,
                       stream: RngStream) -> np.ndarray:
    """Draw rows with covariance alpha/d * I + (1-alpha)/k * U U^T.

    Sampled as sqrt(alpha/d) * delta + sqrt((1-alpha)/k) * U nu with
    isotropic Gaussian delta and nu, which realizes that covariance
    without forming a d x d matrix.
    """
    alpha = spec.effective_alpha
    delta = standard_normal(stream, L * d).reshape(L, d)
    rows = math.sqrt(alpha / d) * delta
    if alpha < 1.0:
        U = _guided_basis(spec.guided_buffer)
        if U is not None:
            nu = standard_normal(stream, L * U.shape[1]).reshape(L, U.shape[1])
            rows = rows + math.sqrt((1.0 - alpha) / spec.guided_k) * nu @ U.T
    return rows


def sample_directions(spec: SamplerSpec, L: int, d: int,
                      stream: RngStream) -> DirectionSet:
    """Draw the L x d direction set for one iteration under ``spec``."""
    if L < 1 or d < 1:
        raise ParameterError(f"L and d must be at least 1, got L={L}, d={d}")
    if spec.kind in ("gs", "gs-shrinkage"):
        rows = math.sqrt(spec.sigma_sq) * standard_normal(stream, L * d).reshape(L, d)
    elif spec.kind in ("bes", "bes-shrinkage"):
        rows = bernoulli_standardized(stream, L * d, spec.p, spec.m).reshape(L, d)
    elif spec.kind == "orthogonal":
        rows = _orthogonal_directions(spec, L, d, stream)
    elif spec.kind == "guided":
        rows = _guided_directions(spec, L, d, stream)
    else:
        raise ParameterError(f"unknown sampler kind {spec.kind!r}")
    return DirectionSet(directions=rows, spec=spec)


def guided_update(spec: SamplerSpec, new_gradient: np.ndarray) -> SamplerSpec:
    """Append a gradient estimate to the guided buffer, evicting the oldest.

    Zero-norm gradients are skipped, leaving the spec unchanged.  Once the
    buffer first reaches guided_k entries, ``effective_alpha`` drops from 1
    to the configured guided_alpha.
    """
    if spec.kind != "guided":
        return spec
    vec = np.asarray(new_gradient, dtype=np.float64)
    if not np.any(vec):
        return spec
    buffer = spec.guided_buffer + (vec.copy(),)
    if len(buffer) > spec.guided_k:
        buffer = buffer[-spec.guided_k:]
    return replace(spec, guided_buffer=buffer)
