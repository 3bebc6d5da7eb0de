"""Deterministic, splittable random streams and distribution primitives.

Every random quantity in the package is drawn from an :class:`RngStream`,
identified by a 64-bit seed plus a path of integer labels.  Child streams
are derived purely from the parent's identity, never from its state, so
the same (seed, path) always replays the same sequence regardless of how
much any other stream has drawn.  This makes experiment output independent
of evaluation order and safe to parallelize.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class RngStream:
    """A named random stream: identity is (seed, path), state is local.

    The underlying generator is counter-based (Philox) and keyed from the
    (seed, path) pair, so two streams with equal identity produce
    bit-identical sequences and streams with different paths never share
    state.
    """

    seed: int
    path: tuple[int, ...] = ()
    _gen: np.random.Generator | None = field(
        default=None, init=False, repr=False, compare=False)

    @property
    def generator(self) -> np.random.Generator:
        """The stream's generator, created lazily on first use."""
        if self._gen is None:
            ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
            object.__setattr__(self, "_gen", np.random.Generator(np.random.Philox(ss)))
        return self._gen


def derive(parent: RngStream, label: int) -> RngStream:
    """Return the child stream of ``parent`` under ``label``.

    Pure function of (parent identity, label); drawing from the parent
    before or after deriving does not change the child.
    """
    return RngStream(parent.seed, parent.path + (int(label),))


def derive_path(parent: RngStream, *labels: int) -> RngStream:
    """Derive through several labels at once."""
    stream = parent
    for label in labels:
        stream = derive(stream, label)
    return stream


def standard_normal(stream: RngStream, n: int) -> np.ndarray:
    """Draw ``n`` IID standard-normal values."""
    if n < 0:
        raise ParameterError(f"n must be non-negative, got {n}")
    return stream.generator.standard_normal(n)


def bernoulli_standardized(stream: RngStream, n: int, p: float, m: float) -> np.ndarray:
    """Draw ``n`` IID values of (B - p) / m with B ~ Bernoulli(p).

    The result has mean 0 and variance p(1-p)/m**2.
    """
    if not 0.0 < p < 1.0:
        raise ParameterError(f"p must be in (0, 1), got {p}")
    if m <= 0.0:
        raise ParameterError(f"m must be positive, got {m}")
    if n < 0:
        raise ParameterError(f"n must be non-negative, got {n}")
    b = stream.generator.random(n) < p
    return (b.astype(np.float64) - p) / m


def haar_rotation(stream: RngStream, d: int, size: int | None = None) -> np.ndarray:
    """Draw a rotation matrix (orthogonal, det +1) uniformly at random.

    QR decomposition of a d x d standard-normal matrix with the sign of
    the R diagonal folded into Q gives a uniform orthogonal matrix; if its
    determinant is -1, negating one column maps it uniformly onto the
    rotation group.  With ``size`` given, returns a (size, d, d) stack of
    independent draws.
    """
    if d < 1:
        raise ParameterError(f"d must be at least 1, got {d}")
    if size is not None and size < 0:
        raise ParameterError(f"size must be non-negative, got {size}")
    n = 1 if size is None else size
    z = stream.generator.standard_normal((n, d, d))
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=1, axis2=2)
    q = q * np.where(diag < 0, -1.0, 1.0)[:, None, :]
    q[np.linalg.det(q) < 0, :, 0] *= -1.0
    return q[0] if size is None else q
