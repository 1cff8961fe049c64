"""Dense linear algebra kernels used by the sketching algorithms.

Factorizations are thin, convention-fixing wrappers around LAPACK (via numpy
and scipy); the seeded Gaussian sampler, the pseudoinverse cutoff rules and
the spectral tail helper are owned by this module so that every downstream
result is reproducible bit for bit from a (seed, stream) pair.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

__all__ = [
    "RngState",
    "QrFactors",
    "SvdFactors",
    "as_matrix",
    "qr_economy",
    "qr_complete",
    "svd",
    "singular_values",
    "split_svd",
    "range_basis",
    "pseudoinverse",
    "eps_pseudoinverse",
    "gaussian_matrix",
    "matrix_exponential",
    "tail_energy",
]

_EPS = float(np.finfo(np.float64).eps)


@dataclass(frozen=True)
class RngState:
    """Seed plus stream index addressing one reproducible random draw.

    The same (seed, stream) pair always yields the same matrix, on any
    machine, because the sampler below fixes both the bit generator (PCG64
    keyed by SeedSequence((seed, stream))) and the normal transform
    (Box-Muller). Distinct streams give statistically independent draws;
    Monte Carlo trials use streams 0, 1, 2, ... and the top bit of the
    stream space is reserved for secondary matrices (see nystrom.py).
    """

    seed: int
    stream: int = 0

    def child(self, stream: int) -> "RngState":
        return RngState(self.seed, stream)


class QrFactors(NamedTuple):
    """Economy QR factors with the diag(r) >= 0 sign convention."""

    q: np.ndarray
    r: np.ndarray


class SvdFactors(NamedTuple):
    """Economy SVD factors; ``v`` holds right singular vectors as columns."""

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray


def as_matrix(a) -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting NaN and infinity."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix has non-finite entries")
    return arr


def qr_economy(a) -> QrFactors:
    """Economy QR factorization of a tall matrix.

    Signs are normalized so every diagonal entry of ``r`` is nonnegative,
    which pins down the factorization uniquely for full-rank input. Rank
    deficiency is allowed: ``q`` still has orthonormal columns and
    ``q @ r`` still reproduces the input.

    Parameters
    ----------
    a : array_like, shape (m, n) with m >= n

    Returns
    -------
    QrFactors
        ``q`` of shape (m, n), ``r`` upper triangular of shape (n, n).
    """
    a = as_matrix(a)
    m, n = a.shape
    if m < n:
        raise ValueError(f"qr_economy needs m >= n, got shape {a.shape}")
    q, r = np.linalg.qr(a, mode="reduced")
    signs = np.where(np.diagonal(r) < 0.0, -1.0, 1.0)
    return QrFactors(q * signs, signs[:, None] * r)


def qr_complete(a) -> QrFactors:
    """Full QR of a tall matrix; ``q`` is square m x m.

    Columns n..m-1 of ``q`` span the orthogonal complement of range(a)
    whenever ``a`` has full column rank. Same sign convention as
    :func:`qr_economy`.
    """
    a = as_matrix(a)
    m, n = a.shape
    if m < n:
        raise ValueError(f"qr_complete needs m >= n, got shape {a.shape}")
    q, r = np.linalg.qr(a, mode="complete")
    signs = np.where(np.diagonal(r) < 0.0, -1.0, 1.0)
    full = np.ones(m)
    full[:n] = signs
    return QrFactors(q * full, full[:, None] * r)


def svd(a) -> SvdFactors:
    """Economy SVD, singular values sorted nonincreasing."""
    a = as_matrix(a)
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    return SvdFactors(u, s, vh.T)


def singular_values(a) -> np.ndarray:
    """Singular values only (cheaper than a full SVD)."""
    return np.linalg.svd(as_matrix(a), compute_uv=False)


def split_svd(f: SvdFactors, r: int):
    """Split SVD factors at target rank r.

    Returns (sigma1, sigma2, v1, v2): the leading r singular values and
    right singular vectors, and the trailing ones.
    """
    k = f.sigma.shape[0]
    if not 0 <= r < k:
        raise ValueError(f"split rank must satisfy 0 <= r < {k}, got {r}")
    return f.sigma[:r], f.sigma[r:], f.v[:, :r], f.v[:, r:]


def range_basis(a, rtol: float | None = None) -> np.ndarray:
    """Orthonormal basis for the numerical range of ``a``.

    Rank is revealed through the SVD: directions with singular value at most
    ``rtol * sigma_max`` are dropped (default max(m, n) * machine eps, the
    same rule as :func:`pseudoinverse`). The zero matrix yields an m x 0
    basis.
    """
    a = as_matrix(a)
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return u[:, :0]
    if rtol is None:
        rtol = max(a.shape) * _EPS
    return u[:, s > rtol * s[0]]


def pseudoinverse(a) -> np.ndarray:
    """Moore-Penrose pseudoinverse via the SVD.

    Singular values at or below max(m, n) * eps * sigma_max are treated as
    zero, so rank-deficient and zero matrices are handled exactly.
    """
    f = svd(a)
    if f.sigma.size == 0 or f.sigma[0] == 0.0:
        return np.zeros((a.shape[1], a.shape[0]))
    cutoff = max(a.shape) * _EPS * f.sigma[0]
    keep = f.sigma > cutoff
    return (f.v[:, keep] / f.sigma[keep]) @ f.u[:, keep].T


def eps_pseudoinverse(a, epsilon: float) -> np.ndarray:
    """Pseudoinverse that discards singular values below an absolute cutoff.

    Directions with sigma < epsilon are zeroed before inversion, which keeps
    the oblique-projection reconstruction stable when the small coefficient
    matrix is nearly singular. Exact zeros are always discarded, so
    ``eps_pseudoinverse(a, 0.0)`` equals :func:`pseudoinverse` on full-rank
    input. The number of discarded directions is useful diagnostic output;
    callers log it where it matters.
    """
    if epsilon < 0.0:
        raise ValueError(f"epsilon must be nonnegative, got {epsilon}")
    f = svd(a)
    keep = (f.sigma >= epsilon) & (f.sigma > 0.0)
    return (f.v[:, keep] / f.sigma[keep]) @ f.u[:, keep].T


def gaussian_matrix(rng: RngState, rows: int, cols: int) -> np.ndarray:
    """Seeded standard Gaussian matrix, deterministic given (seed, stream).

    Entries come from the Box-Muller transform applied to consecutive
    uniform pairs of a fresh PCG64 generator keyed by
    ``SeedSequence((seed, stream))``, and the matrix is filled column by
    column. Both choices are load-bearing: a fresh generator makes every
    call a pure function of the RngState, and column-major filling makes
    draws column-nested, i.e. ``gaussian_matrix(rng, m, s)`` equals the
    first ``s`` columns of ``gaussian_matrix(rng, m, S)`` for any S >= s.
    Rank sweeps rely on that to enlarge a sketch without resampling it.
    """
    if rows < 0 or cols < 0:
        raise ValueError(f"matrix shape must be nonnegative, got {(rows, cols)}")
    count = rows * cols
    pairs = (count + 1) // 2
    key = np.random.SeedSequence((rng.seed % (1 << 64), rng.stream % (1 << 64)))
    gen = np.random.Generator(np.random.PCG64(key))
    u = gen.random(2 * pairs)
    # 1 - u maps [0, 1) onto (0, 1], keeping the logarithm finite.
    radius = np.sqrt(-2.0 * np.log1p(-u[0::2]))
    angle = 2.0 * np.pi * u[1::2]
    z = np.empty(2 * pairs)
    z[0::2] = radius * np.cos(angle)
    z[1::2] = radius * np.sin(angle)
    return z[:count].reshape((rows, cols), order="F")


def matrix_exponential(a) -> np.ndarray:
    """Matrix exponential of a square matrix (scaling and squaring).

    exp(0) = I exactly.
    """
    a = as_matrix(a)
    m, n = a.shape
    if m != n:
        raise ValueError(f"matrix_exponential needs a square matrix, got {a.shape}")
    if not a.any():
        return np.eye(n)
    return scipy.linalg.expm(a)


def tail_energy(sigma, r: int) -> float:
    """Sum of squared singular values past index r.

    ``sigma`` is expected sorted nonincreasing (as returned by :func:`svd`);
    r at or beyond the end gives 0.
    """
    if r < 0:
        raise ValueError(f"tail rank must be nonnegative, got {r}")
    s = np.asarray(sigma, dtype=np.float64)
    if s.ndim != 1:
        raise ValueError("sigma must be a vector")
    if np.any(s < 0.0) or not np.all(np.isfinite(s)):
        raise ValueError("sigma must be nonnegative and finite")
    return float(np.sum(np.square(s[r:])))
