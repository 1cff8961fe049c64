"""Parameter-dependent matrix families A(t) and parameter grids.

Every model maps a scalar (or small vector) parameter inside a compact box
to a dense matrix of fixed shape. Models that happen to be affine in fixed
coefficient functions, A(t) = sum_i phi_i(t) * A_i, expose that structure
through ``affine()`` so the sketching layer can split work into an offline
pass over the terms and a cheap online pass per parameter value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .linalg import RngState, as_matrix, gaussian_matrix, matrix_exponential, qr_economy


@dataclass(frozen=True)
class ParamDomain:
    """Compact box [lower_1, upper_1] x ... x [lower_d, upper_d]."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(x) for x in np.atleast_1d(self.lower))
        up = tuple(float(x) for x in np.atleast_1d(self.upper))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)
        if len(lo) != len(up) or len(lo) == 0:
            raise ValueError("lower and upper must be nonempty and equally long")
        if any(a > b for a, b in zip(lo, up)):
            raise ValueError(f"empty domain: lower {lo} exceeds upper {up}")

    @staticmethod
    def interval(a: float, b: float) -> "ParamDomain":
        return ParamDomain((a,), (b,))

    @property
    def dim(self) -> int:
        return len(self.lower)

    def contains(self, t) -> bool:
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        if t.shape != (self.dim,):
            return False
        return bool(np.all(t >= self.lower) and np.all(t <= self.upper))


@dataclass(frozen=True)
class ParamGrid:
    """Ordered parameter values t_1 < t_2 < ... inside a one-dimensional domain."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 1 or pts.size == 0:
            raise ValueError("grid needs a nonempty 1-D array of points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("grid points must be finite")
        if np.any(np.diff(pts) <= 0.0):
            raise ValueError("grid points must be strictly increasing")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.size

    def __iter__(self):
        return iter(self.points)


def uniform_grid(domain: ParamDomain, q: int) -> ParamGrid:
    """q equispaced points covering a one-dimensional domain, endpoints included."""
    if domain.dim != 1:
        raise ValueError(f"uniform_grid handles 1-D domains only, got dim {domain.dim}")
    if q < 2:
        raise ValueError(f"need at least 2 grid points, got {q}")
    return ParamGrid(np.linspace(domain.lower[0], domain.upper[0], q))


class ParamMatrixModel:
    """Base class: a matrix-valued map on a parameter domain."""

    domain: ParamDomain
    shape: tuple[int, int]

    def eval(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def eval_grid(self, grid: ParamGrid) -> list[np.ndarray]:
        """Evaluate at every grid point; subclasses may share work across points."""
        return [self.eval(t) for t in grid]

    def affine(self) -> Optional["AffineModel"]:
        """The affine decomposition of this model, or None if it has none."""
        return None

    def _require_inside(self, t: float) -> float:
        t = float(t)
        if not self.domain.contains(t):
            raise ValueError(f"parameter {t} lies outside the domain "
                             f"[{self.domain.lower[0]}, {self.domain.upper[0]}]")
        return t


class AffineModel(ParamMatrixModel):
    """A(t) = sum_i phi_i(t) * A_i with scalar coefficient functions phi_i.

    Parameters
    ----------
    phis : sequence of callables
        Each maps a parameter value to a float.
    matrices : sequence of arrays
        Constant terms A_i, all of one shape.
    domain : ParamDomain
    """

    def __init__(self, phis: Sequence[Callable[[float], float]],
                 matrices: Sequence[np.ndarray], domain: ParamDomain):
        if len(phis) == 0 or len(phis) != len(matrices):
            raise ValueError("need equally many coefficient functions and matrices, at least one")
        mats = [as_matrix(a) for a in matrices]
        shape = mats[0].shape
        for a in mats[1:]:
            if a.shape != shape:
                raise ValueError(f"term shapes differ: {shape} vs {a.shape}")
        self.phis = list(phis)
        self.matrices = mats
        self.domain = domain
        self.shape = shape

    @property
    def k(self) -> int:
        return len(self.matrices)

    def phi_values(self, t: float) -> np.ndarray:
        t = self._require_inside(t)
        vals = np.array([float(phi(t)) for phi in self.phis])
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"coefficient functions returned non-finite values at t={t}")
        return vals

    def eval(self, t: float) -> np.ndarray:
        vals = self.phi_values(t)
        out = vals[0] * self.matrices[0]
        for c, a in zip(vals[1:], self.matrices[1:]):
            out += c * a
        return out

    def affine(self) -> "AffineModel":
        return self


class SyntheticModel(ParamMatrixModel):
    """Smooth test family with exactly known singular values.

    A(t) = exp(t*W1) @ (e^t * D) @ exp(t*W2) on t in [0, 1], where W1, W2
    are random skew-symmetric (so their exponentials are orthogonal) and
    D = diag(2^-1, ..., 2^-n). The singular values of A(t) are therefore
    e^t * 2^-j, which makes optimal low-rank errors available in closed form.
    """

    def __init__(self, n: int, rng: RngState):
        if n < 1:
            raise ValueError(f"dimension must be positive, got {n}")
        g = gaussian_matrix(rng, n, 2 * n)
        g1, g2 = g[:, :n], g[:, n:]
        self.w1 = (g1 - g1.T) / 2.0
        self.w2 = (g2 - g2.T) / 2.0
        self.d = 2.0 ** -np.arange(1, n + 1)
        self.domain = ParamDomain.interval(0.0, 1.0)
        self.shape = (n, n)

    def eval(self, t: float) -> np.ndarray:
        t = self._require_inside(t)
        left = matrix_exponential(t * self.w1)
        right = matrix_exponential(t * self.w2)
        return (left * (np.exp(t) * self.d)) @ right

    def singular_values_exact(self, t: float) -> np.ndarray:
        return np.exp(float(t)) * self.d


def synthetic_model(n: int, rng: RngState) -> SyntheticModel:
    """Random orthogonal-times-decay family; see :class:`SyntheticModel`."""
    return SyntheticModel(n, rng)


def _laplace_apply(a: np.ndarray) -> np.ndarray:
    # Tridiagonal second-difference stencil (-1, 2, -1) with zero boundaries,
    # applied from the left: out = D @ a.
    out = 2.0 * a
    out[1:] -= a[:-1]
    out[:-1] -= a[1:]
    return out


class SchrodingerModel(ParamMatrixModel):
    """Matrix ODE A'(t) = -H[A(t)] with a Schrodinger-type operator.

    H[A] = -(D@A + A@D)/2 + V@A@V where D is the tridiagonal (-1, 2, -1)
    stencil and V = diag(1 - cos(2*pi*j/n)) for j = -n/2, ..., n/2 - 1.
    The initial value is random-orthogonal times a prescribed singular
    spectrum (10^-i, floored at 1e-16 so the trailing values stay
    representable). Evaluation integrates with classic fixed-step RK4;
    ``steps`` counts steps across the whole domain [0, 0.1], and a grid
    evaluation reuses the trajectory instead of restarting from zero.
    """

    T_FINAL = 0.1

    def __init__(self, n: int, rng: RngState, steps: int = 2000,
                 initial_sigma: Optional[np.ndarray] = None):
        if n < 2 or n % 2:
            raise ValueError(f"dimension must be even and at least 2, got {n}")
        if steps < 1:
            raise ValueError(f"need at least one integration step, got {steps}")
        if initial_sigma is None:
            initial_sigma = np.maximum(10.0 ** -np.arange(1, n + 1), 1e-16)
        sig = np.asarray(initial_sigma, dtype=np.float64)
        if sig.shape != (n,) or np.any(sig < 0.0):
            raise ValueError("initial_sigma must be n nonnegative values")
        g = gaussian_matrix(rng, n, 2 * n)
        q1 = qr_economy(g[:, :n]).q
        q2 = qr_economy(g[:, n:]).q
        self.a0 = (q1 * sig) @ q2.T
        self.initial_sigma = sig
        j = np.arange(-n // 2, n // 2)
        self.v = 1.0 - np.cos(2.0 * np.pi * j / n)
        self.steps = int(steps)
        self.domain = ParamDomain.interval(0.0, self.T_FINAL)
        self.shape = (n, n)

    def _rhs(self, a: np.ndarray) -> np.ndarray:
        da = _laplace_apply(a)
        ad = _laplace_apply(a.T).T
        vav = (self.v[:, None] * a) * self.v[None, :]
        return 0.5 * (da + ad) - vav

    def _advance(self, a: np.ndarray, t_from: float, t_to: float) -> np.ndarray:
        span = t_to - t_from
        if span <= 0.0:
            return a
        nominal = self.T_FINAL / self.steps
        m = max(1, int(np.ceil(span / nominal - 1e-12)))
        h = span / m
        for _ in range(m):
            k1 = self._rhs(a)
            k2 = self._rhs(a + 0.5 * h * k1)
            k3 = self._rhs(a + 0.5 * h * k2)
            k4 = self._rhs(a + h * k3)
            a = a + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return a

    def eval(self, t: float) -> np.ndarray:
        t = self._require_inside(t)
        return self._advance(self.a0.copy(), 0.0, t)

    def eval_grid(self, grid: ParamGrid) -> list[np.ndarray]:
        out = []
        a = self.a0.copy()
        t_cur = 0.0
        for t in grid:
            t = self._require_inside(t)
            a = self._advance(a, t_cur, t)
            t_cur = t
            out.append(a.copy())
        return out


def schrodinger_model(n: int, rng: RngState, steps: int = 2000,
                      initial_sigma: Optional[np.ndarray] = None) -> SchrodingerModel:
    """Schrodinger-type ODE family; see :class:`SchrodingerModel`."""
    return SchrodingerModel(n, rng, steps=steps, initial_sigma=initial_sigma)


class SnapshotModel(ParamMatrixModel):
    """Model backed by stored snapshots; defined only at the stored parameters.

    Lookup is by exact float equality. Snapshot files written by
    :mod:`parasketch.io` round-trip bit for bit, so values read back from a
    manifest match the ones that were saved.
    """

    def __init__(self, ts: Sequence[float], matrices: Sequence[np.ndarray]):
        if len(ts) == 0 or len(ts) != len(matrices):
            raise ValueError("need equally many parameters and snapshots, at least one")
        mats = [as_matrix(a) for a in matrices]
        shape = mats[0].shape
        for a in mats[1:]:
            if a.shape != shape:
                raise ValueError(f"snapshot shapes differ: {shape} vs {a.shape}")
        keys = [float(t) for t in ts]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate snapshot parameters")
        self._table = dict(zip(keys, mats))
        self.ts = sorted(keys)
        self.domain = ParamDomain.interval(self.ts[0], self.ts[-1])
        self.shape = shape

    def eval(self, t: float) -> np.ndarray:
        a = self._table.get(float(t))
        if a is None:
            raise ValueError(f"no snapshot stored at t={t}")
        return a

    def grid(self) -> ParamGrid:
        return ParamGrid(np.array(self.ts))


def snapshot_model(ts: Sequence[float], matrices: Sequence[np.ndarray]) -> SnapshotModel:
    return SnapshotModel(ts, matrices)
