"""Two-sided (generalized Nystrom) sketching with constant test matrices.

The fixed-matrix routine approximates B by the oblique projection
B Omega (Psi^T B Omega)^+ Psi^T B, computed in the numerically stable form
that runs the small coefficient matrix through a QR factorization and an
absolute-cutoff pseudoinverse. Unlike range projection there is no QR of a
tall matrix per parameter value, and the per-term sketches are additive, so
streaming updates of an affine family stay cheap.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import PreconditionError
from .hmt import LowRankApprox, SketchPack
from .linalg import (
    RngState,
    as_matrix,
    gaussian_matrix,
    pseudoinverse,
    qr_complete,
    qr_economy,
    singular_values,
    svd,
)
from .models import AffineModel, ParamGrid, ParamMatrixModel

logger = logging.getLogger(__name__)

# Streams with the top bit set address the second test matrix, so one
# (seed, stream) pair yields an independent (omega, psi) couple while Monte
# Carlo trials keep using plain streams 0, 1, 2, ...
PSI_STREAM_BIT = 1 << 63

# Default absolute cutoff for the stable pseudoinverse, and the default
# second oversampling as a fraction of the sketch width.
DEFAULT_EPSILON = 2.22e-15
SECOND_OVERSAMPLING_FRACTION = 0.2

RANK_RATIO_FLOOR = 1e-10


def default_second_oversampling(sketch_size: int) -> int:
    return math.ceil(SECOND_OVERSAMPLING_FRACTION * sketch_size)


@dataclass(frozen=True)
class GnConfig:
    """Two-sided sketch sizes plus the randomness address.

    ``second_oversampling`` (the extra columns of the left test matrix)
    defaults to ceil(0.2 * (r + p)). ``epsilon`` is the absolute cutoff of
    the stable pseudoinverse.
    """

    rank: int
    oversampling: int
    seed: int
    stream: int = 0
    second_oversampling: Optional[int] = None
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if self.rank < 2:
            raise ValueError(f"target rank must be at least 2, got {self.rank}")
        if self.oversampling < 2:
            raise ValueError(f"oversampling must be at least 2, got {self.oversampling}")
        if self.second_oversampling is None:
            object.__setattr__(
                self, "second_oversampling", default_second_oversampling(self.sketch_size))
        if self.second_oversampling < 1:
            # the error bounds need more (2 for the expectation, 4 for the
            # tail) but those hypotheses are checked where the bounds are
            # evaluated; the sketch itself only needs a tall core
            raise ValueError(
                f"second oversampling must be at least 1, got {self.second_oversampling}")
        if self.epsilon < 0.0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")

    @property
    def sketch_size(self) -> int:
        return self.rank + self.oversampling

    @property
    def left_size(self) -> int:
        return self.sketch_size + self.second_oversampling

    @property
    def rng(self) -> RngState:
        return RngState(self.seed, self.stream)


@dataclass
class GnOfflineData:
    """Per-term sketches of an affine family: x[i] = A_i Omega,
    y[i] = Psi^T A_i, z[i] = y[i] Omega."""

    x: list
    y: list
    z: list
    omega: np.ndarray
    psi: np.ndarray
    epsilon: float = DEFAULT_EPSILON

    @property
    def k(self) -> int:
        return len(self.x)


def draw_sketch(cfg: GnConfig, m: int, n: int) -> SketchPack:
    """Independent Gaussian (omega, psi) addressed by cfg's (seed, stream)."""
    omega = gaussian_matrix(cfg.rng, n, cfg.sketch_size)
    psi = gaussian_matrix(RngState(cfg.seed, cfg.stream | PSI_STREAM_BIT), m, cfg.left_size)
    return SketchPack(omega=omega, psi=psi, seed=cfg.seed, stream=cfg.stream)


def _stable_pinv(r_mat: np.ndarray, epsilon: float):
    """Pseudoinverse with absolute cutoff; also reports how many directions fell."""
    f = svd(r_mat)
    keep = (f.sigma >= epsilon) & (f.sigma > 0.0)
    dropped = int(f.sigma.size - int(np.count_nonzero(keep)))
    return (f.v[:, keep] / f.sigma[keep]) @ f.u[:, keep].T, dropped


def gn_apply(b, omega, psi, epsilon: float = DEFAULT_EPSILON) -> LowRankApprox:
    """Stable two-sided sketch of B with explicit test matrices.

    Factors: QR of Psi^T B Omega gives q_tilde, r_tilde; the approximation is
    (B Omega) r_tilde^+ @ (q_tilde^T Psi^T B), returned as q_t @ w_t.T with
    q_t = B Omega r_tilde^+ (not orthonormal) and w_t = (Psi^T B)^T q_tilde.
    """
    b = as_matrix(b)
    omega = as_matrix(omega)
    psi = as_matrix(psi)
    if omega.shape[0] != b.shape[1]:
        raise ValueError(f"right test matrix has {omega.shape[0]} rows, expected {b.shape[1]}")
    if psi.shape[0] != b.shape[0]:
        raise ValueError(f"left test matrix has {psi.shape[0]} rows, expected {b.shape[0]}")
    if psi.shape[1] < omega.shape[1]:
        raise ValueError("left test matrix must have at least as many columns as the right one")
    x = b @ omega
    y = psi.T @ b
    q_tilde, r_tilde = qr_economy(psi.T @ x)
    pinv, dropped = _stable_pinv(r_tilde, epsilon)
    if dropped:
        logger.debug("stable pseudoinverse dropped %d of %d directions",
                     dropped, r_tilde.shape[0])
    return LowRankApprox(x @ pinv, y.T @ q_tilde, orthonormal_q=False)


def _check_sizes(cfg: GnConfig, m: int, n: int) -> None:
    if cfg.left_size > m:
        raise ValueError(f"left sketch size {cfg.left_size} exceeds m = {m}")
    if cfg.sketch_size > n:
        raise ValueError(f"sketch size {cfg.sketch_size} exceeds n = {n}")


def gn_fixed(b, cfg: GnConfig) -> LowRankApprox:
    """Randomized two-sided approximation of a single matrix; deterministic given cfg."""
    b = as_matrix(b)
    _check_sizes(cfg, *b.shape)
    pack = draw_sketch(cfg, *b.shape)
    return gn_apply(b, pack.omega, pack.psi, cfg.epsilon)


def gn_param(model: ParamMatrixModel, grid: ParamGrid, cfg: GnConfig,
             snapshots: Optional[Sequence[np.ndarray]] = None) -> list:
    """Two-sided sketch of A(t) at every grid point with one constant pair."""
    _check_sizes(cfg, *model.shape)
    if snapshots is None:
        snapshots = model.eval_grid(grid)
    if len(snapshots) != len(grid):
        raise ValueError("snapshot count does not match the grid")
    pack = draw_sketch(cfg, *model.shape)
    return [gn_apply(a, pack.omega, pack.psi, cfg.epsilon) for a in snapshots]


def gn_offline(model: AffineModel, cfg: GnConfig) -> GnOfflineData:
    """Offline pass: sketch every affine term from both sides."""
    _check_sizes(cfg, *model.shape)
    pack = draw_sketch(cfg, *model.shape)
    x = [a @ pack.omega for a in model.matrices]
    y = [pack.psi.T @ a for a in model.matrices]
    z = [yi @ pack.omega for yi in y]
    return GnOfflineData(x=x, y=y, z=z, omega=pack.omega, psi=pack.psi,
                         epsilon=cfg.epsilon)


def gn_online(data: GnOfflineData, phis, grid: ParamGrid) -> list:
    """Online pass: per-parameter approximations from additive term sketches.

    Only matrices with sketch-sized dimensions are touched per point; the
    cost per parameter value is independent of the count of affine terms
    once the weighted sums are formed.
    """
    phis = np.asarray(phis, dtype=np.float64)
    if phis.ndim != 2 or phis.shape != (len(grid), data.k):
        raise ValueError(
            f"phis must have shape (len(grid), k) = {(len(grid), data.k)}, got {phis.shape}")
    if not np.all(np.isfinite(phis)):
        raise ValueError("coefficient values must be finite")
    x_stack = np.stack(data.x)
    y_stack = np.stack(data.y)
    z_stack = np.stack(data.z)
    out = []
    for j in range(len(grid)):
        c = phis[j]
        z_t = np.tensordot(c, z_stack, axes=1)
        q_tilde, r_tilde = qr_economy(z_t)
        pinv, dropped = _stable_pinv(r_tilde, data.epsilon)
        if dropped:
            logger.debug("online stable pseudoinverse dropped %d of %d directions",
                         dropped, r_tilde.shape[0])
        q_t = np.tensordot(c, x_stack, axes=1) @ pinv
        w_t = np.tensordot(c, y_stack, axes=1).T @ q_tilde
        out.append(LowRankApprox(q_t, w_t, orthonormal_q=False))
    return out


def gn_streaming_update(data: GnOfflineData, update: AffineModel) -> GnOfflineData:
    """Fold an additive update B(t) = sum_i phi_i(t) B_i into existing sketches.

    The update must share the affine basis (same term count, same phi_i,
    matching shapes); sketches then add term by term, exactly as if
    gn_offline had been run on the summed family with the same test
    matrices. The input data is not modified.
    """
    if update.k != data.k:
        raise ValueError(
            f"update has {update.k} terms, existing sketches have {data.k}")
    m, n = data.psi.shape[0], data.omega.shape[0]
    if update.shape != (m, n):
        raise ValueError(f"update shape {update.shape} does not match sketched shape {(m, n)}")
    x, y, z = [], [], []
    for xi, yi, zi, b in zip(data.x, data.y, data.z, update.matrices):
        xb = b @ data.omega
        yb = data.psi.T @ b
        x.append(xi + xb)
        y.append(yi + yb)
        z.append(zi + yb @ data.omega)
    return GnOfflineData(x=x, y=y, z=z, omega=data.omega, psi=data.psi,
                         epsilon=data.epsilon)


def gn_structural_identity_gap(b, omega, psi) -> tuple:
    """Both sides of the exact two-sided projection error decomposition.

    Returns (lhs, rhs) with
    lhs = ||B - B Omega (Psi^T B Omega)^+ Psi^T B||_F^2,
    rhs = ||(I - Q Q^T) B||_F^2
          + ||(Psi^T Q)^+ (Psi^T Q_perp) (Q_perp^T B)||_F^2,
    where Q is the orthonormal range basis of B Omega and Q_perp its
    complement. The two sides agree exactly (an identity, not a bound)
    whenever Psi^T B Omega has full column rank; numerical rank deficiency
    raises PreconditionError.
    """
    b = as_matrix(b)
    omega = as_matrix(omega)
    psi = as_matrix(psi)
    if omega.shape[0] != b.shape[1]:
        raise ValueError(f"right test matrix has {omega.shape[0]} rows, expected {b.shape[1]}")
    if psi.shape[0] != b.shape[0]:
        raise ValueError(f"left test matrix has {psi.shape[0]} rows, expected {b.shape[0]}")
    x = b @ omega
    core = psi.T @ x
    sv = singular_values(core)
    if sv.size == 0 or sv[0] == 0.0 or sv[-1] <= RANK_RATIO_FLOOR * sv[0]:
        raise PreconditionError(
            "Psi^T B Omega is numerically rank deficient; the error "
            "decomposition needs it to have full column rank")
    lhs = float(np.linalg.norm(b - x @ (pseudoinverse(core) @ (psi.T @ b)), "fro") ** 2)
    s = x.shape[1]
    q_full = qr_complete(x).q
    q, q_perp = q_full[:, :s], q_full[:, s:]
    head = float(np.linalg.norm(b - q @ (q.T @ b), "fro") ** 2)
    cross = pseudoinverse(psi.T @ q) @ (psi.T @ q_perp) @ (q_perp.T @ b)
    return lhs, head + float(np.linalg.norm(cross, "fro") ** 2)
