"""Randomized range-projection sketching with a constant test matrix.

The fixed-matrix routine approximates B by projecting onto the range of
B @ Omega for a Gaussian Omega with r + p columns. The parametric variants
reuse one draw of Omega for every parameter value; for affine families the
work splits into an offline pass over the k terms and an online pass that
touches only small matrices per parameter value. Structural error bounds
and the discontinuity example live here too since they probe exactly this
projector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import PreconditionError
from .linalg import (
    RngState,
    as_matrix,
    gaussian_matrix,
    pseudoinverse,
    qr_economy,
    range_basis,
    singular_values,
    svd,
    split_svd,
    tail_energy,
)
from .models import AffineModel, ParamGrid, ParamMatrixModel

# Smallest acceptable ratio sigma_min/sigma_max for the coefficient matrix
# V1^T Omega in the structural bounds; below this the bound is numerically
# meaningless and we refuse to report a gap.
RANK_RATIO_FLOOR = 1e-10


@dataclass(frozen=True)
class SketchConfig:
    """Sketch sizes plus the randomness address for drawing the test matrix."""

    rank: int
    oversampling: int
    seed: int
    stream: int = 0

    def __post_init__(self):
        if self.rank < 2:
            raise ValueError(f"target rank must be at least 2, got {self.rank}")
        if self.oversampling < 2:
            raise ValueError(f"oversampling must be at least 2, got {self.oversampling}")

    @property
    def sketch_size(self) -> int:
        return self.rank + self.oversampling

    @property
    def rng(self) -> RngState:
        return RngState(self.seed, self.stream)


@dataclass(frozen=True)
class SketchPack:
    """The constant test matrices plus the randomness that generated them."""

    omega: np.ndarray
    psi: Optional[np.ndarray]
    seed: int
    stream: int


@dataclass
class LowRankApprox:
    """Rank-s approximation stored in factored form, B ~ q_t @ w_t.T.

    ``orthonormal_q`` records whether q_t has orthonormal columns (true for
    range-projection sketches, false for the oblique two-sided ones).
    """

    q_t: np.ndarray
    w_t: np.ndarray
    orthonormal_q: bool = True

    def reconstruct(self) -> np.ndarray:
        return self.q_t @ self.w_t.T

    def error_fro(self, b) -> float:
        return float(np.linalg.norm(self.reconstruct() - b, "fro"))


@dataclass
class HmtOfflineData:
    """Offline sketches of an affine family, reusable for any parameter value.

    ``q`` is the shared orthonormal range basis of [A_1 Omega ... A_k Omega],
    ``y[i] = q.T @ (A_i @ omega)`` and ``z[i] = A_i.T @ q``.
    """

    q: np.ndarray
    y: list
    z: list
    omega: np.ndarray

    @property
    def k(self) -> int:
        return len(self.y)


def draw_omega(cfg: SketchConfig, n: int) -> np.ndarray:
    """The n x (r+p) Gaussian test matrix addressed by cfg's (seed, stream)."""
    return gaussian_matrix(cfg.rng, n, cfg.sketch_size)


def hmt_apply(b, omega) -> LowRankApprox:
    """Project B onto the range of B @ omega (explicit test matrix)."""
    b = as_matrix(b)
    omega = as_matrix(omega)
    if omega.shape[0] != b.shape[1]:
        raise ValueError(f"test matrix has {omega.shape[0]} rows, expected {b.shape[1]}")
    q = qr_economy(b @ omega).q
    return LowRankApprox(q, b.T @ q)


def hmt_fixed(b, cfg: SketchConfig) -> LowRankApprox:
    """Randomized rank-(r+p) approximation of a single matrix.

    Deterministic given cfg: the same (seed, stream) always draws the same
    test matrix.
    """
    b = as_matrix(b)
    m, n = b.shape
    if cfg.sketch_size > min(m, n):
        raise ValueError(
            f"sketch size {cfg.sketch_size} exceeds min(m, n) = {min(m, n)}")
    return hmt_apply(b, draw_omega(cfg, n))


def hmt_param_direct(model: ParamMatrixModel, grid: ParamGrid, cfg: SketchConfig,
                     snapshots: Optional[Sequence[np.ndarray]] = None) -> list:
    """Sketch A(t) at every grid point with one constant test matrix.

    ``snapshots`` may carry precomputed model evaluations aligned with the
    grid (Monte Carlo harnesses evaluate the model once and sketch it many
    times); when omitted the model is evaluated here.
    """
    m, n = model.shape
    if cfg.sketch_size > min(m, n):
        raise ValueError(
            f"sketch size {cfg.sketch_size} exceeds min(m, n) = {min(m, n)}")
    if snapshots is None:
        snapshots = model.eval_grid(grid)
    if len(snapshots) != len(grid):
        raise ValueError("snapshot count does not match the grid")
    omega = draw_omega(cfg, n)
    return [hmt_apply(a, omega) for a in snapshots]


def hmt_offline(model: AffineModel, cfg: SketchConfig) -> HmtOfflineData:
    """Offline pass over the affine terms: sketch each A_i and orthogonalize.

    Requires k * (r+p) <= m so the stacked sketch [A_1 Omega ... A_k Omega]
    is tall; wider stacks would make the shared basis rank-deficient by
    construction.
    """
    m, n = model.shape
    s = cfg.sketch_size
    if model.k * s > m:
        raise ValueError(
            f"stacked sketch width k*(r+p) = {model.k * s} exceeds m = {m}")
    if s > min(m, n):
        raise ValueError(f"sketch size {s} exceeds min(m, n) = {min(m, n)}")
    omega = draw_omega(cfg, n)
    xs = [a @ omega for a in model.matrices]
    q = qr_economy(np.hstack(xs)).q
    y = [q.T @ x for x in xs]
    z = [a.T @ q for a in model.matrices]
    return HmtOfflineData(q=q, y=y, z=z, omega=omega)


def hmt_online(data: HmtOfflineData, phis, grid: ParamGrid) -> list:
    """Online pass: assemble per-parameter approximations from offline sketches.

    ``phis`` holds the coefficient values, one row per grid point and one
    column per affine term. Each point costs a QR of a k(r+p) x (r+p)
    matrix plus two small products; the full matrices A(t) are never formed.
    """
    phis = np.asarray(phis, dtype=np.float64)
    if phis.ndim != 2 or phis.shape != (len(grid), data.k):
        raise ValueError(
            f"phis must have shape (len(grid), k) = {(len(grid), data.k)}, got {phis.shape}")
    if not np.all(np.isfinite(phis)):
        raise ValueError("coefficient values must be finite")
    y_stack = np.stack(data.y)
    z_stack = np.stack(data.z)
    out = []
    for j in range(len(grid)):
        c = phis[j]
        y_t = np.tensordot(c, y_stack, axes=1)
        z_t = np.tensordot(c, z_stack, axes=1)
        q_tilde = qr_economy(y_t).q
        out.append(LowRankApprox(data.q @ q_tilde, z_t @ q_tilde))
    return out


def _coefficient_factors(b_svd, omega, r: int):
    """Split factors and the (V1^T Omega) pseudoinverse shared by both bounds."""
    _, sigma2, v1, v2 = split_svd(b_svd, r)
    c1 = v1.T @ omega
    sv = singular_values(c1)
    if sv.size == 0 or sv[0] == 0.0 or sv[-1] <= RANK_RATIO_FLOOR * sv[0]:
        raise PreconditionError(
            "V1^T Omega is numerically rank deficient "
            f"(sigma_min/sigma_max = {0.0 if sv.size == 0 or sv[0] == 0.0 else sv[-1] / sv[0]:.2e}); "
            "the structural bound needs it to have full row rank")
    c2 = v2.T @ omega
    return sigma2, v2, c2, pseudoinverse(c1)


def structural_bound_gap(b, omega, r: int) -> tuple:
    """Both sides of the deterministic range-projection error bound.

    Returns (lhs, rhs) with
    lhs = ||(I - P) B||_F^2 for P the orthogonal projector onto range(B Omega),
    rhs = ||Sigma2||_F^2 + ||Sigma2 (V2^T Omega) (V1^T Omega)^+||_F^2.
    The inequality lhs <= rhs holds whenever V1^T Omega has full row rank;
    rank deficiency raises PreconditionError.
    """
    b = as_matrix(b)
    omega = as_matrix(omega)
    if omega.shape[0] != b.shape[1]:
        raise ValueError(f"test matrix has {omega.shape[0]} rows, expected {b.shape[1]}")
    if not 1 <= r < min(b.shape):
        raise ValueError(f"target rank must satisfy 1 <= r < {min(b.shape)}, got {r}")
    if r > omega.shape[1]:
        raise ValueError(f"target rank {r} exceeds the sketch width {omega.shape[1]}")
    f = svd(b)
    sigma2, _, c2, c1_pinv = _coefficient_factors(f, omega, r)
    u = range_basis(b @ omega)
    resid = b - u @ (u.T @ b)
    lhs = float(np.linalg.norm(resid, "fro") ** 2)
    cross = (sigma2[:, None] * c2) @ c1_pinv
    rhs = tail_energy(f.sigma, r) + float(np.linalg.norm(cross, "fro") ** 2)
    return lhs, rhs


def perturbed_bound_gap(b, e, omega, r: int) -> tuple:
    """Both sides of the perturbed range-projection bound.

    The projector is built from the perturbed sketch (B + E) Omega while the
    error is still measured on B:
    lhs = ||(I - P_{(B+E) Omega}) B||_F,
    rhs = sqrt(||Sigma2||_F^2 + ||Sigma2 (V2^T Omega)(V1^T Omega)^+||_F^2)
          + ||E V2 (V2^T Omega)(V1^T Omega)^+||_F + ||E||_F,
    with the SVD factors taken from the unperturbed B.
    """
    b = as_matrix(b)
    e = as_matrix(e)
    omega = as_matrix(omega)
    if e.shape != b.shape:
        raise ValueError(f"perturbation shape {e.shape} does not match {b.shape}")
    if omega.shape[0] != b.shape[1]:
        raise ValueError(f"test matrix has {omega.shape[0]} rows, expected {b.shape[1]}")
    if not 1 <= r < min(b.shape):
        raise ValueError(f"target rank must satisfy 1 <= r < {min(b.shape)}, got {r}")
    if r > omega.shape[1]:
        raise ValueError(f"target rank {r} exceeds the sketch width {omega.shape[1]}")
    f = svd(b)
    sigma2, v2, c2, c1_pinv = _coefficient_factors(f, omega, r)
    u = range_basis((b + e) @ omega)
    lhs = float(np.linalg.norm(b - u @ (u.T @ b), "fro"))
    cross = (sigma2[:, None] * c2) @ c1_pinv
    head = float(np.sqrt(tail_energy(f.sigma, r) + np.linalg.norm(cross, "fro") ** 2))
    mixed = float(np.linalg.norm(e @ v2 @ (c2 @ c1_pinv), "fro"))
    return lhs, head + mixed + float(np.linalg.norm(e, "fro"))


def hmt_discontinuity_case() -> dict:
    """Projection error of a fixed 3x3 family showing a parameter discontinuity.

    A(t) has a rank drop at t = 0 that makes the sketched projection error
    f(t) = ||(I - P_{A(t) Y}) A(t)||_F^2 jump: f(0) = 1 while f(t) = 0 for
    every other t, even though A depends continuously on t. Returns
    {t: f(t)} at t in {-1, -0.5, 0, 0.5, 1}.
    """
    y = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    out = {}
    for t in (-1.0, -0.5, 0.0, 0.5, 1.0):
        a = np.array([[1.0, 0.0, 0.0], [0.0, t, 1.0], [0.0, 0.0, 0.0]])
        u = range_basis(a @ y)
        resid = a - u @ (u.T @ a)
        out[t] = float(np.linalg.norm(resid, "fro") ** 2)
    return out
