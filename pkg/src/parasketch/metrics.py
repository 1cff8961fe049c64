"""Error measurement on parameter grids and the matching theoretical bounds.

The L2-in-parameter error of a family of approximations is the square root
of the trapezoid-rule integral of squared pointwise Frobenius errors; the
optimal reference curves come from pointwise truncated SVDs. The bound_*
functions evaluate the corresponding expectation and failure-probability
bounds so Monte Carlo verdicts can compare against them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .hmt import LowRankApprox
from .linalg import singular_values, tail_energy
from .models import ParamGrid, ParamMatrixModel


def trapezoid(values, points) -> float:
    """Composite trapezoid rule; exact for linear integrands on any grid."""
    values = np.asarray(values, dtype=np.float64)
    points = np.asarray(points, dtype=np.float64)
    if values.shape != points.shape or values.ndim != 1:
        raise ValueError("values and points must be matching 1-D arrays")
    if points.size < 2:
        raise ValueError("quadrature needs at least 2 points")
    dx = np.diff(points)
    return float(np.sum(0.5 * dx * (values[1:] + values[:-1])))


def _resolve_snapshots(model_or_snapshots, grid: ParamGrid) -> list:
    if isinstance(model_or_snapshots, ParamMatrixModel):
        return model_or_snapshots.eval_grid(grid)
    snaps = list(model_or_snapshots)
    if len(snaps) != len(grid):
        raise ValueError(f"expected {len(grid)} snapshots, got {len(snaps)}")
    return snaps


def pointwise_errors(model_or_snapshots, approxs: Sequence[LowRankApprox],
                     grid: ParamGrid) -> np.ndarray:
    """Frobenius error of each approximation against the matrix it targets."""
    snaps = _resolve_snapshots(model_or_snapshots, grid)
    if len(approxs) != len(snaps):
        raise ValueError(f"expected {len(snaps)} approximations, got {len(approxs)}")
    return np.array([ap.error_fro(a) for ap, a in zip(approxs, snaps)])


def l2_error(model_or_snapshots, approxs: Sequence[LowRankApprox],
             grid: ParamGrid) -> float:
    """sqrt of the trapezoid integral of squared pointwise errors."""
    errs = pointwise_errors(model_or_snapshots, approxs, grid)
    return float(np.sqrt(trapezoid(errs ** 2, grid.points)))


def sup_error(model_or_snapshots, approxs: Sequence[LowRankApprox],
              grid: ParamGrid) -> float:
    """Largest pointwise error over the grid (works on single-point grids)."""
    return float(np.max(pointwise_errors(model_or_snapshots, approxs, grid)))


def grid_tail_energies(model_or_snapshots, grid: ParamGrid, r: int) -> np.ndarray:
    """Squared optimal rank-r error at each grid point."""
    snaps = _resolve_snapshots(model_or_snapshots, grid)
    return np.array([tail_energy(singular_values(a), r) for a in snaps])


def best_l2(model_or_snapshots, grid: ParamGrid, r: int) -> float:
    """L2-in-parameter error of the pointwise best rank-r approximation."""
    tails = grid_tail_energies(model_or_snapshots, grid, r)
    return float(np.sqrt(trapezoid(tails, grid.points)))


def best_sup(model_or_snapshots, grid: ParamGrid, r: int) -> float:
    """Sup-in-parameter error of the pointwise best rank-r approximation."""
    tails = grid_tail_energies(model_or_snapshots, grid, r)
    return float(np.sqrt(np.max(tails)))


def svd_baseline(model_or_snapshots, grid: ParamGrid, rank: int) -> list:
    """Pointwise truncated SVDs, the optimal rank-``rank`` reference method."""
    snaps = _resolve_snapshots(model_or_snapshots, grid)
    if rank < 1 or rank > min(snaps[0].shape):
        raise ValueError(f"rank must lie in 1..{min(snaps[0].shape)}, got {rank}")
    out = []
    for a in snaps:
        u, s, vh = np.linalg.svd(a, full_matrices=False)
        out.append(LowRankApprox(u[:, :rank], vh[:rank].T * s[:rank]))
    return out


def estimate_lipschitz(model_or_snapshots, grid: ParamGrid) -> float:
    """Largest finite-difference slope of t -> A(t) in the Frobenius norm."""
    snaps = _resolve_snapshots(model_or_snapshots, grid)
    if len(snaps) < 2:
        raise ValueError("need at least 2 grid points to estimate a slope")
    best = 0.0
    for j in range(len(snaps) - 1):
        dt = grid.points[j + 1] - grid.points[j]
        slope = float(np.linalg.norm(snaps[j + 1] - snaps[j], "fro")) / dt
        best = max(best, slope)
    return best


# ---------------------------------------------------------------------------
# bound evaluators


def bound_hmt_expectation(r: int, p: int, tail_l2_sq: float) -> float:
    """Expected squared L2 error bound for range projection: (1 + r/(p-1)) * tail.

    ``tail_l2_sq`` is the integrated squared optimal rank-r error,
    i.e. best_l2(model, grid, r) ** 2.
    """
    if r < 2:
        raise ValueError(f"the expectation bound needs target rank >= 2, got {r}")
    if p < 2:
        raise ValueError(f"the expectation bound needs oversampling >= 2, got {p}")
    if tail_l2_sq < 0.0:
        raise ValueError("tail energy cannot be negative")
    return (1.0 + r / (p - 1.0)) * tail_l2_sq


def bound_hmt_tail(r: int, p: int, gamma: float, best_l2_value: float) -> tuple:
    """Threshold and failure probability for the L2 tail bound.

    The L2 error exceeds gamma * sqrt(1 + r) * best_l2 with probability at
    most gamma ** -p; requires p >= 4 and gamma >= 1.
    """
    if r < 2:
        raise ValueError(f"the tail bound needs target rank >= 2, got {r}")
    if p < 4:
        raise ValueError(f"the tail failure-probability bound needs oversampling >= 4, got {p}")
    if gamma < 1.0:
        raise ValueError(f"gamma must be at least 1, got {gamma}")
    if best_l2_value < 0.0:
        raise ValueError("best_l2 cannot be negative")
    return gamma * math.sqrt(1.0 + r) * best_l2_value, gamma ** (-p)


def bound_gn_expectation(r: int, p: int, ell: int, tail_l2_sq: float) -> float:
    """Expected squared L2 error bound for the two-sided sketch:
    (1 + (r+p)/(ell-1)) * (1 + r/(p-1)) * tail."""
    if ell < 2:
        raise ValueError(f"the expectation bound needs second oversampling >= 2, got {ell}")
    return (1.0 + (r + p) / (ell - 1.0)) * bound_hmt_expectation(r, p, tail_l2_sq)


def bound_gn_tail(r: int, p: int, ell: int, gamma: float, best_l2_value: float) -> tuple:
    """Threshold and failure probability for the two-sided L2 tail bound.

    Exceeds gamma * sqrt((1 + r + p) * (1 + r)) * best_l2 with probability
    at most gamma ** -min(p, ell); requires p, ell >= 4 and gamma >= 1.
    """
    if r < 2:
        raise ValueError(f"the tail bound needs target rank >= 2, got {r}")
    if p < 4 or ell < 4:
        raise ValueError(
            f"the tail failure-probability bound needs p >= 4 and ell >= 4, got p={p}, ell={ell}")
    if gamma < 1.0:
        raise ValueError(f"gamma must be at least 1, got {gamma}")
    if best_l2_value < 0.0:
        raise ValueError("best_l2 cannot be negative")
    threshold = gamma * math.sqrt((1.0 + r + p) * (1.0 + r)) * best_l2_value
    return threshold, gamma ** (-min(p, ell))


@dataclass(frozen=True)
class TailBoundParams:
    """Free parameters of the sup-norm tail bound.

    gamma >= 1 and u >= 3 trade threshold size against failure probability;
    k_subintervals is the union-bound discretization count; lipschitz and
    horizon describe the family (a Frobenius Lipschitz constant of
    t -> A(t) and the parameter interval length T).
    """

    gamma: float
    u: float
    k_subintervals: int
    lipschitz: float
    horizon: float

    def __post_init__(self):
        if self.gamma < 1.0:
            raise ValueError(f"gamma must be at least 1, got {self.gamma}")
        if self.u < 3.0:
            raise ValueError(f"u must be at least 3, got {self.u}")
        if self.k_subintervals < 1:
            raise ValueError(f"need at least one subinterval, got {self.k_subintervals}")
        if self.lipschitz < 0.0 or self.horizon < 0.0:
            raise ValueError("lipschitz constant and horizon must be nonnegative")


def bound_hmt_sup_tail(params: TailBoundParams, r: int, p: int,
                       sup_tail_sigma: float, sup_sigma_rp1: float) -> tuple:
    """Threshold and failure probability for the sup-norm tail bound.

    With probability at least 1 - 2k(gamma^-p + exp(-u^2/2)), the sup over
    the parameter interval of the projection error is at most

        (1 + gamma sqrt(3r/(p+1))) * sup_t sqrt(tail_r(A(t)))
        + u gamma e sqrt(r+p)/(p+1) * sup_t sigma_{r+1}(A(t))
        + (2 T L / k) * ((1 + gamma sqrt(3r/(p+1))) (1 + 4u) + 1).

    ``sup_tail_sigma`` is sup_t sqrt(sum_{j>r} sigma_j(A(t))^2) and
    ``sup_sigma_rp1`` is sup_t sigma_{r+1}(A(t)).
    """
    if r < 2:
        raise ValueError(f"the tail bound needs target rank >= 2, got {r}")
    if p < 4:
        raise ValueError(f"the tail failure-probability bound needs oversampling >= 4, got {p}")
    if sup_tail_sigma < 0.0 or sup_sigma_rp1 < 0.0:
        raise ValueError("singular value suprema cannot be negative")
    g, u, k = params.gamma, params.u, params.k_subintervals
    base = 1.0 + g * math.sqrt(3.0 * r / (p + 1.0))
    threshold = (base * sup_tail_sigma
                 + u * g * math.e * math.sqrt(r + p) / (p + 1.0) * sup_sigma_rp1
                 + (2.0 * params.horizon * params.lipschitz / k)
                 * (base * (1.0 + 4.0 * u) + 1.0))
    prob = 2.0 * k * (g ** (-p) + math.exp(-u * u / 2.0))
    return threshold, prob


# ---------------------------------------------------------------------------
# reports


@dataclass
class ErrorReport:
    """Per-point errors of one method next to the optimal reference curve."""

    ts: np.ndarray
    err: np.ndarray
    best_err: np.ndarray
    rank: int
    l2: float
    sup: float
    best_l2: float
    best_sup: float

    def to_csv(self) -> str:
        lines = ["t,err,best_err"]
        for t, e, b in zip(self.ts, self.err, self.best_err):
            lines.append(f"{t:.17g},{e:.17g},{b:.17g}")
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {
            "rank": self.rank,
            "points": int(self.ts.size),
            "l2_error": self.l2,
            "sup_error": self.sup,
            "best_l2": self.best_l2,
            "best_sup": self.best_sup,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"


def error_report(model_or_snapshots, approxs: Sequence[LowRankApprox],
                 grid: ParamGrid, rank: int) -> ErrorReport:
    """Measure a family of approximations against the rank-``rank`` optimum."""
    snaps = _resolve_snapshots(model_or_snapshots, grid)
    errs = pointwise_errors(snaps, approxs, grid)
    tails = grid_tail_energies(snaps, grid, rank)
    best_err = np.sqrt(tails)
    return ErrorReport(
        ts=grid.points.copy(),
        err=errs,
        best_err=best_err,
        rank=rank,
        l2=float(np.sqrt(trapezoid(errs ** 2, grid.points))) if len(grid) > 1 else float(errs[0]),
        sup=float(np.max(errs)),
        best_l2=float(np.sqrt(trapezoid(tails, grid.points))) if len(grid) > 1 else float(best_err[0]),
        best_sup=float(np.max(best_err)),
    )
