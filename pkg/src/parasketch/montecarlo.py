"""Monte Carlo harness checking empirical errors against the stated bounds.

Trial i redraws the test matrices from stream i of the base seed, so a run
is reproducible from (config, base seed) alone and trials are independent.
Aggregation is an ordered reduction over trial indices; the thread count
changes wall time, never results.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .hmt import (
    SketchConfig,
    draw_omega,
    hmt_apply,
    hmt_offline,
    hmt_online,
    hmt_param_direct,
)
from .linalg import RngState, gaussian_matrix
from .metrics import l2_error, sup_error, svd_baseline
from .models import ParamGrid, ParamMatrixModel
from .nystrom import GnConfig, gn_offline, gn_online, gn_param

# Streams at and above this value address per-point test matrices of the
# independent-DRM method; constant-DRM trials use plain streams 0, 1, 2, ...
INDEPENDENT_STREAM_BASE = 1 << 62

HMT_METHODS = ("hmt", "hmt-affine", "independent-drm", "svd-baseline")
GN_METHODS = ("gn", "gn-affine")
METHODS = HMT_METHODS + GN_METHODS


def _affine_phis(model: ParamMatrixModel, grid: ParamGrid) -> np.ndarray:
    aff = model.affine()
    if aff is None:
        raise ValueError("this method needs a model with an affine decomposition")
    return np.array([aff.phi_values(t) for t in grid])


def _run_method(method: str, model: ParamMatrixModel, grid: ParamGrid,
                snapshots: Sequence[np.ndarray], cfg) -> list:
    if method == "hmt":
        return hmt_param_direct(model, grid, cfg, snapshots=snapshots)
    if method == "hmt-affine":
        phis = _affine_phis(model, grid)
        data = hmt_offline(model.affine(), cfg)
        return hmt_online(data, phis, grid)
    if method == "gn":
        return gn_param(model, grid, cfg, snapshots=snapshots)
    if method == "gn-affine":
        phis = _affine_phis(model, grid)
        data = gn_offline(model.affine(), cfg)
        return gn_online(data, phis, grid)
    if method == "svd-baseline":
        return svd_baseline(snapshots, grid, cfg.sketch_size)
    if method == "independent-drm":
        n = model.shape[1]
        out = []
        for j, a in enumerate(snapshots):
            stream = INDEPENDENT_STREAM_BASE + cfg.stream * len(grid) + j
            omega = gaussian_matrix(RngState(cfg.seed, stream), n, cfg.sketch_size)
            out.append(hmt_apply(a, omega))
        return out
    raise ValueError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")


def make_config(method: str, rank: int, oversampling: int, seed: int,
                second_oversampling: Optional[int] = None,
                epsilon: Optional[float] = None):
    """The config type a method expects, filled with the given sizes."""
    if method in GN_METHODS:
        kwargs = {}
        if second_oversampling is not None:
            kwargs["second_oversampling"] = second_oversampling
        if epsilon is not None:
            kwargs["epsilon"] = epsilon
        return GnConfig(rank=rank, oversampling=oversampling, seed=seed, **kwargs)
    if method in HMT_METHODS:
        return SketchConfig(rank=rank, oversampling=oversampling, seed=seed)
    raise ValueError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")


@dataclass
class TrialStats:
    """Per-trial errors of one method, one error kind, one base seed."""

    method: str
    errors: np.ndarray
    base_seed: int
    error_kind: str = "l2"

    def __post_init__(self):
        errs = np.asarray(self.errors, dtype=np.float64)
        if errs.ndim != 1 or errs.size == 0:
            raise ValueError("need a nonempty 1-D error array")
        if np.any(~np.isfinite(errs)) or np.any(errs < 0.0):
            raise ValueError("trial errors must be finite and nonnegative")
        self.errors = errs

    @property
    def n_trials(self) -> int:
        return int(self.errors.size)

    @property
    def mean_sq(self) -> float:
        return float(np.mean(self.errors ** 2))

    def quantiles(self) -> dict:
        qs = np.percentile(self.errors, [0, 25, 50, 75, 100])
        return {"min": float(qs[0]), "q25": float(qs[1]), "median": float(qs[2]),
                "q75": float(qs[3]), "max": float(qs[4])}

    def failures(self, threshold: float) -> int:
        return int(np.count_nonzero(self.errors > threshold))

    def to_csv(self) -> str:
        lines = ["trial,error"]
        lines.extend(f"{i},{e:.17g}" for i, e in enumerate(self.errors))
        return "\n".join(lines) + "\n"


def run_trials(model: ParamMatrixModel, grid: ParamGrid, method: str, cfg,
               n_trials: int, threads: int = 1, error_kind: str = "l2",
               snapshots: Optional[Sequence[np.ndarray]] = None) -> TrialStats:
    """Run n_trials independent sketches and collect their errors.

    Trial i uses stream i of cfg's seed. The model is evaluated on the grid
    once (or reuse precomputed ``snapshots``); only the sketches are
    redrawn per trial.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    if method in GN_METHODS and not isinstance(cfg, GnConfig):
        raise ValueError(f"method {method!r} needs a GnConfig")
    if method in HMT_METHODS and not isinstance(cfg, SketchConfig):
        raise ValueError(f"method {method!r} needs a SketchConfig")
    if n_trials < 1:
        raise ValueError(f"need at least one trial, got {n_trials}")
    if error_kind not in ("l2", "sup"):
        raise ValueError(f"error_kind must be 'l2' or 'sup', got {error_kind!r}")
    if snapshots is None:
        snapshots = model.eval_grid(grid)
    measure = l2_error if error_kind == "l2" else sup_error

    def one(i: int) -> float:
        approxs = _run_method(method, model, grid, snapshots, replace(cfg, stream=i))
        return measure(snapshots, approxs, grid)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            errors = list(pool.map(one, range(n_trials)))
    else:
        errors = [one(i) for i in range(n_trials)]
    return TrialStats(method=method, errors=np.array(errors),
                      base_seed=cfg.seed, error_kind=error_kind)


def default_threads() -> int:
    """Thread count from the PARASKETCH_THREADS environment variable (default 1)."""
    raw = os.environ.get("PARASKETCH_THREADS", "")
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"PARASKETCH_THREADS must be an integer, got {raw!r}") from None
    if value < 1:
        raise ValueError(f"PARASKETCH_THREADS must be positive, got {value}")
    return value


@dataclass(frozen=True)
class ExpectationVerdict:
    """Outcome of comparing a mean squared error against its bound."""

    passed: bool
    mean_sq: float
    bound: float
    ratio: float
    margin: float
    n_trials: int

    def to_dict(self) -> dict:
        return {
            "kind": "expectation",
            "passed": self.passed,
            "mean_sq": self.mean_sq,
            "bound": self.bound,
            "ratio": self.ratio if math.isfinite(self.ratio) else None,
            "margin": self.margin,
            "n_trials": self.n_trials,
        }


@dataclass(frozen=True)
class TailVerdict:
    """Outcome of comparing an empirical failure rate against its bound."""

    passed: bool
    failures: int
    n_trials: int
    failure_rate: float
    threshold: float
    prob_bound: float
    margin: float

    def to_dict(self) -> dict:
        return {
            "kind": "tail",
            "passed": self.passed,
            "failures": self.failures,
            "n_trials": self.n_trials,
            "failure_rate": self.failure_rate,
            "threshold": self.threshold,
            "prob_bound": self.prob_bound,
            "margin": self.margin,
        }


def check_expectation_bound(stats: TrialStats, bound: float) -> ExpectationVerdict:
    """PASS iff the mean squared error is at most the bound, up to 3 standard
    errors of the mean (so a true-in-expectation bound almost never fails on
    finite samples)."""
    if bound < 0.0:
        raise ValueError("an expected squared error bound cannot be negative")
    sq = stats.errors ** 2
    mean = float(np.mean(sq))
    if mean == 0.0:
        return ExpectationVerdict(True, 0.0, bound, 0.0, 0.0, stats.n_trials)
    if stats.n_trials > 1:
        stderr = float(np.std(sq, ddof=1)) / math.sqrt(stats.n_trials)
    else:
        stderr = 0.0
    margin = 3.0 * stderr / mean
    ratio = mean / bound if bound > 0.0 else math.inf
    return ExpectationVerdict(mean <= bound * (1.0 + margin), mean, bound,
                              ratio, margin, stats.n_trials)


def check_tail_bound(stats: TrialStats, threshold: float, prob_bound: float) -> TailVerdict:
    """PASS iff the empirical failure rate is at most the probability bound
    plus 3 binomial standard errors."""
    if threshold < 0.0:
        raise ValueError("threshold cannot be negative")
    if prob_bound < 0.0:
        raise ValueError("a failure probability bound cannot be negative")
    n = stats.n_trials
    failures = stats.failures(threshold)
    rate = failures / n
    p = min(prob_bound, 1.0)
    margin = 3.0 * math.sqrt(p * (1.0 - p) / n)
    return TailVerdict(rate <= prob_bound + margin, failures, n, rate,
                       threshold, prob_bound, margin)
