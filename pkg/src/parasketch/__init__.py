"""Randomized low-rank sketching for parameter-dependent matrices.

The package approximates a matrix family A(t) on a parameter grid with a
single pair of random dimension-reduction matrices shared across the whole
parameter range. Two sketches are provided: a range-finder factorization
(``hmt``) and a two-sided factorization with an oblivious left sketch
(``gn``), both with offline/online splittings for affine families and a
Monte Carlo harness that checks the error bounds backing them.
"""

from .errors import PreconditionError
from .hmt import (
    LowRankApprox,
    SketchConfig,
    hmt_apply,
    hmt_fixed,
    hmt_offline,
    hmt_online,
    hmt_param_direct,
)
from .linalg import RngState, gaussian_matrix
from .metrics import best_l2, best_sup, error_report, l2_error, sup_error
from .models import (
    AffineModel,
    ParamDomain,
    ParamGrid,
    SchrodingerModel,
    SnapshotModel,
    SyntheticModel,
    schrodinger_model,
    snapshot_model,
    synthetic_model,
    uniform_grid,
)
from .montecarlo import (
    check_expectation_bound,
    check_tail_bound,
    make_config,
    run_trials,
)
from .nystrom import (
    GnConfig,
    gn_apply,
    gn_fixed,
    gn_offline,
    gn_online,
    gn_param,
    gn_streaming_update,
)

__version__ = "0.1.0"

__all__ = [
    "AffineModel",
    "GnConfig",
    "LowRankApprox",
    "ParamDomain",
    "ParamGrid",
    "PreconditionError",
    "RngState",
    "SchrodingerModel",
    "SketchConfig",
    "SnapshotModel",
    "SyntheticModel",
    "best_l2",
    "best_sup",
    "check_expectation_bound",
    "check_tail_bound",
    "error_report",
    "gaussian_matrix",
    "gn_apply",
    "gn_fixed",
    "gn_offline",
    "gn_online",
    "gn_param",
    "gn_streaming_update",
    "hmt_apply",
    "hmt_fixed",
    "hmt_offline",
    "hmt_online",
    "hmt_param_direct",
    "l2_error",
    "make_config",
    "run_trials",
    "schrodinger_model",
    "snapshot_model",
    "sup_error",
    "synthetic_model",
    "uniform_grid",
]
