"""Experiment configuration: JSON schema, coefficient expressions, model building.

Paths inside a config file (term matrices, snapshot manifests, the output
directory) resolve relative to the config file's own directory, so a config
can travel together with its data.
"""

from __future__ import annotations

import ast
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .io import load_matrix, load_snapshots
from .linalg import RngState, gaussian_matrix
from .models import (
    AffineModel,
    ParamDomain,
    ParamGrid,
    ParamMatrixModel,
    SnapshotModel,
    schrodinger_model,
    synthetic_model,
    uniform_grid,
)
from .montecarlo import METHODS

MODEL_KINDS = ("synthetic", "schrodinger", "affine-file", "snapshot-file", "affine-random")
CHECK_KINDS = ("expectation", "tail")


class ConfigError(ValueError):
    """The configuration file is malformed or inconsistent."""


# ---------------------------------------------------------------------------
# coefficient expression grammar: numbers, t, + - * / **, exp/cos/sin, pi, e

_PHI_FUNCS = {"exp": math.exp, "cos": math.cos, "sin": math.sin}
_PHI_CONSTS = {"pi": math.pi, "e": math.e}
_PHI_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)


def _validate_phi_node(node: ast.AST, expr: str) -> None:
    if isinstance(node, ast.Expression):
        _validate_phi_node(node.body, expr)
    elif isinstance(node, ast.BinOp) and isinstance(node.op, _PHI_BINOPS):
        _validate_phi_node(node.left, expr)
        _validate_phi_node(node.right, expr)
    elif isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
        _validate_phi_node(node.operand, expr)
    elif isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        pass
    elif isinstance(node, ast.Name) and (node.id == "t" or node.id in _PHI_CONSTS):
        pass
    elif (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
          and node.func.id in _PHI_FUNCS and not node.keywords and len(node.args) == 1):
        _validate_phi_node(node.args[0], expr)
    else:
        raise ConfigError(f"unsupported construct in coefficient expression {expr!r}")


def parse_phi(expr: str) -> Callable[[float], float]:
    """Compile a coefficient expression in t into a scalar function."""
    if not isinstance(expr, str) or not expr.strip():
        raise ConfigError(f"coefficient expression must be a nonempty string, got {expr!r}")
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse coefficient expression {expr!r}: {exc}") from None
    _validate_phi_node(tree, expr)
    code = compile(tree, "<phi>", "eval")
    base = {**_PHI_FUNCS, **_PHI_CONSTS}

    def phi(t: float) -> float:
        return float(eval(code, {"__builtins__": {}}, {**base, "t": t}))

    phi.expression = expr
    return phi


# ---------------------------------------------------------------------------
# config schema

_TOP_KEYS = {
    "model", "method", "ranks", "oversampling", "second_oversampling", "epsilon",
    "grid", "trials", "base_seed", "output_dir", "checks", "gammas",
}


@dataclass
class ExperimentConfig:
    """Validated contents of one experiment config file."""

    model_spec: dict
    method: str
    ranks: list
    oversampling: int
    base_dir: Path
    output_dir: Path
    second_oversampling: Optional[int] = None
    epsilon: Optional[float] = None
    grid_points: int = 300
    grid_interval: Optional[tuple] = None
    trials: Optional[int] = None
    base_seed: int = 0
    checks: tuple = CHECK_KINDS
    gammas: tuple = (1.25, 1.5)


def _expect(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    _expect(isinstance(raw, dict), "config must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    _expect(not unknown, f"unknown config keys: {', '.join(sorted(unknown))}")

    _expect("model" in raw, "config needs a 'model' section")
    model_spec = raw["model"]
    _expect(isinstance(model_spec, dict) and "kind" in model_spec,
            "'model' must be an object with a 'kind'")
    _expect(model_spec["kind"] in MODEL_KINDS,
            f"unknown model kind {model_spec['kind']!r}; expected one of {', '.join(MODEL_KINDS)}")

    method = raw.get("method", "hmt")
    _expect(method in METHODS,
            f"unknown method {method!r}; expected one of {', '.join(METHODS)}")

    ranks = raw.get("ranks", [])
    _expect(isinstance(ranks, list) and all(isinstance(r, int) and r >= 2 for r in ranks),
            "'ranks' must be a list of integers, each at least 2")

    oversampling = raw.get("oversampling", 5)
    _expect(isinstance(oversampling, int) and oversampling >= 2,
            "'oversampling' must be an integer of at least 2")

    second = raw.get("second_oversampling")
    _expect(second is None or (isinstance(second, int) and second >= 1),
            "'second_oversampling' must be an integer of at least 1")

    epsilon = raw.get("epsilon")
    _expect(epsilon is None or (isinstance(epsilon, (int, float)) and epsilon >= 0),
            "'epsilon' must be a nonnegative number")

    grid = raw.get("grid", {})
    _expect(isinstance(grid, dict) and not (set(grid) - {"points", "interval"}),
            "'grid' accepts only 'points' and 'interval'")
    points = grid.get("points", 300)
    _expect(isinstance(points, int) and points >= 2, "'grid.points' must be an integer >= 2")
    interval = grid.get("interval")
    if interval is not None:
        _expect(isinstance(interval, list) and len(interval) == 2
                and all(isinstance(x, (int, float)) for x in interval)
                and interval[0] < interval[1],
                "'grid.interval' must be [a, b] with a < b")
        interval = (float(interval[0]), float(interval[1]))

    trials = raw.get("trials")
    _expect(trials is None or (isinstance(trials, int) and trials >= 1),
            "'trials' must be a positive integer")

    base_seed = raw.get("base_seed", 0)
    _expect(isinstance(base_seed, int), "'base_seed' must be an integer")

    checks = raw.get("checks", list(CHECK_KINDS))
    _expect(isinstance(checks, list) and checks
            and all(c in CHECK_KINDS for c in checks),
            f"'checks' must be a nonempty list drawn from {', '.join(CHECK_KINDS)}")

    gammas = raw.get("gammas", [1.25, 1.5])
    _expect(isinstance(gammas, list) and gammas
            and all(isinstance(g, (int, float)) and g >= 1.0 for g in gammas),
            "'gammas' must be a nonempty list of numbers, each at least 1")

    base_dir = path.parent.resolve()
    output_dir = Path(raw.get("output_dir", "out"))
    if not output_dir.is_absolute():
        output_dir = base_dir / output_dir

    return ExperimentConfig(
        model_spec=model_spec,
        method=method,
        ranks=list(ranks),
        oversampling=oversampling,
        base_dir=base_dir,
        output_dir=output_dir,
        second_oversampling=second,
        epsilon=None if epsilon is None else float(epsilon),
        grid_points=points,
        grid_interval=interval,
        trials=trials,
        base_seed=int(base_seed),
        checks=tuple(checks),
        gammas=tuple(float(g) for g in gammas),
    )


# ---------------------------------------------------------------------------
# model and grid construction


def _model_field(spec: dict, key: str, types, message: str):
    _expect(key in spec, f"model kind {spec['kind']!r} needs {key!r}")
    value = spec[key]
    _expect(isinstance(value, types), message)
    return value


def build_model(cfg: ExperimentConfig) -> ParamMatrixModel:
    spec = dict(cfg.model_spec)
    kind = spec["kind"]
    if kind == "synthetic":
        n = _model_field(spec, "n", int, "'n' must be an integer")
        seed = spec.get("seed", 0)
        return synthetic_model(n, RngState(seed))
    if kind == "schrodinger":
        n = _model_field(spec, "n", int, "'n' must be an integer")
        seed = spec.get("seed", 0)
        steps = spec.get("steps", 2000)
        _expect(isinstance(steps, int) and steps >= 1, "'steps' must be a positive integer")
        return schrodinger_model(n, RngState(seed), steps=steps)
    if kind == "affine-file":
        terms = _model_field(spec, "terms", list, "'terms' must be a list")
        _expect(terms and all(isinstance(term, dict) and {"phi", "matrix"} <= set(term)
                              for term in terms),
                "each term needs 'phi' and 'matrix'")
        domain = _model_field(spec, "domain", list, "'domain' must be [a, b]")
        _expect(len(domain) == 2 and domain[0] <= domain[1], "'domain' must be [a, b] with a <= b")
        phis = [parse_phi(term["phi"]) for term in terms]
        try:
            mats = [load_matrix(cfg.base_dir / term["matrix"]) for term in terms]
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load term matrix: {exc}") from None
        return AffineModel(phis, mats, ParamDomain.interval(domain[0], domain[1]))
    if kind == "snapshot-file":
        manifest = _model_field(spec, "manifest", str, "'manifest' must be a path")
        try:
            ts, mats = load_snapshots(cfg.base_dir / manifest)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load snapshots: {exc}") from None
        return SnapshotModel(ts, mats)
    if kind == "affine-random":
        m = _model_field(spec, "m", int, "'m' must be an integer")
        n = _model_field(spec, "n", int, "'n' must be an integer")
        k = _model_field(spec, "k", int, "'k' must be an integer")
        _expect(m >= 1 and n >= 1 and k >= 1, "'m', 'n' and 'k' must be positive")
        seed = spec.get("seed", 0)
        mats = [gaussian_matrix(RngState(seed, i), m, n) for i in range(k)]
        phis = [_monomial(i) for i in range(k)]
        return AffineModel(phis, mats, ParamDomain.interval(0.0, 1.0))
    raise ConfigError(f"unknown model kind {kind!r}")


def _monomial(i: int) -> Callable[[float], float]:
    def phi(t: float) -> float:
        return float(t ** i)

    phi.expression = f"t**{i}" if i else "1"
    return phi


def build_grid(cfg: ExperimentConfig, model: ParamMatrixModel) -> ParamGrid:
    if isinstance(model, SnapshotModel):
        _expect(cfg.grid_interval is None,
                "snapshot models define their own grid; drop 'grid.interval'")
        return model.grid()
    if cfg.grid_interval is not None:
        lo, hi = cfg.grid_interval
        domain = ParamDomain.interval(lo, hi)
        _expect(model.domain.contains(lo) and model.domain.contains(hi),
                f"grid interval [{lo}, {hi}] leaves the model domain")
        return uniform_grid(domain, cfg.grid_points)
    return uniform_grid(model.domain, cfg.grid_points)
