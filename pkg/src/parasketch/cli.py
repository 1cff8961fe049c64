"""Command line interface: approx, verify and bench experiment runs.

Each subcommand reads a JSON config, writes CSV output plus a rendered
figure (approx and bench) or a JSON verdict summary (verify) under the
config's output directory, and exits with 0 on success, 1 on usage or
configuration errors, 2 on verification failure and 3 on numerical
precondition failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from typing import Optional

import numpy as np

from .config import ConfigError, ExperimentConfig, build_grid, build_model, load_config
from .errors import PreconditionError
from .hmt import SketchConfig, draw_omega, hmt_apply, hmt_offline, hmt_online
from .io import atomic_write_text
from .linalg import singular_values, tail_energy
from .metrics import (
    bound_gn_expectation,
    bound_gn_tail,
    bound_hmt_expectation,
    bound_hmt_tail,
    trapezoid,
)
from .montecarlo import (
    GN_METHODS,
    TrialStats,
    check_expectation_bound,
    check_tail_bound,
    default_threads,
    make_config,
    run_trials,
)
from .nystrom import GnConfig, default_second_oversampling, draw_sketch, gn_apply, gn_offline, gn_online

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VERIFY = 2
EXIT_PRECONDITION = 3

VERIFIABLE_METHODS = ("hmt", "hmt-affine", "gn", "gn-affine")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="parasketch",
                     description="low-rank sketching of parameter-dependent matrices")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("approx", "rank sweep: per-rank error CSV plus a rendered figure"),
        ("verify", "Monte Carlo check of error bounds, JSON verdicts"),
        ("bench", "wall-time comparison of offline/online against direct sketching"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="path to a JSON config file")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the config's base_seed")
        cmd.add_argument("--threads", type=int, default=None,
                         help="worker threads for trials (default: PARASKETCH_THREADS or 1)")
        if name == "bench":
            cmd.add_argument("--skip-timing-asserts", action="store_true",
                             help="record timings without enforcing the speedup assertion")
    return parser


def _grid_best_l2(svals, grid, rank: int) -> float:
    tails = [tail_energy(sv, rank) for sv in svals]
    return float(np.sqrt(trapezoid(tails, grid.points)))


def _check_rank_sizes(cfg: ExperimentConfig, shape) -> None:
    if not cfg.ranks:
        raise ConfigError("'ranks' must be a nonempty list for this command")
    m, n = shape
    for r in cfg.ranks:
        if r + cfg.oversampling > min(m, n):
            raise ConfigError(
                f"rank {r} + oversampling {cfg.oversampling} exceeds min(m, n) = {min(m, n)}")
        if cfg.method in GN_METHODS:
            ell = cfg.second_oversampling or default_second_oversampling(r + cfg.oversampling)
            if r + cfg.oversampling + ell > m:
                raise ConfigError(
                    f"rank {r} + oversampling {cfg.oversampling} + second oversampling {ell} "
                    f"exceeds m = {m}")


def cmd_approx(cfg: ExperimentConfig, threads: int) -> int:
    model = build_model(cfg)
    grid = build_grid(cfg, model)
    _check_rank_sizes(cfg, model.shape)
    trials = cfg.trials or 20
    snapshots = model.eval_grid(grid)
    svals = [singular_values(a) for a in snapshots]
    rows = []
    for r in cfg.ranks:
        mcfg = make_config(cfg.method, r, cfg.oversampling, cfg.base_seed,
                           cfg.second_oversampling, cfg.epsilon)
        stats = run_trials(model, grid, cfg.method, mcfg, trials,
                           threads=threads, snapshots=snapshots)
        rows.append({
            "rank": r,
            "mean_l2": float(np.mean(stats.errors)),
            "min_l2": float(np.min(stats.errors)),
            "max_l2": float(np.max(stats.errors)),
            "best_l2": _grid_best_l2(svals, grid, r + cfg.oversampling),
        })
    lines = ["rank,mean_l2,min_l2,max_l2,best_l2"]
    for row in rows:
        lines.append(f"{row['rank']},{row['mean_l2']:.17g},{row['min_l2']:.17g},"
                     f"{row['max_l2']:.17g},{row['best_l2']:.17g}")
    csv_path = cfg.output_dir / "approx.csv"
    atomic_write_text(csv_path, "\n".join(lines) + "\n")
    from . import plots

    png_path = cfg.output_dir / "approx.png"
    plots.render_rank_sweep(png_path, rows, cfg.method)
    print(f"wrote {csv_path} and {png_path}")
    return EXIT_OK


def _verify_hypotheses(cfg: ExperimentConfig) -> None:
    """Reject configs whose checks are outside the bounds' hypotheses, before
    any computation runs."""
    if cfg.method not in VERIFIABLE_METHODS:
        raise ConfigError(
            f"verify supports {', '.join(VERIFIABLE_METHODS)}; "
            f"{cfg.method!r} has no matching bound")
    if "tail" not in cfg.checks:
        return
    if cfg.oversampling < 4:
        raise ConfigError(
            "the tail failure-probability bound requires oversampling >= 4, "
            f"got {cfg.oversampling}")
    if cfg.method in GN_METHODS:
        for r in cfg.ranks:
            ell = cfg.second_oversampling or default_second_oversampling(r + cfg.oversampling)
            if ell < 4:
                raise ConfigError(
                    "the tail failure-probability bound requires second oversampling >= 4, "
                    f"got {ell} at rank {r}")


def cmd_verify(cfg: ExperimentConfig, threads: int) -> int:
    if not cfg.ranks:
        raise ConfigError("'ranks' must be a nonempty list for this command")
    _verify_hypotheses(cfg)
    model = build_model(cfg)
    grid = build_grid(cfg, model)
    _check_rank_sizes(cfg, model.shape)
    p = cfg.oversampling
    n_exp = cfg.trials or 100
    n_tail = cfg.trials or 200
    n_run = max(n_exp if "expectation" in cfg.checks else 0,
                n_tail if "tail" in cfg.checks else 0)
    snapshots = model.eval_grid(grid)
    svals = [singular_values(a) for a in snapshots]
    is_gn = cfg.method in GN_METHODS
    verdicts = []
    all_passed = True
    for r in cfg.ranks:
        mcfg = make_config(cfg.method, r, p, cfg.base_seed,
                           cfg.second_oversampling, cfg.epsilon)
        ell = mcfg.second_oversampling if is_gn else None
        stats = run_trials(model, grid, cfg.method, mcfg, n_run,
                           threads=threads, snapshots=snapshots)
        best = _grid_best_l2(svals, grid, r)
        csv_path = cfg.output_dir / f"trials_{cfg.method}_r{r}.csv"
        atomic_write_text(csv_path, stats.to_csv())
        if "expectation" in cfg.checks:
            sub = TrialStats(cfg.method, stats.errors[:n_exp], cfg.base_seed)
            if is_gn:
                bound = bound_gn_expectation(r, p, ell, best ** 2)
            else:
                bound = bound_hmt_expectation(r, p, best ** 2)
            verdict = check_expectation_bound(sub, bound)
            all_passed &= verdict.passed
            record = {"method": cfg.method, "rank": r, **verdict.to_dict()}
            verdicts.append(record)
            print(_verdict_line(record))
        if "tail" in cfg.checks:
            sub = TrialStats(cfg.method, stats.errors[:n_tail], cfg.base_seed)
            for gamma in cfg.gammas:
                if is_gn:
                    threshold, prob = bound_gn_tail(r, p, ell, gamma, best)
                else:
                    threshold, prob = bound_hmt_tail(r, p, gamma, best)
                verdict = check_tail_bound(sub, threshold, prob)
                all_passed &= verdict.passed
                record = {"method": cfg.method, "rank": r, "gamma": gamma,
                          **verdict.to_dict()}
                verdicts.append(record)
                print(_verdict_line(record))
    summary = {"method": cfg.method, "all_passed": bool(all_passed), "verdicts": verdicts}
    json_path = cfg.output_dir / "verdicts.json"
    atomic_write_text(json_path, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"wrote {json_path}")
    return EXIT_OK if all_passed else EXIT_VERIFY


def _verdict_line(record: dict) -> str:
    status = "PASS" if record["passed"] else "FAIL"
    if record["kind"] == "expectation":
        detail = f"ratio={record['ratio']:.3g}" if record["ratio"] is not None else "ratio=n/a"
    else:
        detail = (f"gamma={record['gamma']} failures={record['failures']}"
                  f"/{record['n_trials']} bound={record['prob_bound']:.3g}")
    return f"{status} {record['kind']} rank={record['rank']} {detail}"


def cmd_bench(cfg: ExperimentConfig, skip_asserts: bool) -> int:
    model = build_model(cfg)
    affine = model.affine()
    if affine is None:
        raise ConfigError("bench needs a model with an affine decomposition")
    grid = build_grid(cfg, model)
    _check_rank_sizes(cfg, model.shape)
    m, n = model.shape
    q = len(grid)
    rows = []
    violations = []
    for r in cfg.ranks:
        scfg = SketchConfig(rank=r, oversampling=cfg.oversampling, seed=cfg.base_seed)
        gn_kwargs = {}
        if cfg.second_oversampling is not None:
            gn_kwargs["second_oversampling"] = cfg.second_oversampling
        if cfg.epsilon is not None:
            gn_kwargs["epsilon"] = cfg.epsilon
        gcfg = GnConfig(rank=r, oversampling=cfg.oversampling, seed=cfg.base_seed, **gn_kwargs)

        tic = time.perf_counter()
        hdata = hmt_offline(affine, scfg)
        t_hmt_off = time.perf_counter() - tic
        tic = time.perf_counter()
        phis = np.array([affine.phi_values(t) for t in grid])
        hmt_online(hdata, phis, grid)
        t_hmt_on = time.perf_counter() - tic
        omega = draw_omega(scfg, n)
        tic = time.perf_counter()
        for t in grid:
            hmt_apply(affine.eval(t), omega)
        t_hmt_dir = time.perf_counter() - tic

        tic = time.perf_counter()
        gdata = gn_offline(affine, gcfg)
        t_gn_off = time.perf_counter() - tic
        tic = time.perf_counter()
        phis = np.array([affine.phi_values(t) for t in grid])
        gn_online(gdata, phis, grid)
        t_gn_on = time.perf_counter() - tic
        pack = draw_sketch(gcfg, m, n)
        tic = time.perf_counter()
        for t in grid:
            gn_apply(affine.eval(t), pack.omega, pack.psi, gcfg.epsilon)
        t_gn_dir = time.perf_counter() - tic

        for method, phase, seconds in (
            ("hmt", "offline", t_hmt_off),
            ("hmt", "online", t_hmt_on),
            ("hmt", "direct", t_hmt_dir),
            ("gn", "offline", t_gn_off),
            ("gn", "online", t_gn_on),
            ("gn", "direct", t_gn_dir),
        ):
            rows.append({"method": method, "phase": phase, "seconds": seconds,
                         "k": affine.k, "q": q, "rank": r})
        for method, online, direct in (("hmt", t_hmt_on, t_hmt_dir),
                                       ("gn", t_gn_on, t_gn_dir)):
            if online > 0.5 * direct:
                violations.append(
                    f"{method} online took {online:.3f}s at rank {r}, more than half "
                    f"of the direct {direct:.3f}s")
    lines = ["method,phase,seconds,k,q,rank"]
    for row in rows:
        lines.append(f"{row['method']},{row['phase']},{row['seconds']:.6f},"
                     f"{row['k']},{row['q']},{row['rank']}")
    csv_path = cfg.output_dir / "bench.csv"
    atomic_write_text(csv_path, "\n".join(lines) + "\n")
    from . import plots

    png_path = cfg.output_dir / "bench.png"
    plots.render_bench(png_path, rows)
    print(f"wrote {csv_path} and {png_path}")
    if violations and not skip_asserts:
        for v in violations:
            print(f"FAIL timing: {v}", file=sys.stderr)
        return EXIT_VERIFY
    if violations:
        for v in violations:
            print(f"skipped timing assert: {v}")
    return EXIT_OK


def main(argv: Optional[list] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.base_seed = args.seed
        threads = args.threads if args.threads is not None else default_threads()
        if threads < 1:
            raise ConfigError(f"thread count must be positive, got {threads}")
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "approx":
            return cmd_approx(cfg, threads)
        if args.command == "verify":
            return cmd_verify(cfg, threads)
        return cmd_bench(cfg, args.skip_timing_asserts)
    except PreconditionError as exc:
        print(f"numerical precondition failure: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
