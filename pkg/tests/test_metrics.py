"""Error metrics on parameter grids plus the bound evaluators that the
Monte Carlo verdicts compare against."""

import json

import numpy as np
import pytest

from parasketch.hmt import LowRankApprox, SketchConfig, hmt_param_direct
from parasketch.linalg import RngState
from parasketch.metrics import (
    ErrorReport,
    TailBoundParams,
    best_l2,
    best_sup,
    bound_gn_expectation,
    bound_gn_tail,
    bound_hmt_expectation,
    bound_hmt_sup_tail,
    bound_hmt_tail,
    error_report,
    estimate_lipschitz,
    l2_error,
    pointwise_errors,
    sup_error,
    svd_baseline,
    trapezoid,
)
from parasketch.models import AffineModel, ParamDomain, ParamGrid, SyntheticModel, uniform_grid


def identity_approx(a):
    """A LowRankApprox that reconstructs exactly the given matrix."""
    m = a.shape[0]
    return LowRankApprox(np.eye(m), a.T)


class TestTrapezoid:
    def test_constant(self):
        pts = np.array([0.0, 0.3, 1.0])
        assert trapezoid(np.full(3, 5.0), pts) == pytest.approx(5.0, rel=1e-15)

    def test_linear_exact(self):
        pts = np.array([0.0, 0.1, 0.4, 1.0])
        vals = 2.0 * pts + 1.0
        assert trapezoid(vals, pts) == pytest.approx(2.0, rel=1e-15)

    def test_matches_numpy(self):
        rng = np.random.default_rng(55)
        pts = np.sort(rng.random(20))
        vals = rng.random(20)
        assert trapezoid(vals, pts) == pytest.approx(
            np.trapezoid(vals, pts), rel=1e-14)

    def test_validation(self):
        with pytest.raises(ValueError):
            trapezoid([1.0], [0.0])
        with pytest.raises(ValueError):
            trapezoid([1.0, 2.0], [0.0, 0.5, 1.0])


class TestGridErrors:
    def test_constant_error_integrates_to_itself(self):
        rng = np.random.default_rng(56)
        grid = uniform_grid(ParamDomain.interval(0.0, 1.0), 7)
        snaps = [rng.standard_normal((5, 4)) for _ in range(7)]
        shift = rng.standard_normal((5, 4))
        shift *= 0.25 / np.linalg.norm(shift)
        approxs = [identity_approx(a + shift) for a in snaps]
        assert l2_error(snaps, approxs, grid) == pytest.approx(0.25, rel=1e-12)
        assert sup_error(snaps, approxs, grid) == pytest.approx(0.25, rel=1e-12)
        errs = pointwise_errors(snaps, approxs, grid)
        assert np.allclose(errs, 0.25, atol=1e-12)

    def test_sup_on_single_point_grid(self):
        grid = ParamGrid(np.array([0.5]))
        snaps = [np.eye(3)]
        approxs = [identity_approx(np.zeros((3, 3)))]
        assert sup_error(snaps, approxs, grid) == pytest.approx(np.sqrt(3.0))

    def test_count_mismatch(self):
        grid = uniform_grid(ParamDomain.interval(0.0, 1.0), 3)
        with pytest.raises(ValueError, match="approximations"):
            pointwise_errors([np.eye(2)] * 3, [identity_approx(np.eye(2))], grid)
        with pytest.raises(ValueError, match="snapshots"):
            l2_error([np.eye(2)] * 2, [identity_approx(np.eye(2))] * 3, grid)

    def test_no_method_beats_best(self):
        model = SyntheticModel(20, RngState(57))
        grid = uniform_grid(model.domain, 11)
        cfg = SketchConfig(rank=4, oversampling=3, seed=5)
        approxs = hmt_param_direct(model, grid, cfg)
        method = l2_error(model, grid=grid, approxs=approxs)
        best = best_l2(model, grid, cfg.sketch_size)
        assert method >= best - 1e-10

    def test_svd_baseline_attains_best(self):
        model = SyntheticModel(16, RngState(58))
        grid = uniform_grid(model.domain, 9)
        snaps = model.eval_grid(grid)
        for rank in (2, 5):
            base = svd_baseline(snaps, grid, rank)
            achieved = l2_error(snaps, base, grid)
            optimal = best_l2(snaps, grid, rank)
            assert abs(achieved - optimal) <= 1e-10 * (1.0 + optimal)
            assert abs(sup_error(snaps, base, grid) - best_sup(snaps, grid, rank)) \
                <= 1e-10 * (1.0 + optimal)

    def test_svd_baseline_rank_validation(self):
        grid = ParamGrid(np.array([0.0, 1.0]))
        snaps = [np.eye(3), np.eye(3)]
        with pytest.raises(ValueError):
            svd_baseline(snaps, grid, 0)
        with pytest.raises(ValueError):
            svd_baseline(snaps, grid, 4)


def test_estimate_lipschitz_linear_family():
    rng = np.random.default_rng(59)
    a0 = rng.standard_normal((6, 5))
    c = rng.standard_normal((6, 5))
    model = AffineModel([lambda t: 1.0, lambda t: t], [a0, c],
                        ParamDomain.interval(0.0, 1.0))
    grid = uniform_grid(model.domain, 13)
    assert estimate_lipschitz(model, grid) == pytest.approx(
        np.linalg.norm(c), rel=1e-10)
    with pytest.raises(ValueError):
        estimate_lipschitz([np.eye(2)], ParamGrid(np.array([0.0])))


class TestExpectationBounds:
    def test_range_projection_factors(self):
        assert bound_hmt_expectation(10, 5, 1.0) == pytest.approx(3.5)
        assert bound_hmt_expectation(2, 2, 1.0) == pytest.approx(3.0)
        assert bound_hmt_expectation(10, 11, 1.0) == pytest.approx(2.0)
        assert bound_hmt_expectation(4, 3, 2.0) == pytest.approx(6.0)

    def test_two_sided_factors(self):
        assert bound_gn_expectation(10, 5, 4, 1.0) == pytest.approx(21.0)
        assert bound_gn_expectation(2, 2, 2, 1.0) == pytest.approx(15.0)
        # the acceptance setting: r = 10, p = 10, ell = 4
        assert bound_gn_expectation(10, 10, 4, 1.0) == pytest.approx(437.0 / 27.0)

    def test_hypotheses(self):
        with pytest.raises(ValueError):
            bound_hmt_expectation(1, 5, 1.0)
        with pytest.raises(ValueError):
            bound_hmt_expectation(5, 1, 1.0)
        with pytest.raises(ValueError):
            bound_hmt_expectation(5, 5, -1.0)
        with pytest.raises(ValueError):
            bound_gn_expectation(5, 5, 1, 1.0)


class TestTailBounds:
    def test_range_projection_values(self):
        threshold, prob = bound_hmt_tail(10, 10, 1.25, 2.0)
        assert threshold == pytest.approx(1.25 * np.sqrt(11.0) * 2.0)
        assert prob == pytest.approx(1.25 ** -10)
        _, prob = bound_hmt_tail(10, 10, 1.5, 2.0)
        assert prob == pytest.approx(1.5 ** -10)
        # gamma = 1 is allowed but vacuous
        _, prob = bound_hmt_tail(5, 4, 1.0, 1.0)
        assert prob == 1.0

    def test_two_sided_values(self):
        threshold, prob = bound_gn_tail(10, 10, 4, 1.25, 1.0)
        assert threshold == pytest.approx(1.25 * np.sqrt(21.0 * 11.0))
        assert prob == pytest.approx(1.25 ** -4)
        # failure probability uses the weaker of the two oversamplings
        _, prob = bound_gn_tail(5, 5, 7, 2.0, 1.0)
        assert prob == pytest.approx(2.0 ** -5)
        _, prob = bound_gn_tail(5, 7, 4, 2.0, 1.0)
        assert prob == pytest.approx(2.0 ** -4)

    def test_hypotheses(self):
        with pytest.raises(ValueError):
            bound_hmt_tail(10, 3, 1.5, 1.0)
        with pytest.raises(ValueError):
            bound_hmt_tail(10, 10, 0.9, 1.0)
        with pytest.raises(ValueError):
            bound_gn_tail(10, 10, 3, 1.5, 1.0)
        with pytest.raises(ValueError):
            bound_gn_tail(1, 10, 4, 1.5, 1.0)


class TestSupTailBound:
    def test_formula(self):
        params = TailBoundParams(gamma=1.5, u=3.0, k_subintervals=10,
                                 lipschitz=2.0, horizon=1.0)
        r, p = 8, 6
        sup_tail, sup_sig = 0.3, 0.05
        threshold, prob = bound_hmt_sup_tail(params, r, p, sup_tail, sup_sig)
        base = 1.0 + 1.5 * np.sqrt(3.0 * r / (p + 1.0))
        expected = (base * sup_tail
                    + 3.0 * 1.5 * np.e * np.sqrt(r + p) / (p + 1.0) * sup_sig
                    + (2.0 * 1.0 * 2.0 / 10.0) * (base * 13.0 + 1.0))
        assert threshold == pytest.approx(expected, rel=1e-14)
        assert prob == pytest.approx(2.0 * 10.0 * (1.5 ** -6 + np.exp(-4.5)))

    def test_zero_lipschitz_drops_discretization_term(self):
        params = TailBoundParams(gamma=2.0, u=4.0, k_subintervals=3,
                                 lipschitz=0.0, horizon=1.0)
        threshold, _ = bound_hmt_sup_tail(params, 5, 5, 1.0, 0.0)
        assert threshold == pytest.approx(1.0 + 2.0 * np.sqrt(15.0 / 6.0))

    def test_validation(self):
        with pytest.raises(ValueError):
            TailBoundParams(gamma=0.5, u=3.0, k_subintervals=1, lipschitz=0.0, horizon=0.0)
        with pytest.raises(ValueError):
            TailBoundParams(gamma=1.5, u=2.0, k_subintervals=1, lipschitz=0.0, horizon=0.0)
        with pytest.raises(ValueError):
            TailBoundParams(gamma=1.5, u=3.0, k_subintervals=0, lipschitz=0.0, horizon=0.0)
        params = TailBoundParams(gamma=1.5, u=3.0, k_subintervals=1,
                                 lipschitz=1.0, horizon=1.0)
        with pytest.raises(ValueError):
            bound_hmt_sup_tail(params, 5, 3, 1.0, 1.0)


class TestErrorReport:
    def test_builder_consistency(self):
        model = SyntheticModel(12, RngState(60))
        grid = uniform_grid(model.domain, 6)
        cfg = SketchConfig(rank=3, oversampling=2, seed=8)
        approxs = hmt_param_direct(model, grid, cfg)
        report = error_report(model, approxs, grid, rank=cfg.sketch_size)
        assert report.l2 == pytest.approx(l2_error(model, approxs, grid))
        assert report.sup == pytest.approx(sup_error(model, approxs, grid))
        assert report.best_l2 == pytest.approx(best_l2(model, grid, cfg.sketch_size))
        assert np.all(report.err >= report.best_err - 1e-10)

    def test_csv_format(self):
        report = ErrorReport(
            ts=np.array([0.0, 0.5]), err=np.array([0.25, 0.125]),
            best_err=np.array([0.0625, 0.03125]), rank=3,
            l2=0.2, sup=0.25, best_l2=0.05, best_sup=0.0625)
        assert report.to_csv() == (
            "t,err,best_err\n"
            "0,0.25,0.0625\n"
            "0.5,0.125,0.03125\n")

    def test_json_fields(self):
        report = ErrorReport(
            ts=np.array([0.0, 0.5]), err=np.array([0.2, 0.1]),
            best_err=np.array([0.1, 0.05]), rank=4,
            l2=0.15, sup=0.2, best_l2=0.07, best_sup=0.1)
        data = json.loads(report.to_json())
        assert data == {"rank": 4, "points": 2, "l2_error": 0.15,
                        "sup_error": 0.2, "best_l2": 0.07, "best_sup": 0.1}
