"""Range-projection sketching: exactness, determinism, affine offline/online
equivalence, the structural error bounds, and a small Monte Carlo check of
the expected-error bound."""

import numpy as np
import pytest

from parasketch.errors import PreconditionError
from parasketch.hmt import (
    SketchConfig,
    draw_omega,
    hmt_apply,
    hmt_discontinuity_case,
    hmt_fixed,
    hmt_offline,
    hmt_online,
    hmt_param_direct,
    perturbed_bound_gap,
    structural_bound_gap,
)
from parasketch.linalg import RngState, gaussian_matrix, svd, tail_energy
from parasketch.models import AffineModel, ParamDomain, uniform_grid


def low_rank(rng, m, n, rank, decay=None):
    u = np.linalg.qr(rng.standard_normal((m, rank)))[0]
    v = np.linalg.qr(rng.standard_normal((n, rank)))[0]
    s = np.ones(rank) if decay is None else decay
    return (u * s) @ v.T


def random_affine(seed, m=40, n=30, k=3):
    mats = [gaussian_matrix(RngState(seed, i), m, n) for i in range(k)]
    phis = [lambda t: 1.0, lambda t: t, lambda t: np.exp(-t)][:k]
    return AffineModel(phis, mats, ParamDomain.interval(0.0, 1.0))


class TestSketchConfig:
    def test_fields(self):
        cfg = SketchConfig(rank=5, oversampling=3, seed=11, stream=2)
        assert cfg.sketch_size == 8
        assert cfg.rng == RngState(11, 2)

    def test_validation(self):
        with pytest.raises(ValueError):
            SketchConfig(rank=1, oversampling=5, seed=0)
        with pytest.raises(ValueError):
            SketchConfig(rank=5, oversampling=1, seed=0)


def test_draw_omega_deterministic_and_nested():
    cfg = SketchConfig(rank=4, oversampling=2, seed=7)
    a = draw_omega(cfg, 15)
    assert a.shape == (15, 6)
    assert np.array_equal(a, draw_omega(cfg, 15))
    wider = draw_omega(SketchConfig(rank=6, oversampling=4, seed=7), 15)
    assert np.array_equal(a, wider[:, :6])


def test_exact_rank_recovery():
    rng = np.random.default_rng(14)
    for seed in range(5):
        b = low_rank(rng, 30, 25, 6)
        approx = hmt_fixed(b, SketchConfig(rank=6, oversampling=2, seed=seed))
        assert approx.error_fro(b) <= 1e-12 * np.linalg.norm(b)
        assert approx.orthonormal_q


def test_zero_matrix():
    approx = hmt_fixed(np.zeros((10, 8)), SketchConfig(rank=2, oversampling=2, seed=0))
    assert approx.error_fro(np.zeros((10, 8))) == 0.0


def test_deterministic():
    b = gaussian_matrix(RngState(3), 20, 15)
    cfg = SketchConfig(rank=4, oversampling=3, seed=9)
    a1 = hmt_fixed(b, cfg).reconstruct()
    a2 = hmt_fixed(b, cfg).reconstruct()
    assert np.array_equal(a1, a2)


def test_sketch_too_large():
    with pytest.raises(ValueError, match="sketch size"):
        hmt_fixed(np.ones((6, 5)), SketchConfig(rank=4, oversampling=2, seed=0))


def test_projector_properties():
    b = gaussian_matrix(RngState(5), 25, 18)
    approx = hmt_fixed(b, SketchConfig(rank=5, oversampling=3, seed=1))
    q = approx.q_t
    assert np.linalg.norm(q.T @ q - np.eye(q.shape[1])) <= 1e-12
    # projecting twice changes nothing
    once = approx.reconstruct()
    again = q @ (q.T @ once)
    assert np.linalg.norm(again - once) <= 1e-12 * np.linalg.norm(once)


def test_error_never_beats_optimal():
    rng = np.random.default_rng(44)
    for seed in range(10):
        b = rng.standard_normal((30, 22))
        cfg = SketchConfig(rank=5, oversampling=3, seed=seed)
        err = hmt_fixed(b, cfg).error_fro(b)
        best = np.sqrt(tail_energy(svd(b).sigma, cfg.sketch_size))
        assert err >= best - 1e-10


def test_error_shrinks_with_sketch_size():
    # same seed, wider sketch: the projector acts on a superset of columns,
    # so the error cannot grow (up to roundoff)
    b = gaussian_matrix(RngState(21), 40, 30)
    errs = [hmt_fixed(b, SketchConfig(rank=r, oversampling=2, seed=6)).error_fro(b)
            for r in (2, 5, 9, 14)]
    for a, b_ in zip(errs, errs[1:]):
        assert b_ <= a + 1e-12


def test_expected_error_bound_monte_carlo():
    # mean squared error over 500 draws against (1 + r/(p-1)) * tail
    rng = np.random.default_rng(60)
    b = rng.standard_normal((60, 40))
    r, p = 10, 5
    sq = []
    for seed in range(500):
        err = hmt_fixed(b, SketchConfig(rank=r, oversampling=p, seed=seed)).error_fro(b)
        sq.append(err ** 2)
    sq = np.array(sq)
    bound = (1.0 + r / (p - 1.0)) * tail_energy(svd(b).sigma, r)
    mean = float(np.mean(sq))
    stderr = float(np.std(sq, ddof=1)) / np.sqrt(len(sq))
    assert mean <= bound + 3.0 * stderr, f"mean {mean} vs bound {bound}"


def test_param_direct_matches_pointwise():
    model = random_affine(31)
    grid = uniform_grid(model.domain, 6)
    cfg = SketchConfig(rank=4, oversampling=3, seed=2)
    outs = hmt_param_direct(model, grid, cfg)
    omega = draw_omega(cfg, model.shape[1])
    for t, approx in zip(grid, outs):
        ref = hmt_apply(model.eval(t), omega)
        assert np.array_equal(approx.reconstruct(), ref.reconstruct())


def test_param_direct_snapshot_mismatch():
    model = random_affine(31)
    grid = uniform_grid(model.domain, 6)
    cfg = SketchConfig(rank=4, oversampling=3, seed=2)
    with pytest.raises(ValueError, match="snapshot count"):
        hmt_param_direct(model, grid, cfg, snapshots=[model.eval(0.0)])


class TestAffineOfflineOnline:
    def test_matches_direct(self):
        model = random_affine(77, m=60, n=45, k=3)
        grid = uniform_grid(model.domain, 9)
        cfg = SketchConfig(rank=5, oversampling=4, seed=13)
        data = hmt_offline(model, cfg)
        assert data.k == 3
        phis = np.array([model.phi_values(t) for t in grid])
        online = hmt_online(data, phis, grid)
        direct = hmt_param_direct(model, grid, cfg)
        for o, d in zip(online, direct):
            ref = d.reconstruct()
            assert np.linalg.norm(o.reconstruct() - ref) <= 1e-9 * np.linalg.norm(ref)

    def test_online_q_orthonormal(self):
        model = random_affine(78, m=50, n=35, k=2)
        grid = uniform_grid(model.domain, 4)
        cfg = SketchConfig(rank=4, oversampling=2, seed=3)
        data = hmt_offline(model, cfg)
        phis = np.array([model.phi_values(t) for t in grid])
        for approx in hmt_online(data, phis, grid):
            qtq = approx.q_t.T @ approx.q_t
            assert np.linalg.norm(qtq - np.eye(qtq.shape[0])) <= 1e-12

    def test_offline_rejects_wide_stack(self):
        model = random_affine(79, m=20, n=18, k=3)
        with pytest.raises(ValueError, match="stacked sketch"):
            hmt_offline(model, SketchConfig(rank=5, oversampling=2, seed=0))

    def test_online_rejects_bad_phis(self):
        model = random_affine(80, m=50, n=40, k=2)
        grid = uniform_grid(model.domain, 3)
        data = hmt_offline(model, SketchConfig(rank=4, oversampling=2, seed=0))
        with pytest.raises(ValueError, match="shape"):
            hmt_online(data, np.ones((3, 5)), grid)
        with pytest.raises(ValueError, match="finite"):
            hmt_online(data, np.full((3, 2), np.nan), grid)


class TestStructuralBound:
    def test_holds_on_random_instances(self):
        rng = np.random.default_rng(90)
        for trial in range(100):
            m = int(rng.integers(8, 40))
            n = int(rng.integers(8, 40))
            b = rng.standard_normal((m, n))
            r = int(rng.integers(1, min(m, n) // 2 + 1))
            s = min(r + int(rng.integers(2, 6)), min(m, n))
            omega = rng.standard_normal((n, s))
            lhs, rhs = structural_bound_gap(b, omega, r)
            assert lhs <= rhs * (1.0 + 1e-10), f"trial {trial}: {lhs} > {rhs}"

    def test_tight_when_omega_is_v1(self):
        # Omega = V1 makes the cross term vanish and the bound an equality
        rng = np.random.default_rng(91)
        b = rng.standard_normal((20, 15))
        r = 4
        f = svd(b)
        omega = f.v[:, :r]
        lhs, rhs = structural_bound_gap(b, omega, r)
        tail = tail_energy(f.sigma, r)
        assert rhs == pytest.approx(tail, rel=1e-12)
        assert lhs == pytest.approx(rhs, rel=1e-9)

    def test_rank_deficient_coefficient_raises(self):
        rng = np.random.default_rng(92)
        b = rng.standard_normal((20, 15))
        # rank(Omega) = 2 < r forces V1^T Omega to be row rank deficient
        omega = rng.standard_normal((15, 2)) @ rng.standard_normal((2, 6))
        with pytest.raises(PreconditionError):
            structural_bound_gap(b, omega, 4)

    def test_input_validation(self):
        b = np.eye(5)
        with pytest.raises(ValueError):
            structural_bound_gap(b, np.ones((4, 3)), 2)
        with pytest.raises(ValueError):
            structural_bound_gap(b, np.ones((5, 3)), 0)
        with pytest.raises(ValueError):
            structural_bound_gap(b, np.ones((5, 3)), 5)
        with pytest.raises(ValueError):
            structural_bound_gap(b, np.ones((5, 3)), 4)


class TestPerturbedBound:
    def test_holds_on_random_instances(self):
        rng = np.random.default_rng(95)
        for trial in range(100):
            m = int(rng.integers(8, 30))
            n = int(rng.integers(8, 30))
            b = rng.standard_normal((m, n))
            e = rng.standard_normal((m, n)) * 10.0 ** rng.integers(-8, 1)
            r = int(rng.integers(1, min(m, n) // 2 + 1))
            s = min(r + int(rng.integers(2, 6)), min(m, n))
            omega = rng.standard_normal((n, s))
            lhs, rhs = perturbed_bound_gap(b, e, omega, r)
            assert lhs <= rhs * (1.0 + 1e-10), f"trial {trial}: {lhs} > {rhs}"

    def test_zero_perturbation_matches_structural(self):
        rng = np.random.default_rng(96)
        b = rng.standard_normal((18, 14))
        omega = rng.standard_normal((14, 7))
        lhs_p, rhs_p = perturbed_bound_gap(b, np.zeros_like(b), omega, 4)
        lhs_s, rhs_s = structural_bound_gap(b, omega, 4)
        assert lhs_p == pytest.approx(np.sqrt(lhs_s), rel=1e-12)
        assert rhs_p == pytest.approx(np.sqrt(rhs_s), rel=1e-12)

    def test_cancelling_perturbation(self):
        # E = -B zeroes the sketch, so the projector is empty and the error
        # is all of B; the rhs keeps ||E||_F = ||B||_F so the bound holds
        rng = np.random.default_rng(97)
        b = rng.standard_normal((12, 10))
        omega = rng.standard_normal((10, 5))
        lhs, rhs = perturbed_bound_gap(b, -b, omega, 3)
        assert lhs == pytest.approx(np.linalg.norm(b), rel=1e-12)
        assert lhs <= rhs * (1.0 + 1e-10)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="perturbation"):
            perturbed_bound_gap(np.eye(5), np.eye(4), np.ones((5, 3)), 2)


def test_discontinuity_case():
    out = hmt_discontinuity_case()
    assert set(out) == {-1.0, -0.5, 0.0, 0.5, 1.0}
    assert out[0.0] == pytest.approx(1.0, abs=1e-12)
    for t in (-1.0, -0.5, 0.5, 1.0):
        assert out[t] == pytest.approx(0.0, abs=1e-12)
