import math

import numpy as np
import pytest

from spinlsi.flow import (CovarianceSchedule, NonConvergenceError,
                          criterion_bound, criterion_slack_batch, lsi_bound,
                          meanfield_chi, meanfield_corollary,
                          potential_gradient, potential_hessian,
                          renormalized_potential, verify_convolution,
                          verify_criterion_matrix_inequality,
                          verify_decomposition, verify_entropy_decomposition)
from spinlsi.glauber import build_generator, estimate_inverse_lsi
from spinlsi.model import CouplingMatrix, ModelSpec, build_coupling

SOFT = CouplingMatrix(np.array([[0.8, -0.1, 0.0],
                                [-0.1, 0.8, -0.1],
                                [0.0, -0.1, 0.8]]))


def _sched(A, beta, alpha=None):
    M = A.matrix if isinstance(A, CouplingMatrix) else A
    return CovarianceSchedule(M, beta + 1.0 if alpha is None else alpha, beta)


def test_covariance_at_zero(path2):
    sched = _sched(path2, 0.9)
    alpha = sched.alpha
    assert np.allclose(sched.covariance(0.0), np.eye(2) / alpha, atol=1e-12)
    expected = (np.eye(2) - path2.matrix) / alpha ** 2
    assert np.allclose(sched.dot_covariance(0.0), expected, atol=1e-12)
    from spinlsi.model import spectral_radius
    assert spectral_radius(sched.dot_covariance(0.0)) <= 1 / alpha ** 2 + 1e-12


def test_covariance_identity_coupling_is_constant():
    sched = _sched(np.eye(3), 0.7)
    for t in (0.0, 0.3, 0.7):
        assert np.allclose(sched.covariance(t), np.eye(3) / sched.alpha, atol=1e-14)
        assert np.allclose(sched.dot_covariance(t), 0.0, atol=1e-14)
        assert np.allclose(sched.ddot_covariance(t), 0.0, atol=1e-14)


def test_covariance_eigenvalue_formula(path3):
    sched = _sched(path3, 1.2, alpha=2.0)
    a = sched.eigenvalues
    for t in (0.0, 0.5, 1.2):
        c = 1.0 / (t * a + (2.0 - t))
        assert np.allclose(np.sort(np.linalg.eigvalsh(sched.covariance(t))),
                           np.sort(c), atol=1e-12)


def test_covariance_derivatives_match_finite_differences(path3):
    sched = _sched(path3, 1.0)
    eps = 1e-5
    for t in (0.2, 0.5, 0.8):
        fd1 = (sched.covariance(t + eps) - sched.covariance(t - eps)) / (2 * eps)
        fd2 = (sched.covariance(t + eps) - 2 * sched.covariance(t)
               + sched.covariance(t - eps)) / eps ** 2
        assert np.allclose(sched.dot_covariance(t), fd1, rtol=1e-6, atol=1e-10)
        assert np.allclose(sched.ddot_covariance(t), fd2, rtol=1e-4, atol=1e-6)


def test_covariance_monotone_and_commuting(path3):
    sched = _sched(path3, 1.0)
    ts = np.linspace(0.0, 1.0, 6)
    for lo, hi in zip(ts[:-1], ts[1:]):
        diff = sched.covariance(hi) - sched.covariance(lo)
        assert np.linalg.eigvalsh(diff)[0] >= -1e-10
    mats = [sched.coupling, sched.covariance(0.4), sched.dot_covariance(0.4),
            sched.ddot_covariance(0.4)]
    for X in mats:
        for Y in mats:
            assert np.max(np.abs(X @ Y - Y @ X)) < 1e-10


def test_schedule_validation(path2):
    with pytest.raises(ValueError):
        CovarianceSchedule(path2.matrix, 0.5, 0.8)
    sched = _sched(path2, 0.8)
    with pytest.raises(ValueError):
        sched.covariance(0.9)
    with pytest.raises(ValueError):
        renormalized_potential(sched, 0.8, None, np.zeros(2))


def test_potential_single_site_value():
    sched = _sched(np.array([[0.8]]), 0.5, alpha=1.5)
    for t in (0.0, 0.3):
        cinv = float(sched.inverse_covariance(t)[0, 0])
        expected = -math.log(2 * math.exp(-0.5 * cinv))
        assert renormalized_potential(sched, t, None, np.zeros(1)) == pytest.approx(
            expected, abs=1e-12)


def test_potential_symmetry_at_zero_field(path2):
    sched = _sched(path2, 0.9)
    rng = np.random.default_rng(0)
    for _ in range(5):
        phi = rng.standard_normal(2)
        a = renormalized_potential(sched, 0.4, None, phi)
        b = renormalized_potential(sched, 0.4, None, -phi)
        assert a == pytest.approx(b, rel=1e-12)


def test_gradient_matches_finite_differences(path3):
    sched = _sched(path3, 1.0)
    rng = np.random.default_rng(1)
    for _ in range(25):
        t = float(rng.uniform(0.0, 0.95))
        h = rng.normal(0, 0.6, 3)
        phi = rng.normal(0, 1.0, 3)
        grad = potential_gradient(sched, t, h, phi)
        eps = 1e-5
        for k in range(3):
            e = np.zeros(3)
            e[k] = eps
            fd = (renormalized_potential(sched, t, h, phi + e)
                  - renormalized_potential(sched, t, h, phi - e)) / (2 * eps)
            assert grad[k] == pytest.approx(fd, rel=1e-6, abs=1e-8)


def test_hessian_matches_gradient_differences(path3):
    sched = _sched(path3, 1.0)
    rng = np.random.default_rng(2)
    for _ in range(10):
        t = float(rng.uniform(0.0, 0.95))
        h = rng.normal(0, 0.6, 3)
        phi = rng.normal(0, 1.0, 3)
        hess = potential_hessian(sched, t, h, phi)
        eps = 1e-5
        for k in range(3):
            e = np.zeros(3)
            e[k] = eps
            fd = (potential_gradient(sched, t, h, phi + e)
                  - potential_gradient(sched, t, h, phi - e)) / (2 * eps)
            assert np.allclose(hess[:, k], fd, rtol=1e-5, atol=1e-7)


def test_hessian_saturates_to_inverse_covariance(path2):
    sched = _sched(path2, 0.8)
    hess = potential_hessian(sched, 0.3, None, np.full(2, 80.0))
    assert np.allclose(hess, sched.inverse_covariance(0.3), atol=1e-8)


def test_hessian_product_measure_closed_form(path2):
    # t = 0: Sigma_0 = diag(sech^2 f), so He = alpha I - alpha^2 diag(sech^2 f)
    sched = _sched(path2, 0.8, alpha=1.6)
    h = np.array([0.4, -0.9])
    phi = np.array([0.2, 0.1])
    f = h + sched.inverse_covariance(0.0) @ phi
    hess = potential_hessian(sched, 0.0, h, phi)
    expected = 1.6 * np.eye(2) - 1.6 ** 2 * np.diag(1 / np.cosh(f) ** 2)
    assert np.allclose(hess, expected, atol=1e-12)


def test_decomposition_trivial_and_small(path2):
    sched = _sched(path2, 0.8)
    check = verify_decomposition(sched, 0.3, None, np.ones(4),
                                 convolution_samples=0)
    assert check.residual < 1e-12
    check = verify_decomposition(sched, 0.3, [0.2, -0.4],
                                 lambda S: S[:, 0] * S[:, 1], order=44)
    assert check.residual < 1e-7
    assert check.convolution_residual < 1e-7


def test_decomposition_single_site_subunit_norm():
    sched = _sched(np.array([[0.8]]), 0.6)
    check = verify_decomposition(sched, 0.2, [0.3], lambda S: S[:, 0], order=44)
    assert check.residual < 1e-8


def test_decomposition_full_3d_quadrature():
    sched = _sched(SOFT, 0.7)
    check = verify_decomposition(sched, 0.25, [0.1, -0.2, 0.3],
                                 lambda S: np.exp(0.5 * S[:, 0]) + S[:, 1] * S[:, 2],
                                 order=40, convolution_samples=20)
    assert check.residual < 1e-7
    assert check.convolution_residual < 1e-7


def test_decomposition_monte_carlo_fallback():
    spec = ModelSpec("path", {"length": 4})
    A = build_coupling(spec)
    sched = _sched(A, 0.5)
    rng = np.random.default_rng(0)
    F = rng.random(16) + 0.2
    with pytest.raises(ValueError):
        verify_decomposition(sched, 0.2, None, F)
    check = verify_decomposition(sched, 0.2, None, F, mc_samples=4000, seed=3)
    assert not check.certified
    assert check.mc_std_error is not None
    assert check.residual < 6 * max(check.mc_std_error, 1e-4)


def test_convolution_identity(path3):
    sched = _sched(path3, 1.0)
    assert verify_convolution(sched, samples=100, seed=0, order=40) < 1e-7


def test_entropy_decomposition_cases(path2):
    sched = _sched(path2, 0.8)
    assert verify_entropy_decomposition(sched, None, np.full(4, 2.0)).residual < 1e-10
    rng = np.random.default_rng(5)
    check = verify_entropy_decomposition(sched, [0.1, -0.2], rng.random(4) + 0.1,
                                         order=44)
    assert check.residual < 1e-7
    check = verify_entropy_decomposition(
        sched, None, lambda S: np.exp(S[:, 0]), order=44)
    assert check.residual < 1e-7


def test_entropy_decomposition_single_site():
    sched = _sched(np.array([[0.8]]), 0.6)
    rng = np.random.default_rng(6)
    check = verify_entropy_decomposition(sched, [0.2], rng.random(2) + 0.1)
    assert check.residual < 1e-7


def test_quadrature_nonconvergence_raises(path2):
    sched = _sched(path2, 0.8)
    with pytest.raises(NonConvergenceError):
        verify_decomposition(sched, 0.3, [1.0, -2.0], lambda S: S[:, 0],
                             order=2, order_step=2, quad_tol=1e-12,
                             convolution_samples=0)


def test_criterion_slack_nonnegative(path3, cycle3):
    for A in (path3, cycle3, SOFT):
        sched = _sched(A, 1.0)
        rng = np.random.default_rng(7)
        for _ in range(5):
            t = float(rng.uniform(0.05, 0.95))
            h = rng.normal(0, 0.8, sched.n)
            phi = rng.normal(0, 1.0, sched.n)
            assert verify_criterion_matrix_inequality(sched, t, h, phi) >= -1e-9


def test_criterion_slack_identity_coupling_is_zero():
    sched = _sched(np.eye(2), 0.6)
    assert verify_criterion_matrix_inequality(sched, 0.3) == pytest.approx(0.0,
                                                                           abs=1e-14)


def test_criterion_batch_matches_single(path3):
    sched = _sched(path3, 1.0)
    rng = np.random.default_rng(8)
    hs = rng.normal(0, 0.5, (6, 3))
    phis = rng.normal(0, 0.8, (6, 3))
    batch = criterion_slack_batch(sched, 0.45, hs, phis)
    for k in range(6):
        single = verify_criterion_matrix_inequality(sched, 0.45, hs[k], phis[k])
        assert batch[k] == pytest.approx(single, abs=1e-11)


def test_bound_at_zero_temperature(path2):
    rep = lsi_bound(path2, 0.0)
    assert rep.bound_lower == 0.5 and rep.bound_upper == 0.5
    assert rep.bound_value == 0.5 and rep.coarse_bound == 0.5
    assert rep.criterion_value == 0.0


def test_bound_constant_chi_closed_form():
    for c in (0.5, 1.0, 3.0):
        beta = 0.8
        rep = lsi_bound(None, beta, grid=256, tol=1e-8,
                        chi_fn=lambda ts, c=c: np.full_like(np.asarray(ts), c))
        closed = 0.5 + (math.exp(2 * c * beta) - 1) / (2 * c)
        assert rep.bound_lower <= closed <= rep.bound_upper
        assert rep.bound_value == pytest.approx(closed, abs=1e-8)


def test_bound_brackets_nest_under_refinement(path2):
    beta = 0.9
    coarse = lsi_bound(path2, beta, grid=16, tol=0.0, max_grid=16)
    finer = lsi_bound(path2, beta, grid=64, tol=0.0, max_grid=64)
    assert coarse.bound_lower <= finer.bound_lower <= finer.bound_upper
    assert finer.bound_upper <= coarse.bound_upper
    assert "enclosure_tolerance_unreached" in coarse.flags


def test_bound_dominates_coarse_and_optimizer(battery):
    for label, A in battery:
        if A.n > 5:
            continue
        rep = lsi_bound(A, 0.6, grid=128, tol=1e-3)
        assert rep.bound_upper <= rep.coarse_bound + 1e-9, label
        assert rep.bound_lower <= rep.bound_value <= rep.bound_upper, label


def test_bound_dominates_candidate_ratios_medium_model():
    # a larger exact model: path of 8 sites
    A = build_coupling(ModelSpec("path", {"length": 8}))
    beta = 0.5
    rep = lsi_bound(A, beta, grid=128, tol=1e-3)
    gen = build_generator(A, beta, np.linspace(-0.3, 0.4, 8))
    est = estimate_inverse_lsi(gen, restarts=2, iters=150, seed=0)
    assert est.ratio <= rep.bound_upper + 1e-8


def test_criterion_bound_assembly(path2):
    beta = 0.7
    rep = lsi_bound(path2, beta, grid=64, tol=1e-3)
    sched = _sched(path2, beta, alpha=rep.alpha)
    value = criterion_bound(sched, rep.t_grid, rep.chi_values)
    assert value == pytest.approx(rep.criterion_value, rel=1e-12)
    assert 0.5 + rep.alpha ** 2 * value == pytest.approx(rep.bound_value, rel=1e-12)
    # beta = 0 empties the integral
    rep0 = lsi_bound(path2, 0.0)
    assert rep0.criterion_value == 0.0


def test_criterion_bound_constant_chi_closed_form():
    beta, c, alpha = 0.8, 2.0, 1.5
    rep = lsi_bound(None, beta, grid=512, tol=1e-8, alpha=alpha,
                    chi_fn=lambda ts: np.full_like(np.asarray(ts), c))
    closed = (math.exp(2 * c * beta) - 1) / (2 * c) / alpha ** 2
    assert rep.criterion_value == pytest.approx(closed, abs=1e-8)


def test_bound_report_serializes(path2):
    rep = lsi_bound(path2, 0.4, grid=32, tol=1e-3)
    d = rep.to_dict()
    assert isinstance(d["chi_values"], list)
    assert d["bound_lower"] <= d["bound_upper"]
    assert d["criterion_intermediate"]["value"] >= 0.0


def test_meanfield_corollary_values():
    assert meanfield_corollary(1.0, 1.0, 0.0) == pytest.approx(0.5)
    assert meanfield_corollary(1.0, 1.0, 0.5) == pytest.approx(1.5)
    with pytest.raises(ValueError):
        meanfield_corollary(0.5, 1.0, 0.5)
    with pytest.raises(ValueError):
        meanfield_corollary(1.0, 1.0, 1.0)
    # finite-volume form at beta_c
    val = meanfield_corollary(1.0, 1.0, None, L=4.0)
    assert val == pytest.approx(0.5 + (1.0 + 1 / 16) * ((16 + 1) - 1), rel=1e-12)


def test_meanfield_quadrature_matches_closed_form():
    D, beta_c = 1.0, 1.0
    beta = 0.5
    rep = lsi_bound(None, beta, grid=1024, tol=1e-9,
                    chi_fn=meanfield_chi(D, beta_c), max_grid=1 << 17)
    closed = meanfield_corollary(D, beta_c, beta)
    assert rep.bound_value == pytest.approx(closed, abs=1e-6)
