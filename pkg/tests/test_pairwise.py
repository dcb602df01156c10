import numpy as np
import pytest

from action_ot import (ChebyshevPath, ConstantDensity, PairwiseConfig,
                       StandardGaussian, action_endpoint_grads,
                       action_grad_coeffs, build_cache, discrete_action,
                       endpoint_momentum, gauss_legendre,
                       lagrangian_node_values, solve_pairwise)
from action_ot.errors import NumericalRangeError, OptimizationFailure

from conftest import central_diff, rel_err


def test_straight_line_constant_density(cache10):
    path = ChebyshevPath.straight([0.0, 0.0], [1.0, 1.0], 10)
    for alpha in (0.0, 0.7, 2.0):
        assert discrete_action(path, ConstantDensity(1.0), alpha, cache10) \
            == pytest.approx(1.0, abs=1e-12)


def test_alpha_zero_equals_constant_density(cache10):
    rng = np.random.default_rng(0)
    path = ChebyshevPath(rng.standard_normal(2), rng.standard_normal(2),
                         0.5 * rng.standard_normal((9, 2)))
    gauss = StandardGaussian()
    flat = ConstantDensity(1.0)
    assert discrete_action(path, gauss, 0.0, cache10) \
        == discrete_action(path, flat, 0.0, cache10)
    ga = action_grad_coeffs(path, gauss, 0.0, cache10)
    gf = action_grad_coeffs(path, flat, 0.0, cache10)
    np.testing.assert_array_equal(ga, gf)


def test_action_against_dense_trapezoid_oracle(cache10):
    path = ChebyshevPath.straight([0.0, 0.0], [1.0, 0.0], 10)
    value = discrete_action(path, StandardGaussian(), 1.0, cache10)
    ts = np.linspace(0.0, 1.0, 100001)
    w = np.outer(ts, [1.0, 0.0])
    integrand = 0.5 * np.exp(0.5 * np.sum(w * w, axis=1))
    oracle = np.trapezoid(integrand, ts)
    assert rel_err(value, oracle) < 1e-8


def test_straight_line_coefficient_gradient_vanishes_flat(cache10):
    # Under a constant density the chord is optimal: each mode's gradient is
    # (w1 - w0) integral of phi_k' = 0, exact at this quadrature order.
    path = ChebyshevPath.straight([-0.4, 0.2], [1.3, 0.9], 10)
    grads = action_grad_coeffs(path, ConstantDensity(1.0), 1.0, cache10)
    assert np.max(np.abs(grads)) < 1e-12


def test_coefficient_gradient_finite_difference(cache10):
    rng = np.random.default_rng(1)
    model = StandardGaussian()
    path = ChebyshevPath(np.array([-1.2, 0.3]), np.array([1.1, 0.4]),
                         0.3 * rng.standard_normal((9, 2)))
    grads = action_grad_coeffs(path, model, 1.0, cache10)

    def f(coeffs):
        return discrete_action(ChebyshevPath(path.w0, path.w1, coeffs),
                               model, 1.0, cache10)

    assert rel_err(grads, central_diff(f, path.coeffs)) < 1e-5


def test_endpoint_gradients_finite_difference(cache10):
    rng = np.random.default_rng(2)
    model = StandardGaussian()
    for n_cheb in (4, 10):
        cache = build_cache(n_cheb, cache10.rule)
        for _ in range(10):
            path = ChebyshevPath(rng.standard_normal(2), rng.standard_normal(2),
                                 0.3 * rng.standard_normal((n_cheb - 1, 2)))
            g0, g1 = action_endpoint_grads(path, model, 1.0, cache)
            fd0 = central_diff(
                lambda w: discrete_action(
                    ChebyshevPath(w, path.w1, path.coeffs), model, 1.0, cache),
                path.w0)
            fd1 = central_diff(
                lambda w: discrete_action(
                    ChebyshevPath(path.w0, w, path.coeffs), model, 1.0, cache),
                path.w1)
            assert rel_err(g0, fd0) < 1e-5
            assert rel_err(g1, fd1) < 1e-5


def test_momentum_straight_line_constant():
    path = ChebyshevPath.straight([0.5, -0.2], [1.5, 1.8], 8)
    m0, m1 = endpoint_momentum(path, ConstantDensity(1.0), 1.0)
    assert m0 == pytest.approx(path.w1 - path.w0)
    assert m1 == pytest.approx(path.w1 - path.w0)


def test_momentum_density_weight_at_radius_two():
    rng = np.random.default_rng(3)
    path = ChebyshevPath(np.array([0.3, 0.1]), np.array([2.0, 0.0]),
                         0.2 * rng.standard_normal((7, 2)))
    _, m1 = endpoint_momentum(path, StandardGaussian(), 1.0)
    _, v1 = path.endpoint_velocities()
    assert np.linalg.norm(m1) == pytest.approx(
        np.exp(2.0) * np.linalg.norm(v1), rel=1e-10)


def test_momentum_matches_reoptimization_gradient():
    # Finite difference of the *converged* action in the target endpoint.
    model = StandardGaussian()
    cfg = PairwiseConfig(alpha=1.0, lam=1e6, n_cheb=8, quad_order=40,
                         grad_tol=1e-9)
    x0 = np.array([-0.9, 0.2])
    x1 = np.array([0.8, 0.5])
    res = solve_pairwise(x0, x1, model, cfg)
    _, m1 = endpoint_momentum(res.path, model, 1.0)
    h = 1e-4
    fd = np.zeros(2)
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        sp = solve_pairwise(x0, x1 + e, model, cfg).action
        sm = solve_pairwise(x0, x1 - e, model, cfg).action
        fd[i] = (sp - sm) / (2 * h)
    assert rel_err(m1, fd) < 1e-3


def test_solve_flat_geometry():
    cfg = PairwiseConfig(alpha=1.0, lam=1e7, n_cheb=10, quad_order=50)
    res = solve_pairwise(np.array([0.0, 0.0]), np.array([1.0, 1.0]),
                         ConstantDensity(1.0), cfg)
    assert res.action == pytest.approx(1.0, rel=1e-6)
    assert np.max(np.abs(res.path.coeffs)) < 1e-6
    # endpoints deviate from targets by at most ||grad S|| / (2 lambda)
    m0, m1 = endpoint_momentum(res.path, ConstantDensity(1.0), 1.0)
    bound = max(np.linalg.norm(m0), np.linalg.norm(m1)) / (2 * cfg.lam) + 1e-9
    assert np.linalg.norm(res.path.w0 - [0.0, 0.0]) <= bound
    assert np.linalg.norm(res.path.w1 - [1.0, 1.0]) <= bound


def test_solve_monotone_objective_trace():
    cfg = PairwiseConfig(alpha=1.0, lam=1e5)
    res = solve_pairwise(np.array([-1.2, 0.3]), np.array([1.1, 0.4]),
                         StandardGaussian(), cfg)
    assert np.all(np.diff(res.objective_trace) <= 0.0)


def test_solve_symmetry_under_time_reversal():
    cfg = PairwiseConfig(alpha=1.0, lam=1e5)
    model = StandardGaussian()
    a = solve_pairwise(np.array([-1.2, 0.3]), np.array([1.1, 0.4]), model, cfg)
    b = solve_pairwise(np.array([1.1, 0.4]), np.array([-1.2, 0.3]), model, cfg)
    assert a.action == pytest.approx(b.action, rel=1e-4)


def test_energy_conservation_along_converged_path(cache10):
    cfg = PairwiseConfig(alpha=1.0, lam=1e5)
    model = StandardGaussian()
    res = solve_pairwise(np.array([-1.2, 0.3]), np.array([1.1, 0.4]), model, cfg)
    lvals = lagrangian_node_values(res.path, model, 1.0, cache10)
    assert np.std(lvals) / np.mean(lvals) < 1e-2


def test_density_scale_invariance_of_minimizer():
    # Multiplying rho by gamma rescales the action part by gamma^{-alpha}.
    # Rescaling lambda by the same factor (and the step by its inverse)
    # makes the two objectives exact multiples, so converged paths agree.
    model = ConstantDensity(1.0)
    x0 = np.array([-0.8, 0.1])
    x1 = np.array([0.9, 0.6])
    base_cfg = PairwiseConfig(alpha=1.0, lam=1e5, eta=0.1, n_cheb=8,
                              quad_order=40)
    base = solve_pairwise(x0, x1, StandardGaussian(), base_cfg)
    for gamma in (0.1, 10.0):
        scaled_model = _ScaledDensity(StandardGaussian(), gamma)
        cfg = PairwiseConfig(alpha=1.0, lam=1e5 * gamma ** -1.0,
                             eta=0.1 * gamma ** 1.0, n_cheb=8, quad_order=40)
        res = solve_pairwise(x0, x1, scaled_model, cfg)
        assert res.action * gamma ** 1.0 == pytest.approx(base.action, rel=1e-6)
        ts = np.linspace(0, 1, 101)
        from action_ot import path_state
        wa, _ = path_state(base.path, ts)
        wb, _ = path_state(res.path, ts)
        assert np.max(np.abs(wa - wb)) < 1e-6


class _ScaledDensity(StandardGaussian):
    def __init__(self, base, gamma):
        super().__init__(dim=base.dim)
        self._log_gamma = np.log(gamma)

    def log_density(self, w):
        return super().log_density(w) + self._log_gamma

    def log_and_grad(self, w):
        log_rho, grad = super().log_and_grad(w)
        return log_rho + self._log_gamma, grad


def test_alpha_zero_limit_gives_straight_paths():
    cfg = PairwiseConfig(alpha=0.0, lam=1e5)
    res = solve_pairwise(np.array([-1.2, 0.3]), np.array([1.1, 0.4]),
                         StandardGaussian(), cfg)
    assert np.max(np.abs(res.path.coeffs)) < 1e-6


def test_degenerate_identical_endpoints():
    cfg = PairwiseConfig()
    res = solve_pairwise(np.array([0.7, -0.3]), np.array([0.7, -0.3]),
                         StandardGaussian(), cfg)
    assert res.action == 0.0
    assert res.iterations == 0


def test_result_action_is_recomputable(cache10):
    cfg = PairwiseConfig(alpha=1.0, lam=1e5)
    model = StandardGaussian()
    res = solve_pairwise(np.array([-1.2, 0.3]), np.array([1.1, 0.4]), model, cfg)
    assert res.action == pytest.approx(
        discrete_action(res.path, model, 1.0, cache10), abs=1e-12)


def test_numerical_range_error_names_node(cache10):
    # rho^{-1} = exp(||w||^2 / 2) overflows past ||w|| ~ 38
    path = ChebyshevPath.straight([0.0, 0.0], [60.0, 0.0], 10)
    with pytest.raises(NumericalRangeError, match="node"):
        discrete_action(path, StandardGaussian(), 1.0, cache10)


def test_fixed_step_divergence_raises_with_snapshot():
    cfg = PairwiseConfig(alpha=1.0, lam=1e5, eta=10.0, backtracking=False,
                         max_iters=50)
    with pytest.raises(OptimizationFailure) as excinfo:
        solve_pairwise(np.array([-1.2, 0.3]), np.array([1.1, 0.4]),
                       StandardGaussian(), cfg)
    assert excinfo.value.snapshot


def test_config_validation():
    with pytest.raises(ValueError):
        PairwiseConfig(lam=-1.0).validate()
    with pytest.raises(ValueError):
        PairwiseConfig(n_cheb=1).validate()
    with pytest.raises(ValueError):
        PairwiseConfig(alpha=-0.1).validate()
