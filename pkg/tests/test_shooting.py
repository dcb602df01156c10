import numpy as np
import pytest

from action_ot import (PairwiseConfig, StandardGaussian, el_rhs,
                       integrate_ivp, path_state, shoot_bvp, solve_pairwise)
from action_ot.errors import NoConvergenceError


def test_rhs_vanishes_at_origin():
    assert el_rhs(np.zeros(2), np.array([1.0, -2.0])) == pytest.approx([0.0, 0.0])


def test_rhs_vanishes_at_rest():
    assert el_rhs(np.array([0.4, 0.9]), np.zeros(2)) == pytest.approx([0.0, 0.0])


def test_rhs_direct_substitution():
    acc = el_rhs(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    assert acc == pytest.approx([0.5, 0.0])


def test_zero_velocity_is_equilibrium():
    traj = integrate_ivp(np.array([0.3, -0.5]), np.zeros(2))
    assert np.max(np.abs(traj.ws - np.array([0.3, -0.5]))) < 1e-12


def test_self_convergence_under_tolerance_halving():
    x0 = np.array([-1.0, 0.2])
    v = np.array([2.0, 0.3])
    loose = integrate_ivp(x0, v, rtol=2e-8, atol=2e-8)
    tight = integrate_ivp(x0, v, rtol=1e-8, atol=1e-8)
    assert np.max(np.abs(loose.endpoint - tight.endpoint)) < 10 * 2e-8


def test_energy_conservation_along_trajectory():
    # L itself is conserved for an autonomous Lagrangian quadratic in the
    # velocity; here L = ||w_dot||^2 exp(||w||^2 / 2) / 2.
    x0 = np.array([-1.2, 0.3])
    traj = integrate_ivp(x0, np.array([2.3, 0.1]), rtol=1e-10, atol=1e-10)
    lvals = 0.5 * np.sum(traj.w_dots ** 2, axis=1) \
        * np.exp(0.5 * np.sum(traj.ws ** 2, axis=1))
    assert np.max(np.abs(lvals - lvals[0])) / lvals[0] < 1e-6


def test_invalid_tolerances():
    with pytest.raises(ValueError):
        integrate_ivp(np.zeros(2), np.ones(2), rtol=0.0)


def test_shoot_identical_endpoints():
    res = shoot_bvp(np.array([0.4, -0.1]), np.array([0.4, -0.1]))
    assert np.max(np.abs(res.v_star)) == 0.0
    assert res.terminal_mismatch == 0.0


def test_shoot_default_tolerance_reached():
    res = shoot_bvp(np.array([-1.2, 0.3]), np.array([1.1, 0.4]), eps=1e-8)
    assert res.terminal_mismatch <= 1e-8
    # reintegration endpoint within sqrt(2 eps) of the target
    assert np.linalg.norm(res.trajectory.endpoint - [1.1, 0.4]) \
        <= np.sqrt(2e-8)


def test_shoot_budget_exhaustion_reports_best():
    with pytest.raises(NoConvergenceError) as excinfo:
        shoot_bvp(np.array([-1.2, 0.3]), np.array([1.1, 0.4]), eps=1e-8,
                  max_evals=3)
    assert excinfo.value.best_mismatch is not None


def test_cross_validation_against_chebyshev_solver():
    x0 = np.array([-1.2, 0.3])
    x1 = np.array([1.1, 0.4])
    res = solve_pairwise(x0, x1, StandardGaussian(),
                         PairwiseConfig(alpha=1.0, lam=1e5, n_cheb=10,
                                        quad_order=50))
    shot = shoot_bvp(x0, x1, eps=1e-8)
    ts = np.linspace(0.0, 1.0, 401)
    w_cheb, _ = path_state(res.path, ts)
    w_el = shot.trajectory.sample(ts)
    assert np.max(np.linalg.norm(w_cheb - w_el, axis=1)) < 1e-2


def test_paths_bend_toward_origin():
    # equal-radius endpoints subtending a wide angle
    radius = 1.3
    for angle in (0.8, 1.6, 2.4):
        x0 = radius * np.array([np.cos(-angle / 2), np.sin(-angle / 2)])
        x1 = radius * np.array([np.cos(angle / 2), np.sin(angle / 2)])
        shot = shoot_bvp(x0, x1, eps=1e-8)
        ts = np.linspace(0.0, 1.0, 801)
        radii = np.linalg.norm(shot.trajectory.sample(ts), axis=1)
        chord = np.linalg.norm((1 - ts)[:, None] * x0 + ts[:, None] * x1, axis=1)
        assert radii.min() < chord.min()
