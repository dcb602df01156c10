import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from action_ot import (ChebyshevPath, basis_derivative, basis_value,
                       build_cache, gauss_legendre, path_state)
from action_ot.chebyshev import basis_matrices


def test_endpoint_vanishing():
    for k in range(2, 21):
        assert abs(basis_value(k, 0.0)) < 1e-12
        assert abs(basis_value(k, 1.0)) < 1e-12


def test_mode_two_midpoint_value():
    # T_2(0) = -1 and the linear tail removes another 1.
    assert basis_value(2, 0.5) == pytest.approx(-2.0, abs=1e-15)


def test_derivative_endpoint_closed_forms():
    for k in range(2, 21):
        sign = (-1.0) ** k
        assert basis_derivative(k, 1.0) == pytest.approx(
            2.0 * k * k + sign - 1.0, abs=1e-10)
        assert basis_derivative(k, 0.0) == pytest.approx(
            2.0 * k * k * (-sign) + sign - 1.0, abs=1e-10)


def test_derivative_matches_finite_difference():
    rng = np.random.default_rng(0)
    h = 1e-5
    for t in rng.uniform(h, 1.0 - h, size=20):
        fd = (basis_value(3, t + h) - basis_value(3, t - h)) / (2.0 * h)
        assert basis_derivative(3, t) == pytest.approx(fd, abs=1e-6)


def test_invalid_mode_index():
    with pytest.raises(ValueError):
        basis_value(1, 0.5)
    with pytest.raises(ValueError):
        basis_derivative(0, 0.5)


def test_path_state_pure_linear_interpolant():
    path = ChebyshevPath.straight([0.0, 1.0], [2.0, -1.0], 6)
    for t in (0.0, 0.3, 0.77, 1.0):
        w, w_dot = path_state(path, t)
        assert w == pytest.approx((1 - t) * path.w0 + t * path.w1)
        assert w_dot == pytest.approx(path.w1 - path.w0)


@settings(max_examples=40, deadline=None)
@given(scale=st.floats(min_value=1.0, max_value=1e3),
       seed=st.integers(min_value=0, max_value=2**31))
def test_endpoints_exact_for_large_coefficients(scale, seed):
    rng = np.random.default_rng(seed)
    path = ChebyshevPath(w0=rng.standard_normal(2), w1=rng.standard_normal(2),
                         coeffs=scale * rng.standard_normal((7, 2)))
    w0, _ = path_state(path, 0.0)
    w1, _ = path_state(path, 1.0)
    assert np.max(np.abs(w0 - path.w0)) <= 1e-12 * scale
    assert np.max(np.abs(w1 - path.w1)) <= 1e-12 * scale


def test_velocity_matches_finite_difference():
    rng = np.random.default_rng(1)
    path = ChebyshevPath(w0=rng.standard_normal(2), w1=rng.standard_normal(2),
                         coeffs=rng.standard_normal((9, 2)))
    h = 1e-6
    for t in rng.uniform(h, 1 - h, size=20):
        wp, _ = path_state(path, t + h)
        wm, _ = path_state(path, t - h)
        _, w_dot = path_state(path, t)
        assert np.max(np.abs(w_dot - (wp - wm) / (2 * h))) < 1e-6


def test_cache_smallest_case():
    cache = build_cache(2, gauss_legendre(1, 0.0, 1.0))
    assert cache.phi.shape == (1, 1)
    assert cache.phi[0, 0] == pytest.approx(-2.0)


def test_cache_paper_scale_shapes(cache10):
    assert cache10.phi.shape == (9, 50)
    assert cache10.dphi.shape == (9, 50)


def test_cache_matches_direct_evaluation(cache10):
    for k in range(2, 11):
        for r in (0, 17, 49):
            t = cache10.rule.nodes[r]
            assert cache10.phi[k - 2, r] == basis_value(k, t)
            assert cache10.dphi[k - 2, r] == basis_derivative(k, t)


def test_basis_matrices_cover_all_modes():
    t = np.linspace(0.0, 1.0, 13)
    phi, dphi = basis_matrices(6, t)
    for k in range(2, 7):
        assert phi[k - 2] == pytest.approx(np.asarray(basis_value(k, t)))
        assert dphi[k - 2] == pytest.approx(np.asarray(basis_derivative(k, t)))


def test_json_round_trip():
    rng = np.random.default_rng(2)
    path = ChebyshevPath(w0=rng.standard_normal(2), w1=rng.standard_normal(2),
                         coeffs=rng.standard_normal((4, 2)))
    clone = ChebyshevPath.from_json(path.to_json())
    assert np.array_equal(clone.w0, path.w0)
    assert np.array_equal(clone.w1, path.w1)
    assert np.array_equal(clone.coeffs, path.coeffs)


def test_cache_requires_unit_interval():
    with pytest.raises(ValueError):
        build_cache(5, gauss_legendre(10, 0.0, 2.0))
