import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from action_ot import gauss_legendre


def test_midpoint_rule_is_forced():
    rule = gauss_legendre(1, 0.0, 1.0)
    assert rule.nodes == pytest.approx([0.5])
    assert rule.weights == pytest.approx([1.0])


def test_two_point_rule_nodes_and_weights():
    rule = gauss_legendre(2, 0.0, 1.0)
    offset = 1.0 / (2.0 * np.sqrt(3.0))
    assert rule.nodes == pytest.approx([0.5 - offset, 0.5 + offset], abs=1e-15)
    assert rule.weights == pytest.approx([0.5, 0.5], abs=1e-15)


def test_two_point_rule_integrates_cubic():
    rule = gauss_legendre(2, 0.0, 1.0)
    assert rule.integrate(rule.nodes ** 3) == pytest.approx(0.25, abs=1e-14)


@pytest.mark.parametrize("m", [1, 2, 3, 5, 8, 13, 21, 30])
def test_polynomial_exactness(m):
    rule = gauss_legendre(m, 0.0, 1.0)
    for p in range(2 * m):
        exact = 1.0 / (p + 1)
        value = rule.integrate(rule.nodes ** p)
        assert abs(value - exact) / exact < 1e-12


def test_exactness_on_shifted_interval():
    a, b = -1.0, 3.0
    rule = gauss_legendre(7, a, b)
    for p in range(14):
        exact = (b ** (p + 1) - a ** (p + 1)) / (p + 1)
        assert rule.integrate(rule.nodes ** p) == pytest.approx(exact, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(m=st.integers(min_value=1, max_value=60))
def test_node_symmetry_and_weight_pairing(m):
    rule = gauss_legendre(m, 0.0, 1.0)
    assert np.max(np.abs(rule.nodes + rule.nodes[::-1] - 1.0)) < 1e-13
    assert np.max(np.abs(rule.weights - rule.weights[::-1])) < 1e-13


@pytest.mark.parametrize("m", [1, 4, 50, 100])
def test_rule_invariants(m):
    rule = gauss_legendre(m, 0.0, 1.0)
    assert np.all(np.diff(rule.nodes) > 0)
    assert np.all(rule.nodes > 0.0) and np.all(rule.nodes < 1.0)
    assert np.all(rule.weights > 0)
    assert abs(rule.weights.sum() - 1.0) < 1e-12


def test_invalid_arguments():
    with pytest.raises(ValueError):
        gauss_legendre(0, 0.0, 1.0)
    with pytest.raises(ValueError):
        gauss_legendre(5, 1.0, 1.0)
    with pytest.raises(ValueError):
        gauss_legendre(5, 2.0, 1.0)
