"""Gauss-Legendre quadrature rules on arbitrary intervals.

Nodes are computed by Newton iteration on the Legendre polynomial with
Chebyshev-root initial guesses, which is stable well past order 100.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["QuadratureRule", "gauss_legendre"]

DEFAULT_ORDER = 50


@dataclass(frozen=True)
class QuadratureRule:
    """Immutable nodes/weights pair for integration on [a, b].

    Attributes
    ----------
    nodes : ndarray, shape (order,)
        Strictly increasing abscissae in the open interval (a, b).
    weights : ndarray, shape (order,)
        Positive weights summing to b - a.
    """

    nodes: np.ndarray
    weights: np.ndarray
    order: int
    a: float
    b: float

    def integrate(self, values) -> float:
        """Weighted sum of integrand values sampled at the nodes."""
        return float(np.dot(self.weights, np.asarray(values, dtype=float)))


def _legendre_with_derivative(m: int, x: np.ndarray):
    # Three-term recurrence for P_m; derivative via the standard identity.
    # Valid for |x| < 1, which holds at every interior root.
    p_prev = np.ones_like(x)
    p = x.copy()
    for k in range(2, m + 1):
        p_prev, p = p, ((2.0 * k - 1.0) * x * p - (k - 1.0) * p_prev) / k
    dp = m * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


def gauss_legendre(m: int, a: float = 0.0, b: float = 1.0) -> QuadratureRule:
    """Build the m-point Gauss-Legendre rule on [a, b].

    The rule integrates polynomials of degree <= 2m - 1 exactly.

    Parameters
    ----------
    m : int
        Number of nodes, m >= 1.
    a, b : float
        Integration interval, a < b.
    """
    if m < 1:
        raise ValueError(f"quadrature order must be >= 1, got {m}")
    if not a < b:
        raise ValueError(f"invalid interval [{a}, {b}]: need a < b")

    i = np.arange(1, m + 1, dtype=float)
    x = np.cos(np.pi * (i - 0.25) / (m + 0.5))
    for _ in range(100):
        p, dp = _legendre_with_derivative(m, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    _, dp = _legendre_with_derivative(m, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)

    # Chebyshev guesses are descending in x; flip to ascending nodes.
    x = x[::-1].copy()
    w = w[::-1].copy()

    half = 0.5 * (b - a)
    nodes = a + half * (x + 1.0)
    weights = half * w
    return QuadratureRule(nodes=nodes, weights=weights, order=m, a=float(a), b=float(b))
