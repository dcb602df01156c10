"""Endpoint-vanishing Chebyshev basis and the path representation built on it.

A path on [0, 1] is the linear interpolant of its endpoints plus a sum of
interior modes that vanish identically at t = 0 and t = 1, so endpoint
conditions never need projection during optimization.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quadrature import QuadratureRule

__all__ = [
    "basis_value",
    "basis_derivative",
    "basis_matrices",
    "ChebyshevPath",
    "path_state",
    "BasisCache",
    "build_cache",
]


def _check_mode(k: int) -> None:
    if k < 2:
        raise ValueError(f"interior modes start at k = 2, got k = {k}")


def basis_value(k: int, t):
    """Evaluate the k-th endpoint-vanishing basis function.

    phi_k(t) = T_k(2t - 1) - (-1)^k (1 - t) - t, with T_k computed by the
    three-term recurrence (exact at t = 0, 1 in floating point).
    """
    _check_mode(k)
    t = np.asarray(t, dtype=float)
    x = 2.0 * t - 1.0
    t_prev = np.ones_like(x)
    t_cur = x.copy()
    for _ in range(2, k + 1):
        t_prev, t_cur = t_cur, 2.0 * x * t_cur - t_prev
    sign = -1.0 if k % 2 else 1.0
    out = t_cur - sign * (1.0 - t) - t
    return out if out.ndim else float(out)


def basis_derivative(k: int, t):
    """Evaluate phi_k'(t) = 2k U_{k-1}(2t - 1) + (-1)^k - 1.

    U is the Chebyshev polynomial of the second kind, again by recurrence.
    """
    _check_mode(k)
    t = np.asarray(t, dtype=float)
    x = 2.0 * t - 1.0
    u_prev = np.ones_like(x)           # U_0
    u_cur = 2.0 * x                    # U_1
    for _ in range(2, k):
        u_prev, u_cur = u_cur, 2.0 * x * u_cur - u_prev
    sign = -1.0 if k % 2 else 1.0
    out = 2.0 * k * u_cur + sign - 1.0
    return out if out.ndim else float(out)


def basis_matrices(n_cheb: int, t):
    """Tabulate phi_k and phi_k' for k = 2..n_cheb at the given points.

    Returns (phi, dphi), each of shape (n_cheb - 1, len(t)), sharing one
    recurrence sweep across all modes.
    """
    if n_cheb < 2:
        raise ValueError(f"n_cheb must be >= 2, got {n_cheb}")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = 2.0 * t - 1.0
    n_modes = n_cheb - 1

    phi = np.empty((n_modes, t.size))
    dphi = np.empty((n_modes, t.size))

    t_prev = np.ones_like(x)   # T_0
    t_cur = x.copy()           # T_1
    u_prev = np.ones_like(x)   # U_0
    u_cur = 2.0 * x            # U_1
    for k in range(2, n_cheb + 1):
        t_prev, t_cur = t_cur, 2.0 * x * t_cur - t_prev
        sign = -1.0 if k % 2 else 1.0
        phi[k - 2] = t_cur - sign * (1.0 - t) - t
        # U_{k-1}: for k = 2 this is u_cur already; advance afterwards.
        dphi[k - 2] = 2.0 * k * u_cur + sign - 1.0
        u_prev, u_cur = u_cur, 2.0 * x * u_cur - u_prev
    return phi, dphi


@dataclass
class ChebyshevPath:
    """One path: endpoints plus interior mode coefficients.

    coeffs has shape (n_cheb - 1, d); row i holds the vector coefficient of
    mode k = i + 2.
    """

    w0: np.ndarray
    w1: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        self.w0 = np.asarray(self.w0, dtype=float)
        self.w1 = np.asarray(self.w1, dtype=float)
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.w0.ndim != 1 or self.w0.shape != self.w1.shape:
            raise ValueError("endpoints must be equal-length vectors")
        if self.coeffs.ndim != 2 or self.coeffs.shape[1] != self.w0.size:
            raise ValueError("coeffs must have shape (n_cheb - 1, d)")
        if self.coeffs.shape[0] < 1:
            raise ValueError("need at least mode k = 2 (n_cheb >= 2)")

    @property
    def dim(self) -> int:
        return self.w0.size

    @property
    def n_cheb(self) -> int:
        return self.coeffs.shape[0] + 1

    @classmethod
    def straight(cls, x0, x1, n_cheb: int) -> "ChebyshevPath":
        """Chord from x0 to x1 with all interior coefficients zero."""
        x0 = np.asarray(x0, dtype=float)
        return cls(w0=x0.copy(), w1=np.asarray(x1, dtype=float).copy(),
                   coeffs=np.zeros((n_cheb - 1, x0.size)))

    def endpoint_velocities(self):
        """(w_dot(0), w_dot(1)) from the closed forms for phi_k'(0), phi_k'(1)."""
        ks = np.arange(2, self.n_cheb + 1, dtype=float)
        sign = np.where(ks % 2 == 0, 1.0, -1.0)
        d1 = 2.0 * ks * ks + sign - 1.0
        d0 = 2.0 * ks * ks * (-sign) + sign - 1.0
        chord = self.w1 - self.w0
        return chord + d0 @ self.coeffs, chord + d1 @ self.coeffs

    def to_json(self) -> dict:
        return {
            "w0": self.w0.tolist(),
            "w1": self.w1.tolist(),
            "n_cheb": self.n_cheb,
            "coeffs": self.coeffs.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ChebyshevPath":
        path = cls(w0=np.array(obj["w0"], dtype=float),
                   w1=np.array(obj["w1"], dtype=float),
                   coeffs=np.array(obj["coeffs"], dtype=float))
        if path.n_cheb != obj["n_cheb"]:
            raise ValueError("inconsistent n_cheb in serialized path")
        return path


def path_state(path: ChebyshevPath, t):
    """Position and velocity of the path at time(s) t.

    Scalar t yields a pair of (d,) vectors; an array of shape (T,) yields
    (T, d) arrays.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    phi, dphi = basis_matrices(path.n_cheb, t_arr)
    w = (np.outer(1.0 - t_arr, path.w0) + np.outer(t_arr, path.w1)
         + phi.T @ path.coeffs)
    w_dot = (path.w1 - path.w0)[None, :] + dphi.T @ path.coeffs
    if np.ndim(t) == 0:
        return w[0], w_dot[0]
    return w, w_dot


@dataclass(frozen=True)
class BasisCache:
    """Tabulated phi_k(t_r), phi_k'(t_r) at the nodes of one quadrature rule."""

    phi: np.ndarray
    dphi: np.ndarray
    rule: QuadratureRule
    n_cheb: int


def build_cache(n_cheb: int, rule: QuadratureRule) -> BasisCache:
    """Precompute basis values/derivatives at the rule's nodes.

    The action integrals live on [0, 1], so the rule must too.
    """
    if not (rule.a == 0.0 and rule.b == 1.0):
        raise ValueError("basis cache requires a quadrature rule on [0, 1]")
    phi, dphi = basis_matrices(n_cheb, rule.nodes)
    return BasisCache(phi=phi, dphi=dphi, rule=rule, n_cheb=n_cheb)
