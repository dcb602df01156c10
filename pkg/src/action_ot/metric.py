"""Quadratic-form Lagrangians L = w_dot^T G(w) w_dot for SPD metric fields.

The density-weighted Lagrangian is the special case G = rho(w)^{-alpha} I / 2,
so both solvers run one optimization code path: a metric field only changes
the local Lagrangian derivatives, never the path representation.
"""
from __future__ import annotations

import numpy as np

from .chebyshev import ChebyshevPath, path_state
from .density import DensityModel
from .errors import InvalidMetricError

__all__ = [
    "MetricField",
    "ConstantMetric",
    "IsotropicDensityMetric",
    "DiagonalField",
    "QuadraticDiagonalField",
    "metric_lagrangian",
    "metric_momentum",
    "MetricLagrangian",
    "metric_from_config",
]


class MetricField:
    """Interface: G(w) as (..., d, d) and dG[..., l, a, b] = dG_ab/dw_l."""

    dim: int

    def metric(self, w: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def metric_grad(self, w: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class ConstantMetric(MetricField):
    def __init__(self, g0):
        g0 = np.asarray(g0, dtype=float)
        _require_spd(g0)
        self.g0 = g0
        self.dim = g0.shape[0]

    def metric(self, w):
        w = np.asarray(w, dtype=float)
        return np.broadcast_to(self.g0, w.shape[:-1] + self.g0.shape).copy()

    def metric_grad(self, w):
        w = np.asarray(w, dtype=float)
        d = self.dim
        return np.zeros(w.shape[:-1] + (d, d, d))


class IsotropicDensityMetric(MetricField):
    """G(w) = rho(w)^{-alpha} I / 2: the density-weighted special case."""

    def __init__(self, model: DensityModel, alpha: float):
        self.model = model
        self.alpha = float(alpha)
        self.dim = model.dim

    def metric(self, w):
        w = np.asarray(w, dtype=float)
        weight = 0.5 * np.exp(-self.alpha * self.model.log_density(w))
        eye = np.eye(self.dim)
        return weight[..., None, None] * eye

    def metric_grad(self, w):
        w = np.asarray(w, dtype=float)
        weight = 0.5 * np.exp(-self.alpha * self.model.log_density(w))
        glog = self.model.grad_log(w)
        eye = np.eye(self.dim)
        scale = -self.alpha * weight[..., None] * glog      # (..., l)
        return scale[..., None, None] * eye


class DiagonalField(MetricField):
    """Diagonal metric from user-supplied smooth entries.

    diag_fn(w) -> (..., d) entries; diag_grad_fn(w) -> (..., d, d) with
    [..., l, a] = d(entry_a)/dw_l.
    """

    def __init__(self, diag_fn, diag_grad_fn, dim: int):
        self.diag_fn = diag_fn
        self.diag_grad_fn = diag_grad_fn
        self.dim = dim

    def metric(self, w):
        entries = np.asarray(self.diag_fn(np.asarray(w, dtype=float)))
        out = np.zeros(entries.shape + (self.dim,))
        idx = np.arange(self.dim)
        out[..., idx, idx] = entries
        return out

    def metric_grad(self, w):
        grads = np.asarray(self.diag_grad_fn(np.asarray(w, dtype=float)))
        out = np.zeros(grads.shape + (self.dim,))
        idx = np.arange(self.dim)
        out[..., idx, idx] = grads
        return out


class QuadraticDiagonalField(DiagonalField):
    """Diagonal entries base_a + scale_a * w_a^2 (config-friendly family)."""

    def __init__(self, base, scale):
        base = np.asarray(base, dtype=float)
        scale = np.asarray(scale, dtype=float)
        if base.shape != scale.shape or base.ndim != 1:
            raise ValueError("base and scale must be equal-length vectors")
        if np.any(base <= 0) or np.any(scale < 0):
            raise ValueError("need base > 0 and scale >= 0 for positivity")
        d = base.size

        def diag_fn(w):
            return base + scale * w * w

        def diag_grad_fn(w):
            out = np.zeros(w.shape[:-1] + (d, d))
            idx = np.arange(d)
            out[..., idx, idx] = 2.0 * scale * w
            return out

        super().__init__(diag_fn, diag_grad_fn, d)
        self.base = base
        self.scale = scale


def _require_spd(g, tol=1e-12):
    g = np.asarray(g, dtype=float)
    sym_err = np.max(np.abs(g - np.swapaxes(g, -1, -2)))
    if sym_err > tol:
        raise InvalidMetricError(f"metric not symmetric (max deviation {sym_err:.2e})")
    eigs = np.linalg.eigvalsh(g)
    if np.min(eigs) <= 0:
        raise InvalidMetricError(f"metric not positive definite (min eig {np.min(eigs):.2e})")


def metric_lagrangian(field: MetricField, w, w_dot):
    """(L, dL/dv, dL/dw) at one or many states, with an SPD check.

    L = w_dot^T G w_dot, dL/dv = 2 G w_dot, and component l of dL/dw is
    w_dot^T (dG/dw_l) w_dot.
    """
    w = np.asarray(w, dtype=float)
    w_dot = np.asarray(w_dot, dtype=float)
    g = field.metric(w)
    _require_spd(g)
    dg = field.metric_grad(w)
    lvals = np.einsum("...a,...ab,...b->...", w_dot, g, w_dot)
    dldv = 2.0 * np.einsum("...ab,...b->...a", g, w_dot)
    dldw = np.einsum("...a,...lab,...b->...l", w_dot, dg, w_dot)
    return lvals, dldv, dldw


def metric_momentum(field: MetricField, path: ChebyshevPath, t: float):
    """Boundary momentum dL/dv = 2 G(w(t)) w_dot(t).

    Defined as the velocity derivative of the Lagrangian so that the
    variational identity grad_{w1} S = m(1) holds for L = w_dot^T G w_dot.
    """
    w, w_dot = path_state(path, t)
    g = field.metric(w)
    return 2.0 * g @ w_dot


class MetricLagrangian:
    """at_nodes adapter so metric fields plug into the action solvers.

    Skips the per-node SPD check (fields used in optimization are assumed
    valid; probe with metric_lagrangian for validation).
    """

    def __init__(self, field: MetricField):
        self.field = field

    def at_nodes(self, w, w_dot):
        g = self.field.metric(w)
        dg = self.field.metric_grad(w)
        lvals = np.einsum("...a,...ab,...b->...", w_dot, g, w_dot)
        dldv = 2.0 * np.einsum("...ab,...b->...a", g, w_dot)
        dldw = np.einsum("...a,...lab,...b->...l", w_dot, dg, w_dot)
        return lvals, dldv, dldw


def metric_from_config(spec: dict, model: DensityModel | None = None) -> MetricField:
    """Build a metric field from {"kind": ..., parameters...}."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "constant":
        return ConstantMetric(np.asarray(spec["matrix"], dtype=float))
    if kind == "isotropic-density":
        if model is None:
            raise ValueError("isotropic-density metric needs a density model")
        return IsotropicDensityMetric(model, float(spec.get("alpha", 1.0)))
    if kind == "diagonal":
        return QuadraticDiagonalField(spec["base"], spec["scale"])
    raise ValueError(f"unknown metric kind: {kind!r}")
