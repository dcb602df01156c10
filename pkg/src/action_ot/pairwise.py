"""Single-pair relaxed minimal-action solver.

The discrete action is a Gauss-Legendre sum of Lagrangian values along a
Chebyshev path. Endpoints are penalized quadratically toward their targets
rather than pinned, and alternating gradient descent (optionally with Armijo
backtracking) drives both the interior coefficients and the endpoints.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chebyshev import BasisCache, ChebyshevPath, build_cache
from .density import DensityModel
from .errors import NumericalRangeError, OptimizationFailure
from .quadrature import gauss_legendre

__all__ = [
    "PairwiseConfig",
    "PairwiseResult",
    "DensityLagrangian",
    "discrete_action",
    "action_grad_coeffs",
    "action_endpoint_grads",
    "endpoint_momentum",
    "lagrangian_node_values",
    "solve_pairwise",
]


@dataclass
class PairwiseConfig:
    """Solver parameters for one endpoint pair.

    lam is the quadratic endpoint penalty weight; eta the (initial) step
    size. With backtracking on, eta only seeds the per-block adaptive step.
    """

    alpha: float = 1.0
    lam: float = 1e5
    eta: float = 0.1
    n_cheb: int = 10
    quad_order: int = 50
    max_iters: int = 20000
    grad_tol: float = 1e-6
    backtracking: bool = True

    def validate(self) -> None:
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.lam <= 0 or self.eta <= 0 or self.grad_tol <= 0:
            raise ValueError("lam, eta and grad_tol must be positive")
        if self.n_cheb < 2:
            raise ValueError("n_cheb must be >= 2")
        if self.quad_order < 1:
            raise ValueError("quad_order must be >= 1")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")


@dataclass
class PairwiseResult:
    path: ChebyshevPath
    action: float
    objective: float
    iterations: int
    final_grad_norm: float
    objective_trace: np.ndarray = field(repr=False, default=None)


class DensityLagrangian:
    """L(w_dot, w) = ||w_dot||^2 rho(w)^{-alpha} / 2 and its local derivatives."""

    def __init__(self, model: DensityModel, alpha: float):
        self.model = model
        self.alpha = float(alpha)

    def at_nodes(self, w, w_dot):
        """(L, dL/dv, dL/dw) vectorized over leading axes of (w, w_dot)."""
        log_rho, glog = self.model.log_and_grad(w)
        # rho^{-alpha} may overflow on probe states far outside the support;
        # callers test finiteness, so silence the expected warning.
        with np.errstate(over="ignore"):
            weight = np.exp(-self.alpha * log_rho)
            speed2 = np.sum(w_dot * w_dot, axis=-1)
            lvals = 0.5 * speed2 * weight
            dldv = weight[..., None] * w_dot
            dldw = (-0.5 * self.alpha) * (speed2 * weight)[..., None] * glog
        return lvals, dldv, dldw

    def values(self, w, w_dot):
        """L only; saves the gradient work inside line searches."""
        with np.errstate(over="ignore"):
            weight = np.exp(-self.alpha * self.model.log_density(w))
            return 0.5 * np.sum(w_dot * w_dot, axis=-1) * weight


def as_lagrangian(model, alpha: float):
    """Dispatch a DensityModel / MetricField / Lagrangian-like to at_nodes form."""
    if isinstance(model, DensityModel):
        return DensityLagrangian(model, alpha)
    if hasattr(model, "at_nodes"):
        return model
    if hasattr(model, "metric"):
        from .metric import MetricLagrangian
        return MetricLagrangian(model)
    raise TypeError(f"cannot interpret {type(model).__name__} as a Lagrangian")


def _node_states(path: ChebyshevPath, cache: BasisCache):
    t = cache.rule.nodes
    pos = (np.outer(1.0 - t, path.w0) + np.outer(t, path.w1)
           + cache.phi.T @ path.coeffs)
    vel = (path.w1 - path.w0)[None, :] + cache.dphi.T @ path.coeffs
    return pos, vel


def _check_finite(lvals, label="node"):
    if np.all(np.isfinite(lvals)):
        return
    bad = int(np.argmax(~np.isfinite(np.atleast_1d(lvals))))
    raise NumericalRangeError(
        f"density weight left floating-point range at {label} {bad}")


def lagrangian_node_values(path: ChebyshevPath, model, alpha: float,
                           cache: BasisCache) -> np.ndarray:
    """L(w_dot(t_r), w(t_r)) at every quadrature node (energy diagnostics)."""
    lagr = as_lagrangian(model, alpha)
    pos, vel = _node_states(path, cache)
    lvals, _, _ = lagr.at_nodes(pos, vel)
    return lvals


def discrete_action(path: ChebyshevPath, model, alpha: float,
                    cache: BasisCache) -> float:
    """Quadrature value of the action along the path."""
    if cache.n_cheb != path.n_cheb:
        raise ValueError("cache was built for a different n_cheb")
    lagr = as_lagrangian(model, alpha)
    pos, vel = _node_states(path, cache)
    lvals, _, _ = lagr.at_nodes(pos, vel)
    _check_finite(lvals)
    return float(np.dot(cache.rule.weights, lvals))


def action_grad_coeffs(path: ChebyshevPath, model, alpha: float,
                       cache: BasisCache) -> np.ndarray:
    """Gradient of the discrete action in the interior coefficients.

    Mode k receives sum_r q_r [dL/dv phi_k'(t_r) + dL/dw phi_k(t_r)].
    """
    lagr = as_lagrangian(model, alpha)
    pos, vel = _node_states(path, cache)
    lvals, dldv, dldw = lagr.at_nodes(pos, vel)
    _check_finite(lvals)
    q = cache.rule.weights[:, None]
    return cache.dphi @ (q * dldv) + cache.phi @ (q * dldw)


def action_endpoint_grads(path: ChebyshevPath, model, alpha: float,
                          cache: BasisCache):
    """Exact gradients of the discrete action in (w0, w1).

    Uses the chain rule through every node: dw_r/dw0 = (1 - t_r) I and
    dw_dot_r/dw0 = -I (and the t_r / +I counterparts at w1). At a path that
    is stationary in the interior coefficients these reduce to the boundary
    momenta; away from stationarity they remain the true gradients, which is
    what descent and finite-difference checks require.
    """
    lagr = as_lagrangian(model, alpha)
    pos, vel = _node_states(path, cache)
    lvals, dldv, dldw = lagr.at_nodes(pos, vel)
    _check_finite(lvals)
    q = cache.rule.weights[:, None]
    t = cache.rule.nodes[:, None]
    g0 = np.sum(q * (-dldv + (1.0 - t) * dldw), axis=0)
    g1 = np.sum(q * (dldv + t * dldw), axis=0)
    return g0, g1


def endpoint_momentum(path: ChebyshevPath, model, alpha: float):
    """Boundary momenta m(0), m(1) = dL/dv at the path's endpoint states.

    These equal the endpoint gradients of the converged pairwise cost; away
    from stationarity they are reported as-is (not the objective gradient).
    """
    lagr = as_lagrangian(model, alpha)
    v0, v1 = path.endpoint_velocities()
    w = np.stack([path.w0, path.w1])
    v = np.stack([v0, v1])
    _, dldv, _ = lagr.at_nodes(w, v)
    return dldv[0], dldv[1]


def _armijo_step(value_of, x0, g, f0, step, c1=1e-4, shrink=0.5, grow=2.0):
    """One backtracked descent step along -g; returns (x, f, step, accepted).

    After an accepted step the doubled step is probed too and kept only if
    it lowers the objective further; this keeps the retained step near the
    best-progress scale instead of the edge of stability.
    """
    g2 = float(np.vdot(g, g))
    if g2 == 0.0:
        return x0, f0, step, False
    s = step
    accepted = False
    for _ in range(100):
        x_new = x0 - s * g
        f_new = value_of(x_new)
        if np.isfinite(f_new) and f_new <= f0 - c1 * s * g2:
            accepted = True
            break
        s *= shrink
        if s < 1e-300:
            break
    if not accepted:
        return x0, f0, step, False
    s_big = s * grow
    x_big = x0 - s_big * g
    f_big = value_of(x_big)
    if np.isfinite(f_big) and f_big < f_new:
        return x_big, f_big, s_big, True
    return x_new, f_new, s, True


def solve_pairwise(x0, x1, model, cfg: PairwiseConfig) -> PairwiseResult:
    """Minimize action + lam * (||w0 - x0||^2 + ||w1 - x1||^2).

    Alternates endpoint and interior-coefficient updates. With backtracking
    (default) each block keeps its own adaptive step and the recorded
    objective sequence is non-increasing; with backtracking off the update
    is the plain fixed-step rule.
    """
    cfg.validate()
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    if np.array_equal(x0, x1):
        path = ChebyshevPath.straight(x0, x1, cfg.n_cheb)
        return PairwiseResult(path=path, action=0.0, objective=0.0,
                              iterations=0, final_grad_norm=0.0,
                              objective_trace=np.zeros(1))

    cache = build_cache(cfg.n_cheb, gauss_legendre(cfg.quad_order, 0.0, 1.0))
    lagr = as_lagrangian(model, cfg.alpha)
    lam = cfg.lam
    t = cache.rule.nodes
    q = cache.rule.weights
    one_minus_t = 1.0 - t
    phi_t = cache.phi.T
    dphi_t = cache.dphi.T

    coeffs = np.zeros((cfg.n_cheb - 1, x0.size))
    w0 = x0.copy()
    w1 = x1.copy()

    lagr_values = getattr(lagr, "values", None)
    if lagr_values is None:
        def lagr_values(pos, vel):
            return lagr.at_nodes(pos, vel)[0]

    def node_values(a, p0, p1):
        pos = np.outer(one_minus_t, p0) + np.outer(t, p1) + phi_t @ a
        vel = (p1 - p0)[None, :] + dphi_t @ a
        return lagr.at_nodes(pos, vel)

    def objective(a, p0, p1):
        pos = np.outer(one_minus_t, p0) + np.outer(t, p1) + phi_t @ a
        vel = (p1 - p0)[None, :] + dphi_t @ a
        lvals = lagr_values(pos, vel)
        if not np.all(np.isfinite(lvals)):
            return np.inf
        s_val = float(np.dot(q, lvals))
        pen = float(np.sum((p0 - x0) ** 2) + np.sum((p1 - x1) ** 2))
        return s_val + lam * pen

    def grads(a, p0, p1):
        lvals, dldv, dldw = node_values(a, p0, p1)
        _check_finite(lvals)
        qc = q[:, None]
        ga = cache.dphi @ (qc * dldv) + cache.phi @ (qc * dldw)
        g0 = np.sum(qc * (-dldv + one_minus_t[:, None] * dldw), axis=0) \
            + 2.0 * lam * (p0 - x0)
        g1 = np.sum(qc * (dldv + t[:, None] * dldw), axis=0) \
            + 2.0 * lam * (p1 - x1)
        return ga, g0, g1

    j_cur = objective(coeffs, w0, w1)
    if not np.isfinite(j_cur):
        raise OptimizationFailure("objective not finite at initialization",
                                  snapshot={"w0": w0.tolist(), "w1": w1.tolist()})
    trace = [j_cur]
    eta_w = cfg.eta
    eta_a = cfg.eta
    eta_a_good = cfg.eta
    gnorm = np.inf
    it = 0
    j_dirty = False
    fixed_entry_gnorm = None

    def below_noise(step, g_sq):
        # Armijo decrease at this step is not resolvable above the
        # objective's rounding noise; descent can't be certified.
        return 1e-4 * step * g_sq <= 32.0 * np.finfo(float).eps * max(1.0, abs(j_cur))

    for it in range(1, cfg.max_iters + 1):
        ga, g0, g1 = grads(coeffs, w0, w1)
        gnorm = float(np.sqrt(np.sum(ga * ga) + np.sum(g0 * g0)
                              + np.sum(g1 * g1)))
        if gnorm < cfg.grad_tol:
            it -= 1
            break

        if cfg.backtracking:
            gw = np.concatenate([g0, g1])
            gw2 = float(np.vdot(gw, gw))
            ga2 = float(np.sum(ga * ga))
            floor_w = below_noise(0.5 / lam, gw2)
            floor_a = below_noise(eta_a_good, ga2)

            if not floor_w:
                if j_dirty:
                    j_cur = objective(coeffs, w0, w1)
                    j_dirty = False
                xw = np.concatenate([w0, w1])
                xw, j_cur, eta_w, moved_w = _armijo_step(
                    lambda v: objective(coeffs, v[:x0.size], v[x0.size:]),
                    xw, gw, j_cur, max(eta_w, 1.0 / lam))
                w0, w1 = xw[:x0.size], xw[x0.size:]
                if moved_w:
                    trace.append(j_cur)
            elif gw2 > 0.0:
                # Endpoint block at its conditional optimum up to noise:
                # contraction step at the penalty's natural scale, no
                # objective certification (true decrease is below noise).
                w0 = w0 - (0.5 / lam) * g0
                w1 = w1 - (0.5 / lam) * g1
                j_dirty = True

            if not floor_a:
                ga, _, _ = grads(coeffs, w0, w1)
                if j_dirty:
                    j_cur = objective(coeffs, w0, w1)
                    j_dirty = False
                coeffs, j_cur, eta_a, moved_a = _armijo_step(
                    lambda a: objective(a, w0, w1), coeffs, ga, j_cur,
                    max(eta_a, eta_a_good))
                if moved_a:
                    trace.append(j_cur)
                    if not below_noise(eta_a, float(np.sum(ga * ga))):
                        eta_a_good = eta_a
            elif ga2 > 0.0:
                ga, _, _ = grads(coeffs, w0, w1)
                coeffs = coeffs - eta_a_good * ga
                j_dirty = True

            if floor_w and floor_a:
                if fixed_entry_gnorm is None:
                    fixed_entry_gnorm = gnorm
                elif gnorm > 10.0 * fixed_entry_gnorm:
                    break
            else:
                fixed_entry_gnorm = None
        else:
            w0 = w0 - cfg.eta * g0
            w1 = w1 - cfg.eta * g1
            ga, _, _ = grads(coeffs, w0, w1)
            coeffs = coeffs - cfg.eta * ga
            j_cur = objective(coeffs, w0, w1)
            if not np.isfinite(j_cur):
                raise OptimizationFailure(
                    f"objective diverged at iteration {it}",
                    snapshot={"iteration": it, "w0": w0.tolist(),
                              "w1": w1.tolist(), "coeffs": coeffs.tolist()})
            trace.append(j_cur)

    path = ChebyshevPath(w0, w1, coeffs)
    ga, g0, g1 = grads(coeffs, w0, w1)
    gnorm = float(np.sqrt(np.sum(ga * ga) + np.sum(g0 * g0) + np.sum(g1 * g1)))
    action = discrete_action(path, lagr, cfg.alpha, cache)
    return PairwiseResult(path=path, action=action,
                          objective=objective(coeffs, w0, w1),
                          iterations=it, final_grad_norm=gnorm,
                          objective_trace=np.array(trace))
