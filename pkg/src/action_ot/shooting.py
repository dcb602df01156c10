"""Independent validation oracle for the Gaussian-background pairwise solver.

For the standard Gaussian with alpha = 1 the stationarity ODE is

    w_ddot + (w . w_dot) w_dot - ||w_dot||^2 w / 2 = 0,

integrated here with an adaptive embedded Runge-Kutta 5(4) scheme. The
two-point boundary problem is solved by single shooting: a derivative-free
pattern search with backtracking adjusts the unknown initial velocity until
the terminal mismatch drops below a tolerance.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import IntegrationFailure, NoConvergenceError

__all__ = ["el_rhs", "integrate_ivp", "Trajectory", "ShootingResult", "shoot_bvp"]

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-10


def el_rhs(w, w_dot):
    """Acceleration -(w . w_dot) w_dot + ||w_dot||^2 w / 2."""
    w = np.asarray(w, dtype=float)
    w_dot = np.asarray(w_dot, dtype=float)
    return -(w @ w_dot) * w_dot + 0.5 * (w_dot @ w_dot) * w


@dataclass
class Trajectory:
    """Dense solution of one initial-value integration on [0, 1]."""

    ts: np.ndarray
    ws: np.ndarray
    w_dots: np.ndarray
    sol: object
    n_steps: int
    n_evals: int

    @property
    def endpoint(self) -> np.ndarray:
        return self.ws[-1]

    def sample(self, t):
        """Positions at arbitrary times via the integrator's dense output."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        d = self.ws.shape[1]
        y = self.sol(t)
        return y[:d].T


def integrate_ivp(x0, v, rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                  t_eval=None) -> Trajectory:
    """Integrate the Euler-Lagrange ODE from (x0, v) over t in [0, 1]."""
    if rtol <= 0 or atol <= 0:
        raise ValueError("rtol and atol must be positive")
    x0 = np.asarray(x0, dtype=float)
    v = np.asarray(v, dtype=float)
    d = x0.size

    def rhs(_t, y):
        return np.concatenate([y[d:], el_rhs(y[:d], y[d:])])

    res = solve_ivp(rhs, (0.0, 1.0), np.concatenate([x0, v]), method="RK45",
                    rtol=rtol, atol=atol, dense_output=True, t_eval=t_eval)
    if not res.success:
        raise IntegrationFailure(f"ODE integration failed: {res.message}")
    return Trajectory(ts=res.t, ws=res.y[:d].T, w_dots=res.y[d:].T,
                      sol=res.sol, n_steps=res.t.size - 1, n_evals=res.nfev)


@dataclass
class ShootingResult:
    """Converged single-shooting solution of the two-point problem."""

    v_star: np.ndarray
    trajectory: Trajectory
    terminal_mismatch: float
    ode_steps: int
    search_evals: int


def shoot_bvp(x0, x1, eps: float = 1e-8, max_evals: int = 10000,
              rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> ShootingResult:
    """Find the initial velocity whose trajectory hits x1 at t = 1.

    Starts from v = x1 - x0 and minimizes J(v) = ||w(1; x0, v) - x1||^2 / 2
    with a coordinate-wise pattern search (expand 2.0 on success, shrink 0.5
    on a full failed sweep) until J <= eps.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    d = x0.size

    evals = 0
    total_steps = 0

    def mismatch(v):
        nonlocal evals, total_steps
        traj = integrate_ivp(x0, v, rtol=rtol, atol=atol)
        evals += 1
        total_steps += traj.n_steps
        diff = traj.endpoint - x1
        return 0.5 * float(diff @ diff)

    v = x1 - x0
    j_cur = mismatch(v)
    delta = max(0.5 * float(np.linalg.norm(v)), 1e-3)

    while j_cur > eps and evals < max_evals and delta > 1e-14:
        improved = False
        for i in range(d):
            for sign in (1.0, -1.0):
                trial = v.copy()
                trial[i] += sign * delta
                j_trial = mismatch(trial)
                if j_trial < j_cur:
                    v, j_cur = trial, j_trial
                    improved = True
                    break
                if evals >= max_evals:
                    break
            if improved or evals >= max_evals:
                break
        delta = delta * 2.0 if improved else delta * 0.5

    if j_cur > eps:
        raise NoConvergenceError(
            f"shooting stalled at J = {j_cur:.3e} after {evals} evaluations "
            f"(target {eps:.1e})", best_mismatch=j_cur)

    final = integrate_ivp(x0, v, rtol=rtol, atol=atol)
    diff = final.endpoint - x1
    return ShootingResult(v_star=v, trajectory=final,
                          terminal_mismatch=0.5 * float(diff @ diff),
                          ode_steps=final.n_steps, search_evals=evals)
