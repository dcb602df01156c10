"""Adversarial distribution-matching penalty on endpoint clouds.

Two equal-size clouds are stacked, mapped through linear + quadratic
features, centered and Frobenius-normalized with statistics frozen at fit
time, and whitened by a truncated SVD. The penalty is the squared norm of
the signed column sums ||f^T Q||^2: it vanishes exactly when the two clouds
share all feature means, and it is smooth in the cloud positions because the
frozen statistics never re-enter the derivative.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCloudError

__all__ = [
    "quadratic_features",
    "feature_jacobian",
    "PenaltyState",
    "fit_penalty",
    "refit",
    "penalty_value",
    "penalty_grad",
]


def _quad_pairs(d: int):
    return [(i, j) for i in range(d) for j in range(i, d)]


def n_features(d: int) -> int:
    return d + d * (d + 1) // 2


def quadratic_features(points) -> np.ndarray:
    """Feature matrix with rows (coordinates, upper-triangular monomials).

    For d = 2 the columns are (y1, y2, y1^2, y1*y2, y2^2).
    """
    y = np.asarray(points, dtype=float)
    if y.ndim != 2:
        raise ValueError("expected a 2-D array of points")
    d = y.shape[1]
    cols = [y[:, i] for i in range(d)]
    cols += [y[:, i] * y[:, j] for i, j in _quad_pairs(d)]
    return np.stack(cols, axis=1)


def feature_jacobian(point) -> np.ndarray:
    """Rowwise Jacobian dG^l / dy of the feature map at one point, (F, d)."""
    y = np.asarray(point, dtype=float)
    d = y.size
    jac = np.zeros((n_features(d), d))
    jac[:d, :d] = np.eye(d)
    for row, (i, j) in enumerate(_quad_pairs(d), start=d):
        jac[row, i] += y[j]
        jac[row, j] += y[i]
    return jac


@dataclass
class PenaltyState:
    """Frozen feature statistics for one endpoint/target cloud pair.

    mu, scale and basis are computed once at fit time and held constant, so
    the penalty gradient is the plain chain rule through the feature map.
    """

    mu: np.ndarray            # column means, (F,)
    scale: float              # Frobenius norm of the centered features
    basis: np.ndarray         # V_k S_k^{-1}, (F, k_svd)
    f: np.ndarray             # +1/m on endpoint rows, -1/m on target rows
    k_svd: int
    reference_targets: np.ndarray
    m: int

    def whitened(self, points) -> np.ndarray:
        """Q = ((G - mu) / scale) B for the stacked cloud [points; targets]."""
        y = np.vstack([np.asarray(points, dtype=float), self.reference_targets])
        g = quadratic_features(y)
        return ((g - self.mu) / self.scale) @ self.basis


def fit_penalty(endpoints, targets, svd_tol: float = 1e-8) -> PenaltyState:
    """Freeze centering, scale, and SVD whitening on the stacked clouds.

    The endpoint cloud is stacked first; both clouds must have the same
    size m >= 2. Singular directions below svd_tol * s_1 are dropped.
    """
    w = np.asarray(endpoints, dtype=float)
    x = np.asarray(targets, dtype=float)
    if w.ndim != 2 or x.ndim != 2 or w.shape[1] != x.shape[1]:
        raise ValueError("clouds must be 2-D with a common dimension")
    if w.shape[0] != x.shape[0]:
        raise ValueError(
            f"cloud sizes must match: {w.shape[0]} endpoints vs "
            f"{x.shape[0]} targets")
    m = w.shape[0]
    if m < 2:
        raise ValueError("need at least 2 points per cloud")

    g = quadratic_features(np.vstack([w, x]))
    mu = g.mean(axis=0)
    centered = g - mu
    scale = float(np.linalg.norm(centered))
    if scale == 0.0:
        raise DegenerateCloudError("all stacked feature rows are identical")
    _, s, vt = np.linalg.svd(centered / scale, full_matrices=False)
    keep = s > svd_tol * s[0]
    k = max(int(np.count_nonzero(keep)), 1)
    basis = vt[:k].T / s[:k]
    f = np.concatenate([np.full(m, 1.0 / m), np.full(m, -1.0 / m)])
    return PenaltyState(mu=mu, scale=scale, basis=basis, f=f, k_svd=k,
                        reference_targets=x.copy(), m=m)


def refit(state: PenaltyState, endpoints, svd_tol: float = 1e-8) -> PenaltyState:
    """Recompute the frozen statistics on the current endpoint cloud.

    Opt-in alternative to fully fixed statistics; gradients between refits
    still treat the statistics as constant (the SVD is not differentiated).
    """
    return fit_penalty(endpoints, state.reference_targets, svd_tol=svd_tol)


def _signed_sum(state: PenaltyState, endpoints) -> np.ndarray:
    w = np.asarray(endpoints, dtype=float)
    if w.shape[0] != state.m:
        raise ValueError(
            f"expected {state.m} endpoint rows, got {w.shape[0]}")
    return state.f @ state.whitened(w)


def penalty_value(state: PenaltyState, endpoints) -> float:
    """||f^T Q||^2 for the current endpoint cloud against the fixed targets."""
    r = _signed_sum(state, endpoints)
    return float(r @ r)


def penalty_grad(state: PenaltyState, endpoints) -> np.ndarray:
    """Per-point gradient of the penalty, shape (m, d).

    Only row i of the feature matrix depends on point i, so the gradient is
    (2 f_i / scale) * J_i^T (B r) with J_i the rowwise feature Jacobian.
    """
    w = np.asarray(endpoints, dtype=float)
    r = _signed_sum(state, w)
    u = state.basis @ r                       # (F,)
    d = w.shape[1]
    contract = np.tile(u[:d], (w.shape[0], 1))
    for row, (i, j) in enumerate(_quad_pairs(d), start=d):
        contract[:, i] += w[:, j] * u[row]
        contract[:, j] += w[:, i] * u[row]
    f_w = state.f[: state.m]
    return (2.0 * f_w / state.scale)[:, None] * contract
