"""Background density models: value, gradient, and log-gradient.

All models are unnormalized (the proportionality constant is fixed to 1):
a constant factor rescales every action uniformly and leaves minimizing
paths and pairings unchanged. Evaluation is log-space throughout so that
rho^{-alpha} never amplifies underflow into garbage.
"""
from __future__ import annotations

import numpy as np

from .quadrature import gauss_legendre

__all__ = [
    "DensityModel",
    "StandardGaussian",
    "ConstantDensity",
    "GaussianMixture",
    "RingMixture",
    "ring_mixture",
    "density_eval",
    "density_from_config",
]


class DensityModel:
    """Evaluation interface: log rho, grad log rho, and derived quantities.

    Subclasses implement ``log_density`` and ``grad_log`` vectorized over
    leading axes: input shape (..., d) yields (...,) and (..., d).
    """

    dim: int

    def log_density(self, w: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad_log(self, w: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def density(self, w: np.ndarray) -> np.ndarray:
        return np.exp(self.log_density(np.asarray(w, dtype=float)))

    def log_and_grad(self, w: np.ndarray):
        """(log rho, grad log rho) in one pass; overridden where that saves work."""
        w = np.asarray(w, dtype=float)
        return self.log_density(w), self.grad_log(w)

    def eval_all(self, w: np.ndarray):
        """(rho, grad rho, grad log rho) at w."""
        w = np.asarray(w, dtype=float)
        log_rho, glog = self.log_and_grad(w)
        rho = np.exp(log_rho)
        return rho, rho[..., None] * glog, glog


def density_eval(model: DensityModel, w):
    """Evaluate (rho, grad, grad_log); thin wrapper over the model interface."""
    return model.eval_all(np.asarray(w, dtype=float))


class StandardGaussian(DensityModel):
    """rho(w) = exp(-||w||^2 / 2); grad log rho = -w."""

    def __init__(self, dim: int = 2):
        self.dim = dim

    def log_density(self, w):
        w = np.asarray(w, dtype=float)
        return -0.5 * np.sum(w * w, axis=-1)

    def grad_log(self, w):
        return -np.asarray(w, dtype=float)

    def log_and_grad(self, w):
        w = np.asarray(w, dtype=float)
        return -0.5 * np.sum(w * w, axis=-1), -w


class ConstantDensity(DensityModel):
    """Uniform background; gradients vanish identically."""

    def __init__(self, value: float = 1.0, dim: int = 2):
        if value <= 0:
            raise ValueError("constant density must be positive")
        self.value = float(value)
        self.dim = dim

    def log_density(self, w):
        w = np.asarray(w, dtype=float)
        return np.full(w.shape[:-1], np.log(self.value))

    def grad_log(self, w):
        return np.zeros_like(np.asarray(w, dtype=float))


def _mixture_logsumexp(sq_dists, log_weights, inv_two_sigma2):
    # exponents e_j = log w_j - ||x - m_j||^2 / (2 sigma_j^2), shifted by the
    # rowwise max so extreme tails keep full relative accuracy.
    expo = log_weights - sq_dists * inv_two_sigma2
    shift = np.max(expo, axis=-1)
    terms = np.exp(expo - shift[..., None])
    total = np.sum(terms, axis=-1)
    return shift + np.log(total), terms / total[..., None]


class _IsotropicMixtureCore:
    """Shared machinery for finite isotropic-Gaussian mixtures.

    Squared distances go through the ||w||^2 - 2 w.c + ||c||^2 expansion so
    evaluation is a single matrix product instead of a broadcast tensor;
    responsibilities then give grad log rho as another product.
    """

    means: np.ndarray          # (n_comp, d)
    log_weights: np.ndarray    # (n_comp,)
    inv_two_sigma2: np.ndarray  # (n_comp,)
    inv_sigma2: np.ndarray     # (n_comp,)

    def _setup(self, means, log_weights, sigmas):
        self.means = means
        self.log_weights = log_weights
        sigmas = np.asarray(sigmas, dtype=float)
        self.inv_sigma2 = 1.0 / (sigmas * sigmas)
        self.inv_two_sigma2 = 0.5 * self.inv_sigma2
        self._means_sq = np.sum(means * means, axis=1)

    def _sq_dists(self, flat):
        return (np.sum(flat * flat, axis=1)[:, None]
                - 2.0 * flat @ self.means.T + self._means_sq)

    def _log_core(self, w):
        w = np.asarray(w, dtype=float)
        lead = w.shape[:-1]
        flat = w.reshape(-1, w.shape[-1])
        log_rho, _ = _mixture_logsumexp(self._sq_dists(flat), self.log_weights,
                                        self.inv_two_sigma2)
        return log_rho.reshape(lead)

    def _log_and_grad_core(self, w):
        w = np.asarray(w, dtype=float)
        lead = w.shape[:-1]
        flat = w.reshape(-1, w.shape[-1])
        log_rho, resp = _mixture_logsumexp(self._sq_dists(flat),
                                           self.log_weights,
                                           self.inv_two_sigma2)
        scaled = resp * self.inv_sigma2
        grad = scaled @ self.means - np.sum(scaled, axis=1)[:, None] * flat
        return log_rho.reshape(lead), grad.reshape(w.shape)


class GaussianMixture(DensityModel, _IsotropicMixtureCore):
    """Finite mixture of isotropic Gaussians, unnormalized components.

    Components are (weight, mean, sigma) triples; rho(w) is the weighted sum
    of exp(-||w - mean||^2 / (2 sigma^2)).
    """

    def __init__(self, components):
        if not components:
            raise ValueError("mixture needs at least one component")
        weights, means, sigmas = [], [], []
        for weight, mean, sigma in components:
            if weight <= 0 or sigma <= 0:
                raise ValueError("component weights and sigmas must be positive")
            weights.append(float(weight))
            means.append(np.asarray(mean, dtype=float))
            sigmas.append(float(sigma))
        self._setup(np.stack(means), np.log(np.array(weights)), np.array(sigmas))
        self.sigmas = np.array(sigmas)
        self.dim = self.means.shape[1]

    def log_density(self, w):
        return self._log_core(w)

    def grad_log(self, w):
        return self._log_and_grad_core(w)[1]

    def log_and_grad(self, w):
        return self._log_and_grad_core(w)


class RingMixture(DensityModel, _IsotropicMixtureCore):
    """Continuous Gaussian mixture whose centers trace the unit circle.

    rho(w) = C_rho * sum_j q_j exp(-||w - c(z_j)||^2 / (2 sigma^2)) with
    c(z) = (cos z, sin z) and (z_j, q_j) a Gauss-Legendre rule mapped to
    [z_min, z_max].
    """

    def __init__(self, sigma: float, z_min: float, z_max: float,
                 n_z: int, c_rho: float = 1.0):
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        if n_z < 1:
            raise ValueError("need at least one z node")
        if not z_min < z_max:
            raise ValueError("need z_min < z_max")
        if c_rho <= 0:
            raise ValueError("C_rho must be positive")
        self.sigma = float(sigma)
        self.z_min = float(z_min)
        self.z_max = float(z_max)
        self.n_z = int(n_z)
        self.c_rho = float(c_rho)
        self.rule = gauss_legendre(n_z, z_min, z_max)
        z = self.rule.nodes
        centers = np.stack([np.cos(z), np.sin(z)], axis=1)
        self._setup(centers, np.log(self.rule.weights) + np.log(c_rho),
                    np.full(n_z, self.sigma))
        self.centers = centers
        self.dim = 2

    def log_density(self, w):
        return self._log_core(w)

    def grad_log(self, w):
        return self._log_and_grad_core(w)[1]

    def log_and_grad(self, w):
        return self._log_and_grad_core(w)


# Calibration defaults for the ring scene: thin annulus, rho well above
# underflow along any path that stays near the disk.
RING_DEFAULTS = dict(sigma=0.2, z_min=0.0, z_max=2.0 * np.pi, n_z=64, c_rho=1.0)


def ring_mixture(sigma: float, z_min: float, z_max: float, n_z: int,
                 c_rho: float = 1.0) -> RingMixture:
    """Factory mirroring the constructor; validates all preconditions."""
    return RingMixture(sigma=sigma, z_min=z_min, z_max=z_max, n_z=n_z, c_rho=c_rho)


def density_from_config(spec: dict) -> DensityModel:
    """Build a model from a config mapping {"kind": ..., parameters...}."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "gaussian":
        return StandardGaussian(dim=int(spec.pop("dim", 2)))
    if kind == "constant":
        return ConstantDensity(value=float(spec.pop("value", 1.0)),
                               dim=int(spec.pop("dim", 2)))
    if kind == "ring":
        params = dict(RING_DEFAULTS)
        params.update(spec)
        spec = {}
        return RingMixture(sigma=float(params["sigma"]),
                           z_min=float(params["z_min"]),
                           z_max=float(params["z_max"]),
                           n_z=int(params["n_z"]),
                           c_rho=float(params["c_rho"]))
    if kind == "mixture":
        comps = [(c["weight"], c["mean"], c["sigma"])
                 for c in spec.pop("components")]
        return GaussianMixture(comps)
    raise ValueError(f"unknown density kind: {kind!r}")
