import numpy as np
import pytest

from action_ot import gauss_legendre
from action_ot.chebyshev import build_cache


def rel_err(approx, exact, floor=1e-12):
    approx = np.asarray(approx, dtype=float)
    exact = np.asarray(exact, dtype=float)
    return float(np.max(np.abs(approx - exact))
                 / max(float(np.max(np.abs(exact))), floor))


def central_diff(f, x, h=1e-6):
    """Central finite-difference gradient of scalar f at array x."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    flat = grad.ravel()
    xf = x.ravel()
    for i in range(xf.size):
        xp = xf.copy()
        xm = xf.copy()
        xp[i] += h
        xm[i] -= h
        flat[i] = (f(xp.reshape(x.shape)) - f(xm.reshape(x.shape))) / (2.0 * h)
    return grad


@pytest.fixture(scope="session")
def rule50():
    return gauss_legendre(50, 0.0, 1.0)


@pytest.fixture(scope="session")
def cache10(rule50):
    return build_cache(10, rule50)
