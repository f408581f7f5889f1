import numpy as np
import pytest

from dmilo.api import make_schedule, make_toy_prior, GmmDenoiser


def central_difference_vjp(f, x, u, h: float = 1e-6) -> np.ndarray:
    """
    Approximates u^T df/dx by central differences of the scalar <u, f(x)>.

    :param f: the map
    :param x: the point
    :param u: the cotangent
    :param h: the step
    :type h: float
    :return: the approximated vector-Jacobian product
    :rtype: np.ndarray
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    result = np.zeros_like(x)
    for j in range(len(x)):
        e = np.zeros_like(x)
        e[j] = h
        result[j] = (np.dot(u, f(x + e)) - np.dot(u, f(x - e))) / (2.0 * h)
    return result


def relative_error(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))


@pytest.fixture
def schedule():
    return make_schedule()


@pytest.fixture
def prior():
    return make_toy_prior(K=3, n=8, tau=0.3, seed=0)


@pytest.fixture
def denoiser(prior, schedule):
    return GmmDenoiser(prior, schedule)


@pytest.fixture
def rng():
    return np.random.default_rng(42)
