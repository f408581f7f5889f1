import logging
import math

import numpy as np
from scipy.spatial.distance import pdist

from dmilo.api import ForwardOperator, ConfigurationError, DegenerateInputError, DomainError, gaussian_operator

_logger = logging.getLogger("dmilo.theory.srec")


def apply_rows(A: ForwardOperator, points: np.ndarray) -> np.ndarray:
    """
    Applies a linear operator to each row.
    """
    if not A.is_linear:
        raise DomainError("Linear operator required, got: %s" % A.kind)
    return points @ A.matrix().T


def srec_gamma(A: ForwardOperator, points, delta: float) -> float:
    """
    Returns the minimum over distinct pairs of (||A(s1 - s2)|| + delta) / ||s1 - s2||, the largest gamma for
    which the points satisfy the set-restricted eigenvalue condition with slack delta.

    :param A: the linear operator
    :type A: ForwardOperator
    :param points: at least two vectors
    :param delta: the slack, >= 0
    :type delta: float
    :return: the constant
    :rtype: float
    """
    pts = np.asarray(points, dtype=float)
    if (pts.ndim != 2) or (pts.shape[0] < 2):
        raise ConfigurationError("At least two points required")
    if delta < 0:
        raise ConfigurationError("Slack must be non-negative: %s" % str(delta))
    dists = pdist(pts)
    meas = pdist(apply_rows(A, pts))
    keep = dists > 0
    if not np.any(keep):
        raise DegenerateInputError("All %d points coincide" % pts.shape[0])
    return float(np.min((meas[keep] + delta) / dists[keep]))


def concentration_bound(m: int, eps: float) -> float:
    """
    Returns 2 exp(-eps^2 (1 - eps) m / 4).
    """
    return 2.0 * math.exp(-eps * eps * (1.0 - eps) * m / 4.0)


def concentration_check(n: int, m: int, eps: float, trials: int, seed: int, x=None) -> dict:
    """
    Fixes a vector x and counts over seeded draws of A with i.i.d. N(0, 1/m) entries how often
    (1 - eps) ||x||^2 <= ||Ax||^2 <= (1 + eps) ||x||^2 fails. Trial t uses the stream (seed, t).

    :param n: the dimension
    :type n: int
    :param m: the number of measurements
    :type m: int
    :param eps: the relative deviation, in (0, 1)
    :type eps: float
    :param trials: the number of draws
    :type trials: int
    :param seed: the master seed
    :type seed: int
    :param x: the vector, drawn from N(0, I) if omitted
    :return: the report with failures, failure_rate and bound
    :rtype: dict
    """
    if not (0 < eps < 1):
        raise ConfigurationError("Deviation must be in (0, 1): %s" % str(eps))
    if trials < 1:
        raise ConfigurationError("Number of trials must be at least 1: %d" % trials)
    if x is None:
        x = np.random.default_rng(seed).standard_normal(n)
    x = np.asarray(x, dtype=float)
    norm2 = float(np.dot(x, x))
    failures = 0
    for t in range(trials):
        A = gaussian_operator(m, n, [seed, t])
        ax = A.apply(x)
        value = float(np.dot(ax, ax))
        if (value < (1.0 - eps) * norm2) or (value > (1.0 + eps) * norm2):
            failures += 1
    result = {
        "n": n,
        "m": m,
        "eps": eps,
        "trials": trials,
        "failures": failures,
        "failure_rate": failures / trials,
        "bound": concentration_bound(m, eps),
    }
    _logger.debug("Concentration m=%d: %d/%d failures" % (m, failures, trials))
    return result
