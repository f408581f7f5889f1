import logging
import math
from typing import List

import numpy as np

from dmilo.api import ConfigurationError

_logger = logging.getLogger("dmilo.theory.nets")


def _as_points(points) -> np.ndarray:
    """
    Turns a list of scalars or vectors into a (count, dim) array.
    """
    result = np.asarray(points, dtype=float)
    if result.ndim == 1:
        result = result[:, None]
    if (result.ndim != 2) or (result.shape[0] == 0):
        raise ConfigurationError("Points must be a non-empty list of scalars or vectors")
    return result


def greedy_epsilon_net(points, eps: float) -> np.ndarray:
    """
    Scans the points in order and adds every point that is farther than eps from all net points so far.
    Every input point ends up within eps of the net and the net points are mutually more than eps apart.

    :param points: the scalars or vectors to cover
    :param eps: the covering radius, > 0
    :type eps: float
    :return: the net as (size, dim) array
    :rtype: np.ndarray
    """
    if not (eps > 0):
        raise ConfigurationError("Net radius must be positive: %s" % str(eps))
    pts = _as_points(points)
    net = [pts[0]]
    net_arr = pts[:1]
    for p in pts[1:]:
        if np.min(np.linalg.norm(net_arr - p, axis=1)) > eps:
            net.append(p)
            net_arr = np.asarray(net)
    return np.asarray(net)


def covering_radius(points, net) -> float:
    """
    Returns the largest distance of a point to its closest net point.
    """
    pts = _as_points(points)
    net = _as_points(net)
    dists = np.linalg.norm(pts[:, None, :] - net[None, :, :], axis=2)
    return float(np.max(np.min(dists, axis=1)))


def sample_l1_ball(n: int, r: float, samples: int, seed: int) -> np.ndarray:
    """
    Draws points uniformly from the l1 ball of radius r in R^n (Dirichlet magnitudes, random signs).

    :param n: the dimension
    :type n: int
    :param r: the radius, >= 0
    :type r: float
    :param samples: the number of points
    :type samples: int
    :param seed: the seed
    :type seed: int
    :return: the points as (samples, n) array
    :rtype: np.ndarray
    """
    if r < 0:
        raise ConfigurationError("Radius must be non-negative: %s" % str(r))
    rng = np.random.default_rng(seed)
    magnitudes = rng.dirichlet(np.ones(n + 1), size=samples)[:, :n]
    signs = rng.choice([-1.0, 1.0], size=(samples, n))
    return r * magnitudes * signs


def maurey_check(n: int, r: float, L1: float, delta: float, samples: int, seed: int = 0) -> dict:
    """
    Builds a greedy (delta/L1)-net of points sampled from the l1 ball of radius r and compares its
    log-cardinality with (r^2 L1^2 / delta^2) log(3n).

    :param n: the dimension
    :type n: int
    :param r: the ball radius
    :type r: float
    :param L1: the Lipschitz constant
    :type L1: float
    :param delta: the target resolution
    :type delta: float
    :param samples: the number of sampled points
    :type samples: int
    :param seed: the seed
    :type seed: int
    :return: the report with net_size, log_net_size, bound and holds
    :rtype: dict
    """
    if (n < 1) or (samples < 1) or not (L1 > 0) or not (delta > 0):
        raise ConfigurationError("Maurey check requires positive parameters: n=%d, L1=%s, delta=%s, samples=%d"
                                 % (n, str(L1), str(delta), samples))
    points = sample_l1_ball(n, r, samples, seed)
    net = greedy_epsilon_net(points, delta / L1)
    log_size = math.log(len(net))
    bound = (r * r * L1 * L1 / (delta * delta)) * math.log(3 * n)
    _logger.debug("Maurey: net size %d for n=%d, r=%g, L1=%g, delta=%g" % (len(net), n, r, L1, delta))
    return {
        "net_size": len(net),
        "log_net_size": log_size,
        "bound": bound,
        "holds": log_size <= bound,
    }


def net_dimension_slope(points, eps_values: List[float]) -> dict:
    """
    Fits log(net size) against log(1/eps); for points on a k-dimensional manifold the slope is about k.

    :param points: the points to cover
    :param eps_values: the net radii
    :type eps_values: list
    :return: the report with the net sizes and the fitted slope
    :rtype: dict
    """
    if len(eps_values) < 2:
        raise ConfigurationError("Need at least two radii for a slope: %s" % str(eps_values))
    sizes = [len(greedy_epsilon_net(points, eps)) for eps in eps_values]
    slope = np.polyfit(np.log(1.0 / np.asarray(eps_values, dtype=float)), np.log(sizes), 1)[0]
    return {
        "eps": list(eps_values),
        "net_sizes": sizes,
        "slope": float(slope),
    }
