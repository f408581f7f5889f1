import itertools
import logging
from typing import List

import numpy as np

from dmilo.api import ForwardOperator, Schedule, GmmDenoiser, ConfigurationError, make_prior, make_schedule, \
    step_coefficients, ddim_step, gaussian_operator
from ._nets import sample_l1_ball
from ._srec import srec_gamma, apply_rows

_logger = logging.getLogger("dmilo.theory.theorem")

MAX_CANDIDATES = 1000000


class TheoryInstance(object):
    """
    Tiny two-stage generator for the brute-force recovery oracle: g2 maps the latent box [-1, 1]^d into R^n
    (affine map followed by tanh), g1 is the last sampling step with a single-Gaussian prior.
    """

    def __init__(self, weights: np.ndarray, bias: np.ndarray, schedule: Schedule, denoiser: GmmDenoiser,
                 delta: float, k: float, latent_grid: int, seed: int):
        """
        Initializes the instance.

        :param weights: the n x d matrix of g2
        :type weights: np.ndarray
        :param bias: the offset of g2
        :type bias: np.ndarray
        :param schedule: the schedule of g1
        :type schedule: Schedule
        :param denoiser: the single-Gaussian data prediction of g1
        :type denoiser: GmmDenoiser
        :param delta: the resolution
        :type delta: float
        :param k: the factor in r = k * delta / L1
        :type k: float
        :param latent_grid: the grid points per latent axis
        :type latent_grid: int
        :param seed: the seed of the instance
        :type seed: int
        """
        self.weights = weights
        self.bias = bias
        self.schedule = schedule
        self.denoiser = denoiser
        self.delta = delta
        self.k = k
        self.latent_grid = latent_grid
        self.seed = seed
        a, b = step_coefficients(schedule, 1)
        self.L1 = a + b * denoiser.prior.lipschitz_single(schedule, schedule.t(1))
        self.r = k * delta / self.L1

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def latent_dim(self) -> int:
        return self.weights.shape[1]

    def g2(self, z) -> np.ndarray:
        return np.tanh(np.asarray(z, dtype=float) @ self.weights.T + self.bias)

    def g1(self, x) -> np.ndarray:
        return ddim_step(self.schedule, self.denoiser, 1, x)

    def empirical_lipschitz(self, samples: int = 200, seed: int = 0) -> float:
        """
        Returns the largest ratio ||g1(u) - g1(v)|| / ||u - v|| over random pairs.
        """
        rng = np.random.default_rng(seed)
        u = rng.standard_normal((samples, self.n))
        v = rng.standard_normal((samples, self.n))
        return float(np.max(np.linalg.norm(self.g1(u) - self.g1(v), axis=1) / np.linalg.norm(u - v, axis=1)))

    def latent_points(self) -> np.ndarray:
        """
        The regular grid on [-1, 1]^d.
        """
        axis = np.linspace(-1.0, 1.0, self.latent_grid)
        return np.array(list(itertools.product(axis, repeat=self.latent_dim)))

    def candidates(self) -> np.ndarray:
        """
        Discretization of g2(box) + B_1^n(r) in enumeration order (latent point major, ball point minor).
        """
        ball = l1_ball_candidates(self.n, self.r)
        count = (self.latent_grid ** self.latent_dim) * len(ball)
        if count > MAX_CANDIDATES:
            raise ConfigurationError("Candidate set too large for exhaustive search: %d > %d" % (count, MAX_CANDIDATES))
        base = self.g2(self.latent_points())
        return (base[:, None, :] + ball[None, :, :]).reshape(-1, self.n)

    def sample_target(self, rng: np.random.Generator, offset: float) -> np.ndarray:
        """
        Draws x* = g1(g2(z) + b) + offset-scaled noise with z uniform in the box and b in the half-radius ball.
        """
        z = rng.uniform(-1.0, 1.0, self.latent_dim)
        b = sample_l1_ball(self.n, 0.5 * self.r, 1, int(rng.integers(0, 2 ** 31)))[0]
        x = self.g1(self.g2(z) + b)
        return x + offset * rng.standard_normal(self.n) / np.sqrt(self.n)


def l1_ball_candidates(n: int, r: float) -> np.ndarray:
    """
    The origin, the 2n scaled cross-polytope vertices and the midpoints of all non-antipodal pairs among these
    points (which stay inside the ball by convexity).

    :param n: the dimension
    :type n: int
    :param r: the radius
    :type r: float
    :return: the points as array
    :rtype: np.ndarray
    """
    vertices = np.concatenate([r * np.eye(n), -r * np.eye(n)])
    points = [np.zeros(n)] + list(vertices)
    for i in range(len(vertices)):
        points.append(0.5 * vertices[i])
    for i, j in itertools.combinations(range(len(vertices)), 2):
        if j == i + n:
            continue
        points.append(0.5 * (vertices[i] + vertices[j]))
    return np.array(points)


def make_theory_instance(n: int = 6, latent_dim: int = 2, delta: float = 0.05, k: float = 1.0, tau: float = 0.5,
                         N: int = 3, latent_grid: int = 21, seed: int = 0) -> TheoryInstance:
    """
    Creates a seeded instance.

    :param n: the signal dimension
    :type n: int
    :param latent_dim: the latent dimension of g2
    :type latent_dim: int
    :param delta: the resolution
    :type delta: float
    :param k: the factor in r = k * delta / L1, in (0, sqrt(n))
    :type k: float
    :param tau: the scale of the single-Gaussian prior
    :type tau: float
    :param N: the number of steps of the schedule whose last step is g1
    :type N: int
    :param latent_grid: the grid points per latent axis
    :type latent_grid: int
    :param seed: the seed
    :type seed: int
    :return: the instance
    :rtype: TheoryInstance
    """
    if not (0 < k < np.sqrt(n)):
        raise ConfigurationError("Factor k must be in (0, sqrt(n)): %s" % str(k))
    if not (delta > 0):
        raise ConfigurationError("Resolution must be positive: %s" % str(delta))
    if latent_grid < 2:
        raise ConfigurationError("Latent grid needs at least 2 points per axis: %d" % latent_grid)
    rng = np.random.default_rng(seed)
    weights = rng.standard_normal((n, latent_dim))
    bias = 0.1 * rng.standard_normal(n)
    mean = 0.5 * rng.standard_normal(n)
    schedule = make_schedule(N=N)
    prior = make_prior([1.0], [mean], tau)
    return TheoryInstance(weights, bias, schedule, GmmDenoiser(prior, schedule), delta, k, latent_grid, seed)


def recovery_bound_check(inst: TheoryInstance, A: ForwardOperator, xstar, gamma: float = None,
                   gamma_points: int = 300) -> dict:
    """
    Brute-forces the best approximation x_bar = argmin ||x* - g1(x)|| and the measurement optimum
    x_hat = argmin ||A x* - A g1(x)|| over the discretized extended range (ties go to the first candidate) and
    checks ||g1(x_hat) - x*|| <= (1 + 3/gamma) ||g1(x_bar) - x*|| + delta/gamma. Without gamma, the empirical
    constant over a seeded subset of candidate images plus both optima is used.

    :param inst: the instance
    :type inst: TheoryInstance
    :param A: the linear operator
    :type A: ForwardOperator
    :param xstar: the signal
    :param gamma: the constant to use, optional
    :type gamma: float
    :param gamma_points: the number of candidate images for the empirical constant
    :type gamma_points: int
    :return: the report
    :rtype: dict
    """
    xstar = np.asarray(xstar, dtype=float)
    images = inst.g1(inst.candidates())
    idx_bar = int(np.argmin(np.linalg.norm(images - xstar, axis=1)))
    meas = apply_rows(A, images)
    idx_hat = int(np.argmin(np.linalg.norm(meas - A.apply(xstar), axis=1)))
    empirical = None
    if gamma is None:
        rng = np.random.default_rng([inst.seed, 2])
        subset = rng.choice(len(images), size=min(gamma_points, len(images)), replace=False)
        pts = np.concatenate([images[subset], images[[idx_hat, idx_bar]]])
        empirical = srec_gamma(A, pts, inst.delta)
        gamma = empirical
    lhs = float(np.linalg.norm(images[idx_hat] - xstar))
    best = float(np.linalg.norm(images[idx_bar] - xstar))
    if gamma > 0:
        rhs = (1.0 + 3.0 / gamma) * best + inst.delta / gamma
    else:
        rhs = float("inf")
    return {
        "candidates": len(images),
        "index_hat": idx_hat,
        "index_bar": idx_bar,
        "gamma": gamma,
        "empirical_gamma": empirical,
        "lhs": lhs,
        "best": best,
        "rhs": rhs,
        "holds": lhs <= rhs,
    }


def recovery_bound_trials(instances: int, seed: int, n: int = 6, latent_dim: int = 2, m: int = 24, delta: float = 0.05,
                    k: float = 1.0, tau: float = 0.5, N: int = 3, latent_grid: int = 21, offset: float = 0.05,
                    gamma_points: int = 300) -> List[dict]:
    """
    Runs the brute-force oracle on seeded instances, each with its own generator, Gaussian operator and
    signal derived from (seed, instance index).

    :return: the per-instance reports
    :rtype: list
    """
    result = []
    for i in range(instances):
        inst = make_theory_instance(n=n, latent_dim=latent_dim, delta=delta, k=k, tau=tau, N=N,
                                    latent_grid=latent_grid, seed=int(np.random.SeedSequence([seed, i]).generate_state(1)[0]))
        rng = np.random.default_rng([seed, i, 1])
        A = gaussian_operator(m, n, [seed, i, 2])
        xstar = inst.sample_target(rng, offset)
        report = recovery_bound_check(inst, A, xstar, gamma_points=gamma_points)
        report["instance"] = i
        result.append(report)
        _logger.debug("Instance %d: lhs=%.6g rhs=%.6g" % (i, report["lhs"], report["rhs"]))
    return result
