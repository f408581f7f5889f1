import json
import logging
import math
from typing import Tuple

import numpy as np
from scipy.special import logsumexp, softmax

from ._errors import ConfigurationError, ShapeError, SingularityError
from ._schedule import Schedule

_logger = logging.getLogger("dmilo.prior")

DEFAULT_K = 5
DEFAULT_DIM = 16
DEFAULT_TAU = 0.1
DEFAULT_PRIOR_SEED = 0


class GmmPrior(object):
    """
    Gaussian mixture prior with isotropic components: p_0 = sum_k w_k N(mu_k, tau_k^2 I).
    Under the forward process the marginal at time t is sum_k w_k N(alpha_t mu_k, (alpha_t^2 tau_k^2 + sigma_t^2) I),
    which makes score, data prediction and its Jacobian available in closed form.
    """

    def __init__(self, weights, means, stddevs):
        """
        Initializes the prior. Use make_prior to get validation.

        :param weights: the K mixture weights
        :param means: the K x n component means
        :param stddevs: the K isotropic component scales tau_k
        """
        self._weights = np.array(weights, dtype=float)
        self._means = np.array(means, dtype=float)
        self._stddevs = np.array(stddevs, dtype=float)
        for a in (self._weights, self._means, self._stddevs):
            a.setflags(write=False)
        self._log_weights = np.log(self._weights)

    @property
    def K(self) -> int:
        return len(self._weights)

    @property
    def n(self) -> int:
        return self._means.shape[1]

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def means(self) -> np.ndarray:
        return self._means

    @property
    def stddevs(self) -> np.ndarray:
        return self._stddevs

    def _check_x(self, x) -> Tuple[np.ndarray, bool]:
        """
        Turns x into a (batch, n) array.

        :return: the 2-d array and whether the input was a single vector
        :rtype: tuple
        """
        x = np.asarray(x, dtype=float)
        single = (x.ndim == 1)
        x2 = np.atleast_2d(x)
        if (x2.ndim != 2) or (x2.shape[1] != self.n):
            raise ShapeError("Expected vector(s) of dimension %d, got shape %s" % (self.n, str(x.shape)))
        return x2, single

    def _components(self, x2: np.ndarray, alpha: float, sigma: float):
        """
        Computes the per-component quantities of the marginal at coefficients (alpha, sigma).

        :return: tuple of variances (K,), differences x - alpha*mu (B, K, n), log joint terms (B, K)
        :rtype: tuple
        """
        variances = alpha * alpha * self._stddevs ** 2 + sigma * sigma
        diff = x2[:, None, :] - alpha * self._means[None, :, :]
        sq = np.sum(diff * diff, axis=2)
        log_terms = (self._log_weights[None, :]
                     - 0.5 * self.n * np.log(2.0 * math.pi * variances)[None, :]
                     - 0.5 * sq / variances[None, :])
        return variances, diff, log_terms

    def log_density_at(self, x, alpha: float, sigma: float):
        """
        Log of the marginal density for explicit coefficients (alpha, sigma).

        :param x: the vector or (batch, n) array
        :param alpha: the signal coefficient
        :type alpha: float
        :param sigma: the noise coefficient
        :type sigma: float
        :return: the log density (float for a single vector)
        """
        x2, single = self._check_x(x)
        _, _, log_terms = self._components(x2, alpha, sigma)
        result = logsumexp(log_terms, axis=1)
        return float(result[0]) if single else result

    def score_at(self, x, alpha: float, sigma: float) -> np.ndarray:
        """
        Gradient of the marginal log density for explicit coefficients (alpha, sigma).
        """
        x2, single = self._check_x(x)
        variances, diff, log_terms = self._components(x2, alpha, sigma)
        resp = softmax(log_terms, axis=1)
        comp_scores = -diff / variances[None, :, None]
        result = np.einsum("bk,bkn->bn", resp, comp_scores)
        return result[0] if single else result

    def _posterior(self, x2: np.ndarray, alpha: float, sigma: float):
        """
        Computes responsibilities, per-component posterior means and gains at coefficients (alpha, sigma).

        :return: tuple of responsibilities (B, K), component scores (B, K, n), posterior means (B, K, n),
                 gains alpha * tau_k^2 / v_k (K,)
        :rtype: tuple
        """
        variances, diff, log_terms = self._components(x2, alpha, sigma)
        resp = softmax(log_terms, axis=1)
        comp_scores = -diff / variances[None, :, None]
        gains = alpha * self._stddevs ** 2 / variances
        means = self._means[None, :, :] + gains[None, :, None] * diff
        return resp, comp_scores, means, gains

    def denoise_at(self, x, alpha: float, sigma: float) -> np.ndarray:
        """
        Posterior mean E[x_0 | x_t = x] = sum_k r_k (mu_k + alpha tau_k^2 / v_k (x - alpha mu_k)), which equals the
        Tweedie form (x + sigma^2 * score) / alpha without dividing by a small alpha.
        """
        if alpha == 0:
            raise SingularityError("Data prediction undefined for alpha = 0")
        x2, single = self._check_x(x)
        resp, _, means, _ = self._posterior(x2, alpha, sigma)
        result = np.einsum("bk,bkn->bn", resp, means)
        return result[0] if single else result

    def denoise_vjp_at(self, x, alpha: float, sigma: float, u) -> np.ndarray:
        """
        Returns u^T d(denoise)/dx for explicit coefficients (alpha, sigma).

        With m_k the component posterior means, c_k their gains, s_k the component scores and S the mixture
        score: u^T J = (sum_k r_k c_k) u + sum_k r_k <m_k, u> (s_k - S).
        """
        if alpha == 0:
            raise SingularityError("Data prediction undefined for alpha = 0")
        x2, single = self._check_x(x)
        u2 = np.atleast_2d(np.asarray(u, dtype=float))
        if u2.shape != x2.shape:
            raise ShapeError("Cotangent shape %s does not match point shape %s" % (str(np.shape(u)), str(np.shape(x))))
        resp, comp_scores, means, gains = self._posterior(x2, alpha, sigma)
        score = np.einsum("bk,bkn->bn", resp, comp_scores)
        proj = np.einsum("bkn,bn->bk", means, u2)
        result = ((resp @ gains)[:, None] * u2
                  + np.einsum("bk,bkn->bn", resp * proj, comp_scores - score[:, None, :]))
        return result[0] if single else result

    def lipschitz_single(self, s: Schedule, t: float) -> float:
        """
        Lipschitz constant of the data prediction at time t for a single-component prior,
        alpha * tau^2 / (alpha^2 * tau^2 + sigma^2).

        :param s: the schedule
        :type s: Schedule
        :param t: the time
        :type t: float
        :return: the constant
        :rtype: float
        """
        if self.K != 1:
            raise ConfigurationError("Closed-form Lipschitz constant requires K=1, got K=%d" % self.K)
        alpha = s.alpha(t)
        sigma = s.sigma(t)
        tau2 = float(self._stddevs[0]) ** 2
        return alpha * tau2 / (alpha * alpha * tau2 + sigma * sigma)

    def to_dict(self) -> dict:
        return {
            "weights": self._weights.tolist(),
            "means": self._means.tolist(),
            "stddevs": self._stddevs.tolist(),
        }


def make_prior(weights, means, stddevs) -> GmmPrior:
    """
    Creates a validated mixture prior.

    :param weights: K positive weights summing to 1
    :param means: K means of equal dimension n
    :param stddevs: K positive scales, or a single scale used for all components
    :return: the prior
    :rtype: GmmPrior
    """
    weights = np.asarray(weights, dtype=float)
    means = np.atleast_2d(np.asarray(means, dtype=float))
    if weights.ndim != 1 or len(weights) == 0:
        raise ConfigurationError("Weights must be a non-empty vector")
    if means.ndim != 2 or means.shape[0] != len(weights):
        raise ShapeError("Expected %d means, got array of shape %s" % (len(weights), str(means.shape)))
    stddevs = np.asarray(stddevs, dtype=float)
    if stddevs.ndim == 0:
        stddevs = np.full(len(weights), float(stddevs))
    if stddevs.shape != weights.shape:
        raise ShapeError("Expected %d component scales, got %d" % (len(weights), stddevs.size))
    if np.any(weights <= 0):
        raise ConfigurationError("Weights must be strictly positive: %s" % str(weights.tolist()))
    if abs(weights.sum() - 1.0) > 1e-12:
        raise ConfigurationError("Weights must sum to 1: %.15g" % weights.sum())
    if np.any(stddevs <= 0):
        raise ConfigurationError("Component scales must be positive: %s" % str(stddevs.tolist()))
    return GmmPrior(weights, means, stddevs)


def make_toy_prior(K: int = DEFAULT_K, n: int = DEFAULT_DIM, tau: float = DEFAULT_TAU,
                   seed: int = DEFAULT_PRIOR_SEED) -> GmmPrior:
    """
    Creates the experiment prior: K equally weighted components whose means are drawn once from a seeded
    standard normal and scaled into [-1, 1], all with scale tau.

    :param K: the number of components
    :type K: int
    :param n: the signal dimension
    :type n: int
    :param tau: the component scale
    :type tau: float
    :param seed: the seed for the means
    :type seed: int
    :return: the prior
    :rtype: GmmPrior
    """
    if K < 1:
        raise ConfigurationError("Component count must be at least 1: %d" % K)
    if n < 1:
        raise ConfigurationError("Dimension must be at least 1: %d" % n)
    rng = np.random.default_rng(seed)
    means = rng.standard_normal((K, n))
    scale = np.max(np.abs(means))
    if scale > 0:
        means = means / scale
    _logger.debug("Toy prior: K=%d, n=%d, tau=%g, seed=%d" % (K, n, tau, seed))
    return make_prior(np.full(K, 1.0 / K), means, tau)


def load_prior(path: str) -> GmmPrior:
    """
    Loads a prior from a JSON file with keys 'means', 'weights' (optional, uniform if missing) and
    'stddevs' or 'tau'.

    :param path: the JSON file
    :type path: str
    :return: the prior
    :rtype: GmmPrior
    """
    with open(path, "r") as fp:
        d = json.load(fp)
    return prior_from_dict(d)


def prior_from_dict(d: dict) -> GmmPrior:
    """
    Creates a prior from an explicit dictionary of means/weights/scales.

    :param d: the dictionary
    :type d: dict
    :return: the prior
    :rtype: GmmPrior
    """
    if "means" not in d:
        raise ConfigurationError("Explicit prior requires 'means'")
    means = np.atleast_2d(np.asarray(d["means"], dtype=float))
    weights = d.get("weights", None)
    if weights is None:
        weights = np.full(means.shape[0], 1.0 / means.shape[0])
    stddevs = d.get("stddevs", d.get("tau", DEFAULT_TAU))
    return make_prior(weights, means, stddevs)


def _check_t(s: Schedule, t: float) -> Tuple[float, float]:
    s.check_time(t)
    return s.alpha(t), s.sigma(t)


def marginal_log_density(p: GmmPrior, s: Schedule, x, t: float) -> float:
    """
    Log of sum_k w_k N(x; alpha_t mu_k, (alpha_t^2 tau_k^2 + sigma_t^2) I), log-sum-exp stabilized.
    """
    alpha, sigma = _check_t(s, t)
    return p.log_density_at(x, alpha, sigma)


def score(p: GmmPrior, s: Schedule, x, t: float) -> np.ndarray:
    """
    Exact gradient of the marginal log density in x.
    """
    alpha, sigma = _check_t(s, t)
    return p.score_at(x, alpha, sigma)


def denoise(p: GmmPrior, s: Schedule, x, t: float) -> np.ndarray:
    """
    Exact data prediction x_theta(x, t) = E[x_0 | x_t = x].
    """
    alpha, sigma = _check_t(s, t)
    return p.denoise_at(x, alpha, sigma)


def denoise_vjp(p: GmmPrior, s: Schedule, x, t: float, u) -> np.ndarray:
    """
    Vector-Jacobian product u^T d(denoise)/dx.
    """
    alpha, sigma = _check_t(s, t)
    return p.denoise_vjp_at(x, alpha, sigma, u)


def sample_prior(p: GmmPrior, seed: int, count: int) -> np.ndarray:
    """
    Draws i.i.d. samples: component by weight, then mean plus tau_k-scaled Gaussian noise.

    :param p: the prior
    :type p: GmmPrior
    :param seed: the seed
    :type seed: int
    :param count: the number of samples, >= 1
    :type count: int
    :return: the samples as (count, n) array
    :rtype: np.ndarray
    """
    if count < 1:
        raise ConfigurationError("Sample count must be at least 1: %d" % count)
    rng = np.random.default_rng(seed)
    comps = rng.choice(p.K, size=count, p=p.weights)
    noise = rng.standard_normal((count, p.n))
    return p.means[comps] + p.stddevs[comps][:, None] * noise


class DenoiserInterface(object):
    """
    Data-prediction network contract: predict(x, t) and its vector-Jacobian product vjp(x, t, u).
    """

    @property
    def n(self) -> int:
        raise NotImplementedError()

    def predict(self, x, t: float) -> np.ndarray:
        raise NotImplementedError()

    def vjp(self, x, t: float, u) -> np.ndarray:
        raise NotImplementedError()


class GmmDenoiser(DenoiserInterface):
    """
    The exact data prediction of a mixture prior.
    """

    def __init__(self, prior: GmmPrior, schedule: Schedule):
        self.prior = prior
        self.schedule = schedule

    @property
    def n(self) -> int:
        return self.prior.n

    def predict(self, x, t: float) -> np.ndarray:
        return denoise(self.prior, self.schedule, x, t)

    def vjp(self, x, t: float, u) -> np.ndarray:
        return denoise_vjp(self.prior, self.schedule, x, t, u)


class CountingDenoiser(DenoiserInterface):
    """
    Wraps a denoiser and counts the function evaluations (predict and vjp calls, per vector).
    """

    def __init__(self, base: DenoiserInterface):
        self.base = base
        self.nfe = 0

    @property
    def n(self) -> int:
        return self.base.n

    def _count(self, x):
        self.nfe += 1 if np.ndim(x) <= 1 else np.shape(x)[0]

    def predict(self, x, t: float) -> np.ndarray:
        self._count(x)
        return self.base.predict(x, t)

    def vjp(self, x, t: float, u) -> np.ndarray:
        self._count(x)
        return self.base.vjp(x, t, u)
