import logging
from typing import List, Tuple

import numpy as np

from ._errors import ConfigurationError, DivergenceError, ShapeError
from ._operators import ForwardOperator

_logger = logging.getLogger("dmilo.optim")

MODE_SUBGRADIENT = "subgradient"
MODE_PROXIMAL = "proximal"
MODES = [MODE_SUBGRADIENT, MODE_PROXIMAL]

DEFAULT_INNER_LR = 0.02
DEFAULT_INNER_ITERS = 200
DEFAULT_LAMBDA = 0.1
DEFAULT_L2_WEIGHT = 1e-3
DEFAULT_BETA1 = 0.9
DEFAULT_BETA2 = 0.999
DEFAULT_EPS = 1e-8


class AdamState(object):
    """
    First/second moment estimates and step counter of the Adam optimizer.
    """

    def __init__(self, dim: int, lr: float = DEFAULT_INNER_LR, beta_1: float = DEFAULT_BETA1,
                 beta_2: float = DEFAULT_BETA2, eps_stab: float = DEFAULT_EPS):
        """
        Initializes a fresh state.

        :param dim: the number of parameters
        :type dim: int
        :param lr: the learning rate, > 0
        :type lr: float
        :param beta_1: the decay of the first moment, in (0, 1)
        :type beta_1: float
        :param beta_2: the decay of the second moment, in (0, 1)
        :type beta_2: float
        :param eps_stab: the stabilizer added to the denominator, > 0
        :type eps_stab: float
        """
        if not (lr > 0):
            raise ConfigurationError("Learning rate must be positive: %s" % str(lr))
        if not (0 < beta_1 < 1) or not (0 < beta_2 < 1):
            raise ConfigurationError("Adam decay rates must be in (0, 1): beta_1=%s, beta_2=%s" % (str(beta_1), str(beta_2)))
        if not (eps_stab > 0):
            raise ConfigurationError("Adam stabilizer must be positive: %s" % str(eps_stab))
        self.first_moment = np.zeros(dim)
        self.second_moment = np.zeros(dim)
        self.step_count = 0
        self.lr = lr
        self.beta_1 = beta_1
        self.beta_2 = beta_2
        self.eps_stab = eps_stab


def adam_step(st: AdamState, params, grad) -> Tuple[np.ndarray, AdamState]:
    """
    Bias-corrected Adam update. The moments in the state are updated in place.

    :param st: the optimizer state
    :type st: AdamState
    :param params: the current parameters
    :param grad: the gradient at the current parameters
    :return: the updated parameters and the state
    :rtype: tuple
    """
    params = np.asarray(params, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if (params.shape != grad.shape) or (params.shape != st.first_moment.shape):
        raise ShapeError("Adam dimensions disagree: params %s, grad %s, state %s"
                         % (str(params.shape), str(grad.shape), str(st.first_moment.shape)))
    st.step_count += 1
    st.first_moment *= st.beta_1
    st.first_moment += (1.0 - st.beta_1) * grad
    st.second_moment *= st.beta_2
    st.second_moment += (1.0 - st.beta_2) * (grad * grad)
    bc1 = 1.0 - st.beta_1 ** st.step_count
    bc2 = 1.0 - st.beta_2 ** st.step_count
    denom = np.sqrt(st.second_moment / bc2) + st.eps_stab
    return params - (st.lr / bc1) * st.first_moment / denom, st


def soft_threshold(v, kappa: float) -> np.ndarray:
    """
    Elementwise sign(v) * max(|v| - kappa, 0).

    :param v: the vector
    :param kappa: the threshold, >= 0
    :type kappa: float
    :return: the shrunk vector
    :rtype: np.ndarray
    """
    if kappa < 0:
        raise ConfigurationError("Threshold must be non-negative: %s" % str(kappa))
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - kappa, 0.0)


class Mapping(object):
    """
    Differentiable map with apply(x) and vjp(x, u).
    """

    def apply(self, x) -> np.ndarray:
        raise NotImplementedError()

    def vjp(self, x, u) -> np.ndarray:
        raise NotImplementedError()


class IdentityMapping(Mapping):

    def apply(self, x) -> np.ndarray:
        return np.array(x, dtype=float)

    def vjp(self, x, u) -> np.ndarray:
        return np.array(u, dtype=float)


class LinearMapping(Mapping):
    """
    x -> B x for an explicit square or rectangular matrix B.
    """

    def __init__(self, matrix):
        self.matrix = np.asarray(matrix, dtype=float)

    def apply(self, x) -> np.ndarray:
        return self.matrix @ x

    def vjp(self, x, u) -> np.ndarray:
        return self.matrix.T @ u


class InnerProblem(object):
    """
    min_{x, nu} ||target - outer(mapping(x) + nu)||^2 + lam * ||nu||_1 + l2_weight * ||x||^2, where outer is
    the identity unless a forward operator is supplied.
    """

    def __init__(self, target, mapping: Mapping, lam: float = DEFAULT_LAMBDA, l2_weight: float = 0.0,
                 iters: int = DEFAULT_INNER_ITERS, lr: float = DEFAULT_INNER_LR, outer: ForwardOperator = None,
                 freeze_nu: bool = False, beta_1: float = DEFAULT_BETA1, beta_2: float = DEFAULT_BETA2,
                 eps_stab: float = DEFAULT_EPS):
        """
        Initializes the problem.

        :param target: the vector to fit
        :param mapping: the differentiable map (a sampling step)
        :type mapping: Mapping
        :param lam: the l1 weight on the deviation, >= 0
        :type lam: float
        :param l2_weight: the l2 weight on x, >= 0
        :type l2_weight: float
        :param iters: the number of Adam steps, >= 1
        :type iters: int
        :param lr: the Adam learning rate
        :type lr: float
        :param outer: the forward operator applied after adding the deviation, optional
        :type outer: ForwardOperator
        :param freeze_nu: whether the deviation stays fixed at its start value
        :type freeze_nu: bool
        """
        if iters < 1:
            raise ConfigurationError("Inner iteration count must be at least 1: %d" % iters)
        if lam < 0:
            raise ConfigurationError("l1 weight must be non-negative: %s" % str(lam))
        if l2_weight < 0:
            raise ConfigurationError("l2 weight must be non-negative: %s" % str(l2_weight))
        self.target = np.asarray(target, dtype=float)
        self.mapping = mapping
        self.lam = lam
        self.l2_weight = l2_weight
        self.iters = iters
        self.lr = lr
        self.outer = outer
        self.freeze_nu = freeze_nu
        self.beta_1 = beta_1
        self.beta_2 = beta_2
        self.eps_stab = eps_stab

    def evaluate(self, x: np.ndarray, nu: np.ndarray, with_grad: bool = True):
        """
        Computes the loss and (optionally) the gradients of its smooth part.

        :param x: the latent
        :param nu: the deviation
        :param with_grad: whether to compute the gradients
        :type with_grad: bool
        :return: tuple of loss, grad_x, grad_nu (gradients None if not requested)
        :rtype: tuple
        """
        z = self.mapping.apply(x) + nu
        pred = z if self.outer is None else self.outer.apply(z)
        if pred.shape != self.target.shape:
            raise ShapeError("Prediction shape %s does not match target shape %s" % (str(pred.shape), str(self.target.shape)))
        r = pred - self.target
        loss = float(np.dot(r, r) + self.lam * np.sum(np.abs(nu)) + self.l2_weight * np.dot(x, x))
        if not with_grad:
            return loss, None, None
        g_z = 2.0 * r if self.outer is None else self.outer.vjp(z, 2.0 * r)
        grad_x = self.mapping.vjp(x, g_z) + 2.0 * self.l2_weight * x
        return loss, grad_x, g_z

    def loss(self, x, nu) -> float:
        return self.evaluate(np.asarray(x, dtype=float), np.asarray(nu, dtype=float), with_grad=False)[0]

    def exact_deviation(self, x) -> np.ndarray:
        """
        Returns the minimizer over nu for fixed x, soft_threshold(target - mapping(x), lam / 2). Requires the
        identity as outer operator.

        :param x: the latent
        :return: the deviation
        :rtype: np.ndarray
        """
        if self.outer is not None:
            raise ConfigurationError("Closed-form deviation requires the identity as outer operator")
        residual = self.target - self.mapping.apply(np.asarray(x, dtype=float))
        if residual.shape != self.target.shape:
            raise ShapeError("Prediction shape %s does not match target shape %s" % (str(residual.shape), str(self.target.shape)))
        return soft_threshold(residual, self.lam / 2.0)


class InnerResult(object):
    """
    Outcome of an inner solve: the returned iterates, the per-iteration losses and the final loss.
    """

    def __init__(self, x: np.ndarray, nu: np.ndarray, losses: List[float]):
        self.x = x
        self.nu = nu
        self.losses = losses

    @property
    def final_loss(self) -> float:
        return min(self.losses)

    def __iter__(self):
        return iter((self.x, self.nu, self.losses))


def solve_inner(p: InnerProblem, x0, nu0, mode: str = MODE_SUBGRADIENT) -> InnerResult:
    """
    Runs p.iters Adam steps jointly on (x, nu) from the warm start (x0, nu0). The subgradient mode uses
    sign(nu) for the l1 term, the proximal mode soft-thresholds nu by lr * lam after each step on the smooth
    part. The losses hold the start value and the value after every step; the iterate with the lowest loss is
    returned.

    :param p: the problem
    :type p: InnerProblem
    :param x0: the warm start for x
    :param nu0: the warm start for nu
    :param mode: subgradient or proximal
    :type mode: str
    :return: the result, unpacks to (x, nu, losses)
    :rtype: InnerResult
    """
    if mode not in MODES:
        raise ConfigurationError("Unknown inner mode: %s" % mode)
    x = np.array(x0, dtype=float)
    nu = np.array(nu0, dtype=float)
    if x.shape != nu.shape:
        raise ShapeError("Warm starts disagree: x %s, nu %s" % (str(x.shape), str(nu.shape)))
    n = len(x)
    st = AdamState(n if p.freeze_nu else 2 * n, lr=p.lr, beta_1=p.beta_1, beta_2=p.beta_2, eps_stab=p.eps_stab)
    losses = []
    best = (np.inf, x, nu)
    for it in range(p.iters + 1):
        loss, grad_x, grad_nu = p.evaluate(x, nu, with_grad=(it < p.iters))
        if not np.isfinite(loss):
            raise DivergenceError(it, loss)
        losses.append(loss)
        if loss < best[0]:
            best = (loss, x, nu)
        if it == p.iters:
            break
        if p.freeze_nu:
            x, st = adam_step(st, x, grad_x)
            continue
        if mode == MODE_SUBGRADIENT:
            grad_nu = grad_nu + p.lam * np.sign(nu)
        params, st = adam_step(st, np.concatenate([x, nu]), np.concatenate([grad_x, grad_nu]))
        x = params[:n]
        nu = params[n:]
        if mode == MODE_PROXIMAL:
            nu = soft_threshold(nu, p.lr * p.lam)
    _logger.debug("Inner solve: start loss %.6g, final loss %.6g" % (losses[0], best[0]))
    return InnerResult(best[1], best[2], losses)
