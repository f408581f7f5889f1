import math
from typing import Union

import numpy as np

from ._errors import ConfigurationError, DomainError

DEFAULT_BETA0 = 0.1
DEFAULT_BETA1 = 20.0
DEFAULT_EPSILON = 1e-3
DEFAULT_T = 1.0
DEFAULT_N = 3

TimeLike = Union[float, np.ndarray]


class Schedule(object):
    """
    Variance-preserving diffusion schedule on a uniform time grid over [epsilon, T].

    alpha(t) = exp(-1/2 * (beta0 * t + 1/2 * (beta1 - beta0) * t^2)), sigma(t) = sqrt(1 - alpha(t)^2).
    """

    def __init__(self, beta0: float, beta1: float, epsilon: float, T: float, N: int):
        """
        Initializes the schedule. Use make_schedule to get validation.

        :param beta0: the noise rate at t=0
        :type beta0: float
        :param beta1: the noise rate at t=1
        :type beta1: float
        :param epsilon: the start time of the grid
        :type epsilon: float
        :param T: the end time of the grid
        :type T: float
        :param N: the number of sampling steps
        :type N: int
        """
        self._beta0 = float(beta0)
        self._beta1 = float(beta1)
        self._epsilon = float(epsilon)
        self._T = float(T)
        self._N = int(N)
        self._grid = np.linspace(self._epsilon, self._T, self._N + 1)
        self._grid.setflags(write=False)

    @property
    def beta0(self) -> float:
        return self._beta0

    @property
    def beta1(self) -> float:
        return self._beta1

    @property
    def epsilon(self) -> float:
        return self._epsilon

    @property
    def T(self) -> float:
        return self._T

    @property
    def N(self) -> int:
        return self._N

    @property
    def grid(self) -> np.ndarray:
        """
        The times t_0 = epsilon < t_1 < ... < t_N = T (read-only).
        """
        return self._grid

    def _log_alpha(self, t: TimeLike) -> TimeLike:
        t = np.asarray(t, dtype=float)
        return -0.5 * (self._beta0 * t + 0.5 * (self._beta1 - self._beta0) * t * t)

    def alpha(self, t: TimeLike) -> TimeLike:
        """
        The signal coefficient alpha(t).

        :param t: the time(s), t >= 0
        :return: alpha(t) in (0, 1]
        """
        result = np.exp(self._log_alpha(t))
        return float(result) if np.ndim(result) == 0 else result

    def sigma(self, t: TimeLike) -> TimeLike:
        """
        The noise coefficient sigma(t) = sqrt(1 - alpha(t)^2), evaluated via expm1 for accuracy near t=0.

        :param t: the time(s), t >= 0
        :return: sigma(t) in [0, 1)
        """
        result = np.sqrt(-np.expm1(2.0 * self._log_alpha(t)))
        return float(result) if np.ndim(result) == 0 else result

    def t(self, i: int) -> float:
        """
        Returns the grid time t_i.

        :param i: the grid index, 0..N
        :type i: int
        :return: the time
        :rtype: float
        """
        if (i < 0) or (i > self._N):
            raise DomainError("Grid index must be in [0, %d]: %d" % (self._N, i))
        return float(self._grid[i])

    def alpha_at(self, i: int) -> float:
        return self.alpha(self.t(i))

    def sigma_at(self, i: int) -> float:
        return self.sigma(self.t(i))

    def check_time(self, t: float):
        """
        Ensures that the time lies within [epsilon, T].

        :param t: the time to check
        :type t: float
        """
        if (t < self._epsilon) or (t > self._T):
            raise DomainError("Time outside [%g, %g]: %g" % (self._epsilon, self._T, t))

    def with_steps(self, N: int) -> 'Schedule':
        """
        Returns a copy with a different step count.

        :param N: the new step count
        :type N: int
        :return: the new schedule
        :rtype: Schedule
        """
        return make_schedule(self._beta0, self._beta1, self._epsilon, self._T, N)

    def to_dict(self) -> dict:
        return {
            "beta0": self._beta0,
            "beta1": self._beta1,
            "epsilon": self._epsilon,
            "T": self._T,
            "N": self._N,
        }

    def __repr__(self):
        return "Schedule(beta0=%g, beta1=%g, epsilon=%g, T=%g, N=%d)" % (
            self._beta0, self._beta1, self._epsilon, self._T, self._N)


def make_schedule(beta0: float = DEFAULT_BETA0, beta1: float = DEFAULT_BETA1, epsilon: float = DEFAULT_EPSILON,
                  T: float = DEFAULT_T, N: int = DEFAULT_N) -> Schedule:
    """
    Creates a validated variance-preserving schedule.

    :param beta0: the noise rate at t=0, 0 < beta0 < beta1
    :type beta0: float
    :param beta1: the noise rate at t=1
    :type beta1: float
    :param epsilon: the start time, 0 < epsilon < T
    :type epsilon: float
    :param T: the end time
    :type T: float
    :param N: the number of sampling steps, >= 1
    :type N: int
    :return: the schedule
    :rtype: Schedule
    """
    if (N is None) or (int(N) != N) or (N < 1):
        raise ConfigurationError("Step count must be a positive integer: %s" % str(N))
    if not (epsilon > 0):
        raise ConfigurationError("Start time epsilon must be positive: %s" % str(epsilon))
    if epsilon >= T:
        raise ConfigurationError("Start time epsilon must be less than T: epsilon=%s, T=%s" % (str(epsilon), str(T)))
    if not (beta0 > 0):
        raise ConfigurationError("beta0 must be positive: %s" % str(beta0))
    if beta0 >= beta1:
        raise ConfigurationError("beta0 must be less than beta1: beta0=%s, beta1=%s" % (str(beta0), str(beta1)))
    return Schedule(beta0, beta1, epsilon, T, int(N))


def half_log_snr(s: Schedule, t: float) -> float:
    """
    Computes lambda_t = log(alpha(t) / sigma(t)), strictly decreasing in t.

    :param s: the schedule
    :type s: Schedule
    :param t: the time, within [epsilon, T]
    :type t: float
    :return: the half log signal-to-noise ratio
    :rtype: float
    """
    s.check_time(t)
    log_alpha = float(s._log_alpha(t))
    return log_alpha - 0.5 * math.log(-math.expm1(2.0 * log_alpha))
