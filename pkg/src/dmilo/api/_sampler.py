import csv
import logging
from typing import List, Tuple

import numpy as np

from ._errors import DomainError, ShapeError, SingularityError
from ._optim import Mapping
from ._prior import DenoiserInterface
from ._schedule import Schedule

_logger = logging.getLogger("dmilo.sampler")


class RetainedContextCounter(object):
    """
    Counts the per-step differentiation contexts that are held simultaneously, the portable stand-in for
    activation memory.
    """

    def __init__(self):
        self.current = 0
        self.peak = 0

    def acquire(self, count: int = 1):
        """
        Retains one or more contexts.

        :param count: the number of contexts
        :type count: int
        """
        self.current += count
        if self.current > self.peak:
            self.peak = self.current

    def release(self, count: int = 1):
        """
        Releases one or more contexts.

        :param count: the number of contexts
        :type count: int
        """
        if count > self.current:
            raise DomainError("Cannot release %d contexts, only %d retained" % (count, self.current))
        self.current -= count

    def __repr__(self):
        return "RetainedContextCounter(current=%d, peak=%d)" % (self.current, self.peak)


def check_step_index(s: Schedule, i: int):
    """
    Ensures 1 <= i <= N.
    """
    if (i < 1) or (i > s.N):
        raise DomainError("Sampling step index must be in [1, %d]: %d" % (s.N, i))


def step_coefficients(s: Schedule, i: int) -> Tuple[float, float]:
    """
    Returns (a, b) such that g_i(x) = a * x + b * x_theta(x, t_i), with
    a = sigma_{i-1} / sigma_i and b = sigma_{i-1} * (alpha_{i-1} / sigma_{i-1} - alpha_i / sigma_i).

    :param s: the schedule
    :type s: Schedule
    :param i: the step index, 1..N
    :type i: int
    :return: the coefficient pair
    :rtype: tuple
    """
    check_step_index(s, i)
    sigma_i = s.sigma_at(i)
    if sigma_i == 0:
        raise SingularityError("sigma vanishes at step %d" % i)
    sigma_prev = s.sigma_at(i - 1)
    alpha_i = s.alpha_at(i)
    alpha_prev = s.alpha_at(i - 1)
    a = sigma_prev / sigma_i
    b = alpha_prev - sigma_prev * alpha_i / sigma_i
    return a, b


def ddim_step(s: Schedule, d: DenoiserInterface, i: int, x) -> np.ndarray:
    """
    The deterministic first-order map g_i from t_i to t_{i-1}.

    :param s: the schedule
    :type s: Schedule
    :param d: the data-prediction model
    :type d: DenoiserInterface
    :param i: the step index, 1..N
    :type i: int
    :param x: the latent at t_i (vector or batch of vectors)
    :return: the latent at t_{i-1}
    :rtype: np.ndarray
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != d.n:
        raise ShapeError("Expected latent of dimension %d, got shape %s" % (d.n, str(x.shape)))
    a, b = step_coefficients(s, i)
    return a * x + b * d.predict(x, s.t(i))


def ddim_step_vjp(s: Schedule, d: DenoiserInterface, i: int, x, u) -> np.ndarray:
    """
    Returns u^T dg_i/dx = a * u + b * d.vjp(x, t_i, u).

    :param s: the schedule
    :type s: Schedule
    :param d: the data-prediction model
    :type d: DenoiserInterface
    :param i: the step index, 1..N
    :type i: int
    :param x: the point at which the step is differentiated
    :param u: the cotangent
    :return: the pulled back cotangent
    :rtype: np.ndarray
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape != u.shape:
        raise ShapeError("Cotangent shape %s does not match latent shape %s" % (str(u.shape), str(x.shape)))
    a, b = step_coefficients(s, i)
    return a * u + b * d.vjp(x, s.t(i), u)


def sample_compose(s: Schedule, d: DenoiserInterface, xT, counter: RetainedContextCounter = None,
                   retain_all: bool = False, last_step: int = None) -> Tuple[np.ndarray, List[np.ndarray]]:
    """
    Applies g_N, ..., g_1 to xT. With retain_all, one context per step stays acquired on the counter
    (to be released by compose_vjp); otherwise each step acquires and releases its own context.

    :param s: the schedule
    :type s: Schedule
    :param d: the data-prediction model
    :type d: DenoiserInterface
    :param xT: the latent at t_N
    :param counter: the context counter, optional
    :type counter: RetainedContextCounter
    :param retain_all: whether to keep all step contexts
    :type retain_all: bool
    :param last_step: the index of the first step to apply (default N)
    :type last_step: int
    :return: the final latent and the trace [x_{t_N}, ..., x_{t_0}]
    :rtype: tuple
    """
    if counter is None:
        counter = RetainedContextCounter()
    if last_step is None:
        last_step = s.N
    x = np.asarray(xT, dtype=float)
    trace = [x]
    for i in range(last_step, 0, -1):
        counter.acquire()
        x = ddim_step(s, d, i, x)
        if not retain_all:
            counter.release()
        trace.append(x)
    return x, trace


def compose_vjp(s: Schedule, d: DenoiserInterface, trace: List[np.ndarray], u,
                counter: RetainedContextCounter = None, retained: bool = True) -> np.ndarray:
    """
    Pulls the cotangent u at x_{t_0} back to x_{t_N} through the steps recorded in the trace,
    releasing each retained context once it has been used.

    :param s: the schedule
    :type s: Schedule
    :param d: the data-prediction model
    :type d: DenoiserInterface
    :param trace: the trace as returned by sample_compose
    :type trace: list
    :param u: the cotangent at the output
    :param counter: the context counter that holds the retained contexts
    :type counter: RetainedContextCounter
    :param retained: whether the contexts were retained during the forward pass
    :type retained: bool
    :return: the cotangent at the input
    :rtype: np.ndarray
    """
    steps = len(trace) - 1
    for i in range(1, steps + 1):
        u = ddim_step_vjp(s, d, i, trace[steps - i], u)
        if retained and (counter is not None):
            counter.release()
    return u


def write_trace_csv(trace: List[np.ndarray], path: str):
    """
    Writes the step index and the latent norm of each trace entry as CSV.

    :param trace: the trace [x_{t_N}, ..., x_{t_0}]
    :type trace: list
    :param path: the file to write to
    :type path: str
    """
    steps = len(trace) - 1
    with open(path, "w", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(["step", "norm"])
        for k, x in enumerate(trace):
            writer.writerow([steps - k, "%.12g" % float(np.linalg.norm(x))])
    _logger.debug("Trace with %d entries written to: %s" % (len(trace), path))


class StepMapping(Mapping):
    """
    The single sampling step g_i as a differentiable map.
    """

    def __init__(self, s: Schedule, d: DenoiserInterface, i: int):
        check_step_index(s, i)
        self.schedule = s
        self.denoiser = d
        self.i = i

    def apply(self, x) -> np.ndarray:
        return ddim_step(self.schedule, self.denoiser, self.i, x)

    def vjp(self, x, u) -> np.ndarray:
        return ddim_step_vjp(self.schedule, self.denoiser, self.i, x, u)


class ComposedMapping(Mapping):
    """
    The full composition G = g_1 o ... o g_N as a differentiable map that retains every step context between
    the forward pass and the backward pass.
    """

    def __init__(self, s: Schedule, d: DenoiserInterface, counter: RetainedContextCounter):
        self.schedule = s
        self.denoiser = d
        self.counter = counter
        self._trace = None

    def close(self):
        """
        Releases the contexts of a forward pass that was not differentiated.
        """
        if self._trace is not None:
            self.counter.release(len(self._trace) - 1)
            self._trace = None

    def apply(self, x) -> np.ndarray:
        self.close()
        result, self._trace = sample_compose(self.schedule, self.denoiser, x, counter=self.counter, retain_all=True)
        return result

    def vjp(self, x, u) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if (self._trace is None) or (not np.array_equal(self._trace[0], x)):
            self.apply(x)
        result = compose_vjp(self.schedule, self.denoiser, self._trace, u, counter=self.counter, retained=True)
        self._trace = None
        return result
