import argparse

import numpy as np

from dmilo.api import RunReport, Schedule, BidState, Kernel, ConfigurationError, PROJECTIONS, PROJECTION_MEASUREMENT, \
    circ_conv, circ_corr, circ_conv_kernel_vjp
from ._bid import BlindSolver, kernel_residual, normalized


def conv_step_size(v: np.ndarray) -> float:
    """
    Returns 1/L for the gradient of ||y - c * v||^2 with respect to c, where L = 2 max |fft(v)|^2 bounds its
    Lipschitz constant. Convolution commutes, so this covers both the image step (v the impulse response of the
    kernel) and the kernel step (v the image). Returns 0 for a vanishing v.

    :param v: the fixed factor of the convolution
    :type v: np.ndarray
    :return: the step size
    :rtype: float
    """
    peak = float(np.max(np.abs(np.fft.fft(v)))) ** 2
    if peak == 0:
        return 0.0
    return 0.5 / peak


def impulse_response(kernel: Kernel, n: int) -> np.ndarray:
    """
    The first column of the circulant matrix of the kernel.
    """
    e = np.zeros(n)
    e[0] = 1.0
    return circ_conv(kernel, e)


class DmiloPgdBid(BlindSolver):
    """
    Blind deblurring with projected gradient descent: alternates image steps, projections and kernel steps.
    """

    def __init__(self, eta_x: float = None, eta_k: float = None, projection: str = None, **kwargs):
        """
        Initializes the solver.

        :param eta_x: the step size of the image gradient step
        :type eta_x: float
        :param eta_k: the step size of the kernel gradient step
        :type eta_k: float
        :param projection: what the layer-1 projection fits (measurement|distance)
        :type projection: str
        """
        super().__init__(**kwargs)
        self.eta_x = eta_x
        self.eta_k = eta_k
        self.projection = projection

    def name(self) -> str:
        """
        Returns the name of the handler, used as sub-command.

        :return: the name
        :rtype: str
        """
        return "dmilo_pgd_bid"

    def description(self) -> str:
        """
        Returns a description of the solver.

        :return: the description
        :rtype: str
        """
        return "Blind deblurring: gradient step on the image with the current kernel, projection by " \
               "intermediate-layer optimization against the kernel-filtered target, then a gradient step on the kernel."

    def _create_argparser(self) -> argparse.ArgumentParser:
        """
        Creates an argument parser. Derived classes need to fill in the options.

        :return: the parser
        :rtype: argparse.ArgumentParser
        """
        parser = super()._create_argparser()
        parser.add_argument("--eta_x", type=float, metavar="FLOAT", help="The step size of the image gradient step, 1/L of the current kernel if omitted.", required=False, default=None)
        parser.add_argument("--eta_k", type=float, metavar="FLOAT", help="The step size of the kernel gradient step, 1/L of the current image if omitted.", required=False, default=None)
        parser.add_argument("--projection", choices=PROJECTIONS, help="Whether the layer-1 projection compares filtered targets or the targets themselves.", required=False, default=PROJECTION_MEASUREMENT)
        return parser

    def _apply_args(self, ns: argparse.Namespace):
        """
        Initializes the object with the arguments of the parsed namespace.

        :param ns: the parsed arguments
        :type ns: argparse.Namespace
        """
        super()._apply_args(ns)
        self.eta_x = ns.eta_x
        self.eta_k = ns.eta_k
        self.projection = ns.projection

    def initialize(self):
        """
        Fills in defaults and validates the options.
        """
        super().initialize()
        if self.projection is None:
            self.projection = PROJECTION_MEASUREMENT
        if any((eta is not None) and (eta < 0) for eta in [self.eta_x, self.eta_k]):
            raise ConfigurationError("Step sizes must be non-negative: eta_x=%s, eta_k=%s" % (str(self.eta_x), str(self.eta_k)))
        if self.projection not in PROJECTIONS:
            raise ConfigurationError("Unknown projection: %s" % self.projection)

    def options(self) -> dict:
        result = super().options()
        result["eta_x"] = self.eta_x
        result["eta_k"] = self.eta_k
        result["projection"] = self.projection
        return result

    def _kernel_step(self, state: BidState, y: np.ndarray, x0: np.ndarray):
        eta_k = conv_step_size(x0) if (state.eta_k is None) else state.eta_k
        grad = 2.0 * circ_conv_kernel_vjp(state.kernel, x0, circ_conv(state.kernel, x0) - y)
        kernel = state.kernel.with_taps(state.kernel.taps - eta_k * grad)
        if self.normalize_kernel:
            kernel = normalized(kernel)
        self._check_kernel(state, kernel)
        state.kernel = kernel

    def _do_solve(self, y: np.ndarray, A, s: Schedule) -> RunReport:
        state = self._init_bid_state(s, self.eta_k)
        residual_init = kernel_residual(y, state.kernel, state.estimate)
        residuals = []
        fidelity_trace = []
        x0 = np.zeros(self._denoiser.n)
        for e in range(1, self.outer_iters + 1):
            state.outer_index = e
            before = kernel_residual(y, state.kernel, x0) ** 2
            eta_x = conv_step_size(impulse_response(state.kernel, len(x0))) if (self.eta_x is None) else self.eta_x
            x0 = x0 - eta_x * 2.0 * circ_corr(state.kernel, circ_conv(state.kernel, x0) - y)
            after = kernel_residual(y, state.kernel, x0) ** 2
            fidelity_trace.append({"before": before, "after": after})
            op = self._operator(state.kernel)
            if self.projection == PROJECTION_MEASUREMENT:
                self._solve_layer(s, state, 1, op.apply(x0), outer=op, l2_weight=self.l2_weight)
            else:
                self._solve_layer(s, state, 1, x0, l2_weight=self.l2_weight)
            self._solve_upper_layers(s, state)
            state.resynthesize(s, self._denoiser)
            x0 = state.estimate.copy()
            self._kernel_step(state, y, x0)
            residuals.append(kernel_residual(y, state.kernel, x0))
            self.logger().info("Outer iteration %d/%d: residual=%.6g" % (e, self.outer_iters, residuals[-1]))
        estimate = x0 if self.outer_iters > 0 else state.estimate.copy()
        return RunReport(self.name(), estimate, residual_init, residuals, 0, 0, 0.0, self.seed, state=state,
                         kernel=state.kernel, fidelity_trace=fidelity_trace)
