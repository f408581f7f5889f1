import argparse

import numpy as np

from dmilo.api import Solver, RunReport, ForwardOperator, Schedule, SolverState, ConfigurationError, \
    measurement_residual, PROJECTIONS, PROJECTION_MEASUREMENT

DEFAULT_ETA = 0.5


def fidelity(y: np.ndarray, A: ForwardOperator, x: np.ndarray) -> float:
    """
    Returns ||y - A(x)||^2.
    """
    r = y - A.apply(x)
    return float(np.dot(r, r))


def fidelity_gradient(y: np.ndarray, A: ForwardOperator, x: np.ndarray) -> np.ndarray:
    """
    Gradient of ||y - A(x)||^2 in x, i.e., 2 * vjp(x, A(x) - y).
    """
    return 2.0 * A.vjp(x, A.apply(x) - y)


class DmiloPgd(Solver):
    """
    Projected gradient descent that uses intermediate-layer optimization as projection.
    """

    def __init__(self, eta: float = None, projection: str = None, **kwargs):
        """
        Initializes the solver.

        :param eta: the step size of the gradient step on the fidelity
        :type eta: float
        :param projection: what the layer-1 projection fits (measurement|distance)
        :type projection: str
        """
        super().__init__(**kwargs)
        self.eta = eta
        self.projection = projection

    def name(self) -> str:
        """
        Returns the name of the handler, used as sub-command.

        :return: the name
        :rtype: str
        """
        return "dmilo_pgd"

    def description(self) -> str:
        """
        Returns a description of the solver.

        :return: the description
        :rtype: str
        """
        return "Alternates a gradient step on the measurement fidelity, starting from the zero vector, with a " \
               "projection onto the extended range of the sampler by intermediate-layer optimization."

    def _create_argparser(self) -> argparse.ArgumentParser:
        """
        Creates an argument parser. Derived classes need to fill in the options.

        :return: the parser
        :rtype: argparse.ArgumentParser
        """
        parser = super()._create_argparser()
        parser.add_argument("--eta", type=float, metavar="FLOAT", help="The step size of the gradient step.", required=False, default=DEFAULT_ETA)
        parser.add_argument("--projection", choices=PROJECTIONS, help="Whether the layer-1 projection compares measurements of the gradient-step target or the target itself.", required=False, default=PROJECTION_MEASUREMENT)
        return parser

    def _apply_args(self, ns: argparse.Namespace):
        """
        Initializes the object with the arguments of the parsed namespace.

        :param ns: the parsed arguments
        :type ns: argparse.Namespace
        """
        super()._apply_args(ns)
        self.eta = ns.eta
        self.projection = ns.projection

    def initialize(self):
        """
        Fills in defaults and validates the options.
        """
        super().initialize()
        if self.eta is None:
            self.eta = DEFAULT_ETA
        if self.projection is None:
            self.projection = PROJECTION_MEASUREMENT
        if self.eta < 0:
            raise ConfigurationError("Step size must be non-negative: %s" % str(self.eta))
        if self.projection not in PROJECTIONS:
            raise ConfigurationError("Unknown projection: %s" % self.projection)

    def options(self) -> dict:
        result = super().options()
        result["eta"] = self.eta
        result["projection"] = self.projection
        return result

    def _project(self, s: Schedule, state: SolverState, A: ForwardOperator, target: np.ndarray):
        """
        Projects the gradient-step target onto the extended range and re-synthesizes the chain.
        """
        if self.projection == PROJECTION_MEASUREMENT:
            self._solve_layer(s, state, 1, A.apply(target), outer=A, l2_weight=self.l2_weight)
        else:
            self._solve_layer(s, state, 1, target, l2_weight=self.l2_weight)
        self._solve_upper_layers(s, state)
        state.resynthesize(s, self._denoiser)

    def _do_solve(self, y: np.ndarray, A: ForwardOperator, s: Schedule) -> RunReport:
        state = self._init_state(s)
        residual_init = measurement_residual(y, A, state.estimate)
        residuals = []
        fidelity_trace = []
        x0 = np.zeros(self._denoiser.n)
        for e in range(1, self.outer_iters + 1):
            state.outer_index = e
            before = fidelity(y, A, x0)
            x0 = x0 - self.eta * fidelity_gradient(y, A, x0)
            after = fidelity(y, A, x0)
            fidelity_trace.append({"before": before, "after": after})
            self._project(s, state, A, x0)
            x0 = state.estimate.copy()
            residuals.append(measurement_residual(y, A, x0))
            self.logger().info("Outer iteration %d/%d: fidelity %.6g -> %.6g, residual=%.6g"
                               % (e, self.outer_iters, before, after, residuals[-1]))
        estimate = x0 if self.outer_iters > 0 else state.estimate.copy()
        return RunReport(self.name(), estimate, residual_init, residuals, 0, 0, 0.0, self.seed, state=state,
                         fidelity_trace=fidelity_trace)
