import argparse
import time
from typing import Dict, List, Optional

import numpy as np
from seppl import PluginWithLogging
from wai.logging import LOGGING_WARNING

from ._errors import ConfigurationError, DivergenceError, ShapeError
from ._operators import ForwardOperator, Kernel
from ._optim import InnerProblem, InnerResult, solve_inner, MODES, MODE_SUBGRADIENT, DEFAULT_INNER_LR, \
    DEFAULT_INNER_ITERS, DEFAULT_LAMBDA, DEFAULT_L2_WEIGHT, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPS
from ._prior import DenoiserInterface, CountingDenoiser
from ._sampler import RetainedContextCounter, StepMapping, ddim_step, sample_compose
from ._schedule import Schedule

DEFAULT_OUTER_ITERS = 5
DEFAULT_SOLVER_SEED = 0


class SolverState(object):
    """
    The latents x_{t_0}, ..., x_{t_N} and the deviations nu_{t_1}, ..., nu_{t_N} of a solver run.
    latents[0] is the estimate x_{t_0}; deviations[0] is unused.
    """

    def __init__(self, latents: List[np.ndarray], deviations: List[np.ndarray], active_steps: int = None):
        """
        Initializes the state.

        :param latents: the N+1 latents, index 0 being the estimate
        :type latents: list
        :param deviations: the N+1 deviations, index 0 unused
        :type deviations: list
        :param active_steps: the number of steps that get optimized (all by default)
        :type active_steps: int
        """
        self.latents = latents
        self.deviations = deviations
        self.outer_index = 0
        self.active_steps = (len(latents) - 1) if active_steps is None else active_steps

    @property
    def N(self) -> int:
        return len(self.latents) - 1

    @property
    def estimate(self) -> np.ndarray:
        return self.latents[0]

    def copy(self) -> 'SolverState':
        result = SolverState([x.copy() for x in self.latents], [v.copy() for v in self.deviations], self.active_steps)
        result.outer_index = self.outer_index
        return result

    def resynthesize(self, s: Schedule, d: DenoiserInterface):
        """
        Recomputes x_{t_{i-1}} = g_i(x_{t_i}) + nu_{t_i} down the chain for the active steps.
        """
        for i in range(self.active_steps, 0, -1):
            self.latents[i - 1] = ddim_step(s, d, i, self.latents[i]) + self.deviations[i]

    def consistency_error(self, s: Schedule, d: DenoiserInterface) -> float:
        """
        Returns the largest deviation between the stored chain and its recomputation over the active steps.

        :return: the maximum absolute difference
        :rtype: float
        """
        result = 0.0
        for i in range(self.active_steps, 0, -1):
            expected = ddim_step(s, d, i, self.latents[i]) + self.deviations[i]
            result = max(result, float(np.max(np.abs(expected - self.latents[i - 1]))))
        return result


class BidState(SolverState):
    """
    Solver state plus the current kernel estimate and the kernel learning rate.
    """

    def __init__(self, latents: List[np.ndarray], deviations: List[np.ndarray], kernel: Kernel, eta_k: float,
                 active_steps: int = None):
        super().__init__(latents, deviations, active_steps=active_steps)
        self.kernel = kernel
        self.eta_k = eta_k

    @staticmethod
    def from_state(state: SolverState, kernel: Kernel, eta_k: float) -> 'BidState':
        result = BidState(state.latents, state.deviations, kernel, eta_k, active_steps=state.active_steps)
        result.outer_index = state.outer_index
        return result


class RunReport(object):
    """
    Outcome of one solver run.
    """

    def __init__(self, solver: str, estimate: np.ndarray, residual_init: float, residuals: List[float],
                 context_peak: int, nfe: int, wall_ms: float, seed: int, state: SolverState = None,
                 kernel: Kernel = None, fidelity_trace: List[Dict[str, float]] = None):
        self.solver = solver
        self.estimate = estimate
        self.residual_init = residual_init
        self.residuals = residuals
        self.context_peak = context_peak
        self.nfe = nfe
        self.wall_ms = wall_ms
        self.seed = seed
        self.state = state
        self.kernel = kernel
        self.fidelity_trace = [] if fidelity_trace is None else fidelity_trace
        self.metrics = None
        self.config = None
        self.config_hash = None
        self.flags = []

    @property
    def residual_final(self) -> float:
        if len(self.residuals) == 0:
            return self.residual_init
        return self.residuals[-1]

    def to_dict(self) -> dict:
        """
        Returns the report as JSON-serializable dictionary.

        :return: the dictionary
        :rtype: dict
        """
        result = {
            "solver": self.solver,
            "seed": self.seed,
            "estimate": self.estimate.tolist(),
            "residual_init": self.residual_init,
            "residual_final": self.residual_final,
            "residuals": list(self.residuals),
            "context_peak": self.context_peak,
            "nfe": self.nfe,
            "wall_ms": self.wall_ms,
            "config_hash": self.config_hash,
            "flags": list(self.flags),
        }
        if self.metrics is not None:
            result["metrics"] = self.metrics.to_dict()
        if self.kernel is not None:
            result["kernel"] = self.kernel.to_dict()
        if len(self.fidelity_trace) > 0:
            result["fidelity_trace"] = self.fidelity_trace
        if self.config is not None:
            result["config"] = self.config
        return result


def init_chain(s: Schedule, d: DenoiserInterface, seed: int, counter: RetainedContextCounter = None) -> SolverState:
    """
    Draws x_{t_N} ~ N(0, I) from the seed and fills the chain with one forward sampling sweep; all deviations
    are zero.

    :param s: the schedule
    :type s: Schedule
    :param d: the data-prediction model
    :type d: DenoiserInterface
    :param seed: the seed
    :type seed: int
    :param counter: the context counter, optional
    :type counter: RetainedContextCounter
    :return: the state
    :rtype: SolverState
    """
    rng = np.random.default_rng(seed)
    xT = rng.standard_normal(d.n)
    _, trace = sample_compose(s, d, xT, counter=counter, retain_all=False)
    latents = list(reversed(trace))
    deviations = [np.zeros(d.n) for _ in range(s.N + 1)]
    return SolverState(latents, deviations)


def measurement_residual(y: np.ndarray, A: ForwardOperator, x: np.ndarray) -> float:
    """
    Returns ||y - A(x)||_2.
    """
    return float(np.linalg.norm(y - A.apply(x)))


class Solver(PluginWithLogging):
    """
    Ancestor for the inverse-problem solvers. Constructor options default to None and are filled in by
    initialize().
    """

    def __init__(self, outer_iters: int = None, inner_iters: int = None, inner_lr: float = None,
                 lam: float = None, l2_weight: float = None, mode: str = None,
                 sparse_deviation: bool = None, last_timestep_only: bool = None, seed: int = None,
                 beta1: float = None, beta2: float = None, eps: float = None,
                 logger_name: str = None, logging_level: str = LOGGING_WARNING):
        """
        Initializes the solver.

        :param outer_iters: the number of outer iterations (J or E)
        :type outer_iters: int
        :param inner_iters: the number of Adam steps per layer subproblem
        :type inner_iters: int
        :param inner_lr: the Adam learning rate of the layer subproblems
        :type inner_lr: float
        :param lam: the l1 weight on the sparse deviations
        :type lam: float
        :param l2_weight: the l2 weight on the input of the last sampling step
        :type l2_weight: float
        :param mode: how the l1 term is handled (subgradient|proximal)
        :type mode: str
        :param sparse_deviation: whether the sparse deviations get optimized (frozen at 0 otherwise)
        :type sparse_deviation: bool
        :param last_timestep_only: whether to optimize through the last sampling step only
        :type last_timestep_only: bool
        :param seed: the seed for the initial latent
        :type seed: int
        :param beta1: Adam's first moment decay
        :type beta1: float
        :param beta2: Adam's second moment decay
        :type beta2: float
        :param eps: Adam's stabilizer
        :type eps: float
        :param logger_name: the name to use for the logger
        :type logger_name: str
        :param logging_level: the logging level to use
        :type logging_level: str
        """
        super().__init__(logger_name=logger_name, logging_level=logging_level)
        self.outer_iters = outer_iters
        self.inner_iters = inner_iters
        self.inner_lr = inner_lr
        self.lam = lam
        self.l2_weight = l2_weight
        self.mode = mode
        self.sparse_deviation = sparse_deviation
        self.last_timestep_only = last_timestep_only
        self.seed = seed
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._counter = None
        self._denoiser = None

    def _create_argparser(self) -> argparse.ArgumentParser:
        """
        Creates an argument parser. Derived classes need to fill in the options.

        :return: the parser
        :rtype: argparse.ArgumentParser
        """
        parser = super()._create_argparser()
        parser.add_argument("-J", "--outer_iters", type=int, metavar="INT", help="The number of outer iterations.", required=False, default=DEFAULT_OUTER_ITERS)
        parser.add_argument("--inner_iters", type=int, metavar="INT", help="The number of Adam steps per layer subproblem.", required=False, default=DEFAULT_INNER_ITERS)
        parser.add_argument("--inner_lr", type=float, metavar="FLOAT", help="The Adam learning rate of the layer subproblems.", required=False, default=DEFAULT_INNER_LR)
        parser.add_argument("--lam", type=float, metavar="FLOAT", help="The l1 weight (Lagrange multiplier) on the sparse deviations.", required=False, default=DEFAULT_LAMBDA)
        parser.add_argument("--l2_weight", type=float, metavar="FLOAT", help="The l2 weight on the input of the last sampling step.", required=False, default=DEFAULT_L2_WEIGHT)
        parser.add_argument("--mode", choices=MODES, help="How the l1 term is handled.", required=False, default=MODE_SUBGRADIENT)
        parser.add_argument("--no_sparse_deviation", action="store_true", help="Freezes the sparse deviations at zero.", required=False)
        parser.add_argument("--last_timestep_only", action="store_true", help="Optimizes through the last sampling step only.", required=False)
        parser.add_argument("--seed", type=int, metavar="SEED", help="The seed for the initial latent.", required=False, default=DEFAULT_SOLVER_SEED)
        parser.add_argument("--beta1", type=float, metavar="FLOAT", help="Adam's first moment decay.", required=False, default=DEFAULT_BETA1)
        parser.add_argument("--beta2", type=float, metavar="FLOAT", help="Adam's second moment decay.", required=False, default=DEFAULT_BETA2)
        parser.add_argument("--eps", type=float, metavar="FLOAT", help="Adam's stabilizer.", required=False, default=DEFAULT_EPS)
        return parser

    def _apply_args(self, ns: argparse.Namespace):
        """
        Initializes the object with the arguments of the parsed namespace.

        :param ns: the parsed arguments
        :type ns: argparse.Namespace
        """
        super()._apply_args(ns)
        self.outer_iters = ns.outer_iters
        self.inner_iters = ns.inner_iters
        self.inner_lr = ns.inner_lr
        self.lam = ns.lam
        self.l2_weight = ns.l2_weight
        self.mode = ns.mode
        self.sparse_deviation = not ns.no_sparse_deviation
        self.last_timestep_only = ns.last_timestep_only
        self.seed = ns.seed
        self.beta1 = ns.beta1
        self.beta2 = ns.beta2
        self.eps = ns.eps

    def is_blind(self) -> bool:
        """
        Returns whether the solver estimates the forward operator (kernel) itself.

        :return: True if blind
        :rtype: bool
        """
        return False

    def initialize(self):
        """
        Fills in defaults and validates the options.
        """
        if self.outer_iters is None:
            self.outer_iters = DEFAULT_OUTER_ITERS
        if self.inner_iters is None:
            self.inner_iters = DEFAULT_INNER_ITERS
        if self.inner_lr is None:
            self.inner_lr = DEFAULT_INNER_LR
        if self.lam is None:
            self.lam = DEFAULT_LAMBDA
        if self.l2_weight is None:
            self.l2_weight = DEFAULT_L2_WEIGHT
        if self.mode is None:
            self.mode = MODE_SUBGRADIENT
        if self.sparse_deviation is None:
            self.sparse_deviation = True
        if self.last_timestep_only is None:
            self.last_timestep_only = False
        if self.seed is None:
            self.seed = DEFAULT_SOLVER_SEED
        if self.beta1 is None:
            self.beta1 = DEFAULT_BETA1
        if self.beta2 is None:
            self.beta2 = DEFAULT_BETA2
        if self.eps is None:
            self.eps = DEFAULT_EPS
        if self.outer_iters < 0:
            raise ConfigurationError("Outer iteration count must be non-negative: %d" % self.outer_iters)
        if self.mode not in MODES:
            raise ConfigurationError("Unknown inner mode: %s" % self.mode)

    def options(self) -> dict:
        """
        Returns the effective options, for reports.

        :return: the options
        :rtype: dict
        """
        return {
            "outer_iters": self.outer_iters,
            "inner_iters": self.inner_iters,
            "inner_lr": self.inner_lr,
            "lam": self.lam,
            "l2_weight": self.l2_weight,
            "mode": self.mode,
            "sparse_deviation": self.sparse_deviation,
            "last_timestep_only": self.last_timestep_only,
            "seed": self.seed,
        }

    def _check_dims(self, y: np.ndarray, A: Optional[ForwardOperator], d: DenoiserInterface):
        if A is not None:
            if A.in_dim != d.n:
                raise ShapeError("Operator input dimension %d does not match signal dimension %d" % (A.in_dim, d.n))
            if y.shape != (A.out_dim,):
                raise ShapeError("Measurement shape %s does not match operator output dimension %d" % (str(y.shape), A.out_dim))
        elif y.shape != (d.n,):
            raise ShapeError("Measurement shape %s does not match signal dimension %d" % (str(y.shape), d.n))

    def _layer_problem(self, target: np.ndarray, mapping, outer: ForwardOperator = None,
                       l2_weight: float = 0.0) -> InnerProblem:
        """
        Creates a layer subproblem with the solver's inner settings.
        """
        return InnerProblem(target, mapping, lam=self.lam, l2_weight=l2_weight, iters=self.inner_iters,
                            lr=self.inner_lr, outer=outer, freeze_nu=not self.sparse_deviation,
                            beta_1=self.beta1, beta_2=self.beta2, eps_stab=self.eps)

    def _solve_layer(self, s: Schedule, state: SolverState, i: int, target: np.ndarray,
                     outer: ForwardOperator = None, l2_weight: float = 0.0) -> InnerResult:
        """
        Solves the subproblem of sampling step i warm-started at the stored (x_{t_i}, nu_{t_i}) and stores the
        result. Holds exactly one differentiation context while doing so.

        :param s: the schedule
        :type s: Schedule
        :param state: the state to update
        :type state: SolverState
        :param i: the step index
        :type i: int
        :param target: the vector to fit
        :param outer: the forward operator for the layer-1 measurement fit, optional
        :type outer: ForwardOperator
        :param l2_weight: the l2 weight on x
        :type l2_weight: float
        :return: the inner result
        :rtype: InnerResult
        """
        problem = self._layer_problem(target, StepMapping(s, self._denoiser, i), outer=outer, l2_weight=l2_weight)
        self._counter.acquire()
        try:
            result = solve_inner(problem, state.latents[i], state.deviations[i], mode=self.mode)
        except DivergenceError as e:
            raise e.locate(layer=i, outer=state.outer_index)
        finally:
            self._counter.release()
        # for fixed x the deviation has a closed-form minimizer
        if (outer is None) and self.sparse_deviation:
            result.nu = problem.exact_deviation(result.x)
            self.logger().debug("Outer %d, layer %d: exact deviation, loss %.6g" % (state.outer_index, i, problem.loss(result.x, result.nu)))
        state.latents[i] = result.x
        state.deviations[i] = result.nu
        self.logger().debug("Outer %d, layer %d: loss %.6g -> %.6g" % (state.outer_index, i, result.losses[0], result.final_loss))
        return result

    def _solve_upper_layers(self, s: Schedule, state: SolverState):
        """
        Solves the layer subproblems i = 2..N against the freshly solved x_{t_{i-1}}.
        """
        for i in range(2, state.active_steps + 1):
            self._solve_layer(s, state, i, state.latents[i - 1])

    def _init_state(self, s: Schedule) -> SolverState:
        state = init_chain(s, self._denoiser, self.seed, counter=self._counter)
        if self.last_timestep_only:
            state.active_steps = 1
        return state

    def _do_solve(self, y: np.ndarray, A: Optional[ForwardOperator], s: Schedule) -> RunReport:
        """
        Performs the actual solving.

        :param y: the measurement
        :param A: the forward operator (None for blind solvers)
        :param s: the schedule
        :return: the report (wall time, context peak and NFE get filled in by solve)
        :rtype: RunReport
        """
        raise NotImplementedError()

    def solve(self, y, A: Optional[ForwardOperator], s: Schedule, d: DenoiserInterface) -> RunReport:
        """
        Solves the inverse problem y = A(x) + noise.

        :param y: the measurement
        :param A: the forward operator (ignored by blind solvers)
        :type A: ForwardOperator
        :param s: the schedule
        :type s: Schedule
        :param d: the data-prediction model
        :type d: DenoiserInterface
        :return: the report
        :rtype: RunReport
        """
        y = np.asarray(y, dtype=float)
        self._check_dims(y, None if self.is_blind() else A, d)
        self._counter = RetainedContextCounter()
        self._denoiser = CountingDenoiser(d)
        start = time.perf_counter()
        report = self._do_solve(y, None if self.is_blind() else A, s)
        report.wall_ms = (time.perf_counter() - start) * 1000.0
        report.context_peak = self._counter.peak
        report.nfe = self._denoiser.nfe
        if self._counter.current != 0:
            self.logger().warning("%d differentiation contexts still retained after run" % self._counter.current)
        return report
