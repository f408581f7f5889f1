import numpy as np

from dmilo.api import Solver, RunReport, ForwardOperator, Schedule, SolverState, ComposedMapping, InnerProblem, \
    DivergenceError, solve_inner, sample_compose, measurement_residual


class Dmplug(Solver):
    """
    Baseline that only optimizes the initial latent through the full composition of sampling steps.
    """

    def name(self) -> str:
        """
        Returns the name of the handler, used as sub-command.

        :return: the name
        :rtype: str
        """
        return "dmplug"

    def description(self) -> str:
        """
        Returns a description of the solver.

        :return: the description
        :rtype: str
        """
        return "Optimizes the initial latent with Adam through all sampling steps at once, retaining the " \
               "differentiation context of every step."

    def _chain(self, s: Schedule, xT: np.ndarray) -> SolverState:
        _, trace = sample_compose(s, self._denoiser, xT, counter=self._counter)
        return SolverState(list(reversed(trace)), [np.zeros(self._denoiser.n) for _ in range(s.N + 1)])

    def _do_solve(self, y: np.ndarray, A: ForwardOperator, s: Schedule) -> RunReport:
        state = self._init_state(s)
        state.active_steps = s.N
        residual_init = measurement_residual(y, A, state.estimate)
        residuals = []
        xT = state.latents[s.N]
        zeros = np.zeros(self._denoiser.n)
        mapping = ComposedMapping(s, self._denoiser, self._counter)
        for j in range(1, self.outer_iters + 1):
            problem = InnerProblem(y, mapping, lam=0.0, l2_weight=self.l2_weight, iters=self.inner_iters,
                                   lr=self.inner_lr, outer=A, freeze_nu=True, beta_1=self.beta1,
                                   beta_2=self.beta2, eps_stab=self.eps)
            try:
                result = solve_inner(problem, xT, zeros, mode=self.mode)
            except DivergenceError as e:
                raise e.locate(layer=s.N, outer=j)
            finally:
                mapping.close()
            xT = result.x
            state = self._chain(s, xT)
            state.outer_index = j
            residuals.append(measurement_residual(y, A, state.estimate))
            self.logger().info("Outer iteration %d/%d: residual=%.6g" % (j, self.outer_iters, residuals[-1]))
        return RunReport(self.name(), state.estimate.copy(), residual_init, residuals, 0, 0, 0.0, self.seed,
                         state=state)
