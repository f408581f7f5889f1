import numpy as np

from dmilo.api import Solver, RunReport, ForwardOperator, Schedule, measurement_residual


class Dmilo(Solver):
    """
    Intermediate-layer optimization through the sampling steps with sparse deviations.
    """

    def name(self) -> str:
        """
        Returns the name of the handler, used as sub-command.

        :return: the name
        :rtype: str
        """
        return "dmilo"

    def description(self) -> str:
        """
        Returns a description of the solver.

        :return: the description
        :rtype: str
        """
        return "Optimizes the input and a sparse deviation of every sampling step separately, one layer at a time, " \
               "then re-synthesizes the chain down to the estimate."

    def _do_solve(self, y: np.ndarray, A: ForwardOperator, s: Schedule) -> RunReport:
        state = self._init_state(s)
        residual_init = measurement_residual(y, A, state.estimate)
        residuals = []
        for j in range(1, self.outer_iters + 1):
            state.outer_index = j
            self._solve_layer(s, state, 1, y, outer=A, l2_weight=self.l2_weight)
            self._solve_upper_layers(s, state)
            state.resynthesize(s, self._denoiser)
            residuals.append(measurement_residual(y, A, state.estimate))
            self.logger().info("Outer iteration %d/%d: residual=%.6g" % (j, self.outer_iters, residuals[-1]))
        return RunReport(self.name(), state.estimate.copy(), residual_init, residuals, 0, 0, 0.0, self.seed,
                         state=state)
