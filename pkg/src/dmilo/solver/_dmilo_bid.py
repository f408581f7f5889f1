import numpy as np

from dmilo.api import RunReport, Schedule
from ._bid import BlindSolver, kernel_residual


class DmiloBid(BlindSolver):
    """
    Blind deblurring with intermediate-layer optimization: the first layer also estimates the kernel.
    """

    def name(self) -> str:
        """
        Returns the name of the handler, used as sub-command.

        :return: the name
        :rtype: str
        """
        return "dmilo_bid"

    def description(self) -> str:
        """
        Returns a description of the solver.

        :return: the description
        :rtype: str
        """
        return "Blind deblurring: optimizes input, sparse deviation and convolution kernel jointly at the last " \
               "sampling step and the remaining steps layer by layer."

    def _do_solve(self, y: np.ndarray, A, s: Schedule) -> RunReport:
        state = self._init_bid_state(s, 0.0)
        residual_init = kernel_residual(y, state.kernel, state.estimate)
        residuals = []
        for j in range(1, self.outer_iters + 1):
            state.outer_index = j
            self._solve_joint_layer(s, state, y)
            self._solve_upper_layers(s, state)
            state.resynthesize(s, self._denoiser)
            residuals.append(kernel_residual(y, state.kernel, state.estimate))
            self.logger().info("Outer iteration %d/%d: residual=%.6g" % (j, self.outer_iters, residuals[-1]))
        return RunReport(self.name(), state.estimate.copy(), residual_init, residuals, 0, 0, 0.0, self.seed,
                         state=state, kernel=state.kernel)
