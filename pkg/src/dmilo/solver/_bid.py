import argparse
from typing import List, Tuple

import numpy as np

from dmilo.api import Solver, Kernel, CircConvOperator, Schedule, SolverState, BidState, AdamState, \
    ConfigurationError, DivergenceError, ShapeError, KIND_BLIND_DEBLUR, MODE_PROXIMAL, MODE_SUBGRADIENT, \
    adam_step, soft_threshold, centered_offsets, circ_conv, circ_corr, circ_conv_kernel_vjp, ddim_step, \
    ddim_step_vjp

DEFAULT_KERNEL_SIZE = 5


def kernel_residual(y: np.ndarray, kernel: Kernel, x: np.ndarray) -> float:
    """
    Returns ||y - k * x||_2.
    """
    return float(np.linalg.norm(y - circ_conv(kernel, x)))


def normalized(kernel: Kernel) -> Kernel:
    """
    Rescales the taps to sum 1 (unchanged if they sum to 0).
    """
    total = float(np.sum(kernel.taps))
    if total == 0:
        return kernel
    return kernel.with_taps(kernel.taps / total)


class BlindSolver(Solver):
    """
    Ancestor for solvers that estimate the convolution kernel alongside the signal.
    """

    def __init__(self, kernel_size: int = None, inner_lr_k: float = None, normalize_kernel: bool = None,
                 kernel_init: List[float] = None, **kwargs):
        """
        Initializes the solver.

        :param kernel_size: the number of taps of the estimated kernel
        :type kernel_size: int
        :param inner_lr_k: the Adam learning rate for the kernel taps
        :type inner_lr_k: float
        :param normalize_kernel: whether to rescale the taps to sum 1 after every kernel update
        :type normalize_kernel: bool
        :param kernel_init: the initial taps (centered), drawn from N(0, I) if omitted
        :type kernel_init: list
        """
        super().__init__(**kwargs)
        self.kernel_size = kernel_size
        self.inner_lr_k = inner_lr_k
        self.normalize_kernel = normalize_kernel
        self.kernel_init = kernel_init

    def _create_argparser(self) -> argparse.ArgumentParser:
        """
        Creates an argument parser. Derived classes need to fill in the options.

        :return: the parser
        :rtype: argparse.ArgumentParser
        """
        parser = super()._create_argparser()
        parser.add_argument("--kernel_size", type=int, metavar="INT", help="The number of taps of the estimated kernel.", required=False, default=DEFAULT_KERNEL_SIZE)
        parser.add_argument("--inner_lr_k", type=float, metavar="FLOAT", help="The Adam learning rate for the kernel taps; uses the inner learning rate if omitted.", required=False, default=None)
        parser.add_argument("--normalize_kernel", action="store_true", help="Whether to rescale the kernel taps to sum 1 after every update.", required=False)
        parser.add_argument("--kernel_init", type=float, metavar="TAP", help="The initial kernel taps, drawn from N(0, I) if omitted.", required=False, default=None, nargs="*")
        return parser

    def _apply_args(self, ns: argparse.Namespace):
        """
        Initializes the object with the arguments of the parsed namespace.

        :param ns: the parsed arguments
        :type ns: argparse.Namespace
        """
        super()._apply_args(ns)
        self.kernel_size = ns.kernel_size
        self.inner_lr_k = ns.inner_lr_k
        self.normalize_kernel = ns.normalize_kernel
        self.kernel_init = ns.kernel_init

    def is_blind(self) -> bool:
        return True

    def initialize(self):
        """
        Fills in defaults and validates the options.
        """
        super().initialize()
        if self.kernel_init is not None:
            self.kernel_size = len(self.kernel_init)
        if self.kernel_size is None:
            self.kernel_size = DEFAULT_KERNEL_SIZE
        if self.inner_lr_k is None:
            self.inner_lr_k = self.inner_lr
        if self.normalize_kernel is None:
            self.normalize_kernel = False
        if self.kernel_size < 1:
            raise ConfigurationError("Kernel size must be at least 1: %d" % self.kernel_size)

    def options(self) -> dict:
        result = super().options()
        result["kernel_size"] = self.kernel_size
        result["inner_lr_k"] = self.inner_lr_k
        result["normalize_kernel"] = self.normalize_kernel
        return result

    def _initial_kernel(self) -> Kernel:
        """
        Returns the supplied initial kernel or one with N(0, I) taps drawn from a stream derived from the seed.
        """
        offsets = centered_offsets(self.kernel_size)
        if self.kernel_init is not None:
            return Kernel(self.kernel_init, offsets)
        rng = np.random.default_rng([self.seed, 1])
        return Kernel(rng.standard_normal(self.kernel_size), offsets)

    def _init_bid_state(self, s: Schedule, eta_k: float) -> BidState:
        state = self._init_state(s)
        kernel = self._initial_kernel()
        if kernel.support > self._denoiser.n:
            raise ConfigurationError("Kernel support %d exceeds dimension %d" % (kernel.support, self._denoiser.n))
        if self.normalize_kernel:
            kernel = normalized(kernel)
        return BidState.from_state(state, kernel, eta_k)

    def _operator(self, kernel: Kernel) -> CircConvOperator:
        return CircConvOperator(self._denoiser.n, kernel, kind=KIND_BLIND_DEBLUR)

    def _check_kernel(self, state: BidState, kernel: Kernel):
        if kernel.support != state.kernel.support:
            raise ShapeError("Kernel support changed from %d to %d" % (state.kernel.support, kernel.support))

    def _joint_loss(self, s: Schedule, y: np.ndarray, x: np.ndarray, nu: np.ndarray, kernel: Kernel,
                    with_grad: bool) -> Tuple[float, np.ndarray, np.ndarray, np.ndarray]:
        """
        Evaluates ||y - k * (g_1(x) + nu)||^2 + lam * ||nu||_1 + l2_weight * ||x||^2 and the gradients of its
        smooth part in x, nu and the taps.
        """
        z = ddim_step(s, self._denoiser, 1, x) + nu
        r = circ_conv(kernel, z) - y
        loss = float(np.dot(r, r) + self.lam * np.sum(np.abs(nu)) + self.l2_weight * np.dot(x, x))
        if not with_grad:
            return loss, None, None, None
        g_z = 2.0 * circ_corr(kernel, r)
        grad_x = ddim_step_vjp(s, self._denoiser, 1, x, g_z) + 2.0 * self.l2_weight * x
        grad_k = 2.0 * circ_conv_kernel_vjp(kernel, z, r)
        return loss, grad_x, g_z, grad_k

    def _solve_joint_layer(self, s: Schedule, state: BidState, y: np.ndarray) -> List[float]:
        """
        Runs Adam jointly on (x_{t_1}, nu_{t_1}) and the kernel taps, keeping the iterate with the lowest loss.
        Holds one differentiation context.

        :return: the losses
        :rtype: list
        """
        x = state.latents[1].copy()
        nu = state.deviations[1].copy()
        kernel = state.kernel
        n = len(x)
        freeze_nu = not self.sparse_deviation
        st_xnu = AdamState(n if freeze_nu else 2 * n, lr=self.inner_lr, beta_1=self.beta1, beta_2=self.beta2,
                           eps_stab=self.eps)
        st_k = AdamState(kernel.support, lr=self.inner_lr_k, beta_1=self.beta1, beta_2=self.beta2,
                         eps_stab=self.eps)
        losses = []
        best = (np.inf, x, nu, kernel)
        self._counter.acquire()
        try:
            for it in range(self.inner_iters + 1):
                loss, grad_x, grad_nu, grad_k = self._joint_loss(s, y, x, nu, kernel, it < self.inner_iters)
                if not np.isfinite(loss):
                    raise DivergenceError(it, loss, layer=1, outer=state.outer_index)
                losses.append(loss)
                if loss < best[0]:
                    best = (loss, x, nu, kernel)
                if it == self.inner_iters:
                    break
                if freeze_nu:
                    x, st_xnu = adam_step(st_xnu, x, grad_x)
                else:
                    if self.mode == MODE_SUBGRADIENT:
                        grad_nu = grad_nu + self.lam * np.sign(nu)
                    params, st_xnu = adam_step(st_xnu, np.concatenate([x, nu]), np.concatenate([grad_x, grad_nu]))
                    x = params[:n]
                    nu = params[n:]
                    if self.mode == MODE_PROXIMAL:
                        nu = soft_threshold(nu, self.inner_lr * self.lam)
                taps, st_k = adam_step(st_k, kernel.taps, grad_k)
                kernel = kernel.with_taps(taps)
                if self.normalize_kernel:
                    kernel = normalized(kernel)
        finally:
            self._counter.release()
        state.latents[1] = best[1]
        state.deviations[1] = best[2]
        self._check_kernel(state, best[3])
        state.kernel = best[3]
        self.logger().debug("Outer %d, layer 1 (joint with kernel): loss %.6g -> %.6g" % (state.outer_index, losses[0], best[0]))
        return losses
