import math
from typing import List

import numpy as np

from ._errors import ConfigurationError, ShapeError

KIND_IDENTITY = "identity"
KIND_INPAINT = "inpaint"
KIND_DOWNSAMPLE = "downsample"
KIND_DEBLUR = "deblur"
KIND_GAUSSIAN = "gaussian"
KIND_NONLINEAR = "nonlinear"
KIND_BLIND_DEBLUR = "blind_deblur"
KIND_MATRIX = "matrix"
KIND_DEBLUR_2D = "deblur2d"
TASK_KINDS = [KIND_IDENTITY, KIND_INPAINT, KIND_DOWNSAMPLE, KIND_DEBLUR, KIND_GAUSSIAN, KIND_NONLINEAR,
              KIND_BLIND_DEBLUR]


class ForwardOperator(object):
    """
    Measurement map A: R^n -> R^m with its vector-Jacobian product.
    """

    def __init__(self, in_dim: int, out_dim: int, kind: str):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.kind = kind

    @property
    def is_linear(self) -> bool:
        return True

    def _check_in(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.in_dim,):
            raise ShapeError("%s operator expects input of dimension %d, got shape %s" % (self.kind, self.in_dim, str(x.shape)))
        return x

    def _check_out(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.out_dim,):
            raise ShapeError("%s operator expects cotangent of dimension %d, got shape %s" % (self.kind, self.out_dim, str(u.shape)))
        return u

    def apply(self, x) -> np.ndarray:
        """
        Applies the operator.

        :param x: the signal of dimension n
        :return: the measurement of dimension m
        :rtype: np.ndarray
        """
        return self._apply(self._check_in(x))

    def vjp(self, x, u) -> np.ndarray:
        """
        Returns u^T dA/dx at x; the adjoint A^T u for linear operators (x is ignored then).

        :param x: the point, may be None for linear operators
        :param u: the cotangent of dimension m
        :return: the pulled back cotangent of dimension n
        :rtype: np.ndarray
        """
        if (x is not None) or (not self.is_linear):
            x = self._check_in(x)
        return self._vjp(x, self._check_out(u))

    def _apply(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError()

    def _vjp(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError()

    def matrix(self) -> np.ndarray:
        """
        Returns the dense m x n matrix of a linear operator.

        :return: the matrix
        :rtype: np.ndarray
        """
        if not self.is_linear:
            raise ConfigurationError("%s operator is not linear" % self.kind)
        return np.stack([self._apply(e) for e in np.eye(self.in_dim)], axis=1)

    def __repr__(self):
        return "%s(kind=%s, n=%d, m=%d)" % (self.__class__.__name__, self.kind, self.in_dim, self.out_dim)


class IdentityOperator(ForwardOperator):

    def __init__(self, n: int):
        super().__init__(n, n, KIND_IDENTITY)

    def _apply(self, x):
        return x.copy()

    def _vjp(self, x, u):
        return u.copy()


class MatrixOperator(ForwardOperator):
    """
    Dense linear operator given by an explicit matrix.
    """

    def __init__(self, matrix, kind: str = KIND_MATRIX):
        matrix = np.array(matrix, dtype=float)
        if matrix.ndim != 2:
            raise ShapeError("Operator matrix must be 2-d, got shape %s" % str(matrix.shape))
        super().__init__(matrix.shape[1], matrix.shape[0], kind)
        self._matrix = matrix
        self._matrix.setflags(write=False)

    def _apply(self, x):
        return self._matrix @ x

    def _vjp(self, x, u):
        return self._matrix.T @ u

    def matrix(self) -> np.ndarray:
        return self._matrix.copy()

    def scaled(self, c: float) -> 'MatrixOperator':
        return MatrixOperator(c * self._matrix, kind=self.kind)


class MaskOperator(ForwardOperator):
    """
    Keeps a subset of the coordinates (inpainting).
    """

    def __init__(self, n: int, indices):
        indices = np.asarray(indices, dtype=int)
        if len(indices) == 0:
            raise ConfigurationError("Mask keeps no coordinates")
        if np.any(indices < 0) or np.any(indices >= n):
            raise ConfigurationError("Mask indices must lie in [0, %d)" % n)
        super().__init__(n, len(indices), KIND_INPAINT)
        self.indices = indices

    def _apply(self, x):
        return x[self.indices]

    def _vjp(self, x, u):
        result = np.zeros(self.in_dim)
        result[self.indices] = u
        return result


class DownsampleOperator(ForwardOperator):
    """
    Averages blocks of consecutive coordinates.
    """

    def __init__(self, n: int, factor: int):
        if (factor < 1) or (n % factor != 0):
            raise ConfigurationError("Downsampling factor must divide the dimension: n=%d, factor=%d" % (n, factor))
        super().__init__(n, n // factor, KIND_DOWNSAMPLE)
        self.factor = factor

    def _apply(self, x):
        return x.reshape(-1, self.factor).mean(axis=1)

    def _vjp(self, x, u):
        return np.repeat(u / self.factor, self.factor)


class Kernel(object):
    """
    Convolution kernel: taps k_a at integer offsets a.
    """

    def __init__(self, taps, offsets=None):
        """
        Initializes the kernel.

        :param taps: the coefficients
        :param offsets: the offsets of the coefficients, defaults to 0..k-1
        """
        self.taps = np.array(taps, dtype=float).ravel()
        if offsets is None:
            offsets = np.arange(len(self.taps))
        self.offsets = np.array(offsets, dtype=int).ravel()
        if len(self.offsets) != len(self.taps):
            raise ShapeError("Kernel has %d taps but %d offsets" % (len(self.taps), len(self.offsets)))
        if len(self.taps) == 0:
            raise ConfigurationError("Kernel has no taps")

    @property
    def support(self) -> int:
        return len(self.taps)

    def with_taps(self, taps) -> 'Kernel':
        """
        Returns a kernel with the same offsets but new taps.
        """
        taps = np.asarray(taps, dtype=float).ravel()
        if taps.shape != self.taps.shape:
            raise ShapeError("Expected %d taps, got %d" % (self.support, taps.size))
        return Kernel(taps, self.offsets)

    def to_dict(self) -> dict:
        return {"taps": self.taps.tolist(), "offsets": self.offsets.tolist()}


def centered_offsets(size: int) -> np.ndarray:
    """
    Offsets -(size//2) .. size - 1 - size//2.
    """
    return np.arange(size) - size // 2


def gaussian_kernel(size: int = 5, width: float = 1.0) -> Kernel:
    """
    Creates a centered, sum-normalized Gaussian kernel.

    :param size: the number of taps
    :type size: int
    :param width: the standard deviation in taps
    :type width: float
    :return: the kernel
    :rtype: Kernel
    """
    if size < 1:
        raise ConfigurationError("Kernel size must be at least 1: %d" % size)
    offsets = centered_offsets(size)
    taps = np.exp(-0.5 * (offsets / width) ** 2)
    return Kernel(taps / taps.sum(), offsets)


def circ_conv(kernel: Kernel, x: np.ndarray) -> np.ndarray:
    """
    Circular convolution y_j = sum_a k_a x_{(j - a) mod n}.
    """
    result = np.zeros_like(x, dtype=float)
    for k, a in zip(kernel.taps, kernel.offsets):
        result += k * np.roll(x, a)
    return result


def circ_corr(kernel: Kernel, u: np.ndarray) -> np.ndarray:
    """
    Circular correlation, the adjoint of circ_conv: z_i = sum_a k_a u_{(i + a) mod n}.
    """
    result = np.zeros_like(u, dtype=float)
    for k, a in zip(kernel.taps, kernel.offsets):
        result += k * np.roll(u, -a)
    return result


def circ_conv_kernel_vjp(kernel: Kernel, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """
    Gradient of <u, k * x> with respect to the taps: entry a is <u, roll(x, a)>.
    """
    return np.array([np.dot(u, np.roll(x, a)) for a in kernel.offsets])


class CircConvOperator(ForwardOperator):
    """
    Circular convolution with a fixed kernel (deblurring).
    """

    def __init__(self, n: int, kernel: Kernel, kind: str = KIND_DEBLUR):
        if kernel.support > n:
            raise ConfigurationError("Kernel support %d exceeds dimension %d" % (kernel.support, n))
        super().__init__(n, n, kind)
        self.kernel = kernel

    def _apply(self, x):
        return circ_conv(self.kernel, x)

    def _vjp(self, x, u):
        return circ_corr(self.kernel, u)

    def kernel_vjp(self, x, u) -> np.ndarray:
        """
        Returns u^T d(k * x)/dk, the gradient with respect to the taps.
        """
        return circ_conv_kernel_vjp(self.kernel, self._check_in(x), self._check_out(u))


class CircConv2DOperator(ForwardOperator):
    """
    Circular 2-d convolution on a row-major flattened h x w grid with a centered 2-d kernel.
    """

    def __init__(self, h: int, w: int, taps):
        taps = np.array(taps, dtype=float)
        if taps.ndim != 2:
            raise ShapeError("2-d kernel expected, got shape %s" % str(taps.shape))
        if (taps.shape[0] > h) or (taps.shape[1] > w):
            raise ConfigurationError("Kernel %s exceeds grid %dx%d" % (str(taps.shape), h, w))
        super().__init__(h * w, h * w, KIND_DEBLUR_2D)
        self.h = h
        self.w = w
        self.taps = taps
        self._offsets = [(a, b) for a in centered_offsets(taps.shape[0]) for b in centered_offsets(taps.shape[1])]
        self._coeffs = taps.ravel()

    def _apply(self, x):
        img = x.reshape(self.h, self.w)
        result = np.zeros_like(img)
        for k, (a, b) in zip(self._coeffs, self._offsets):
            result += k * np.roll(img, (a, b), axis=(0, 1))
        return result.ravel()

    def _vjp(self, x, u):
        img = u.reshape(self.h, self.w)
        result = np.zeros_like(img)
        for k, (a, b) in zip(self._coeffs, self._offsets):
            result += k * np.roll(img, (-a, -b), axis=(0, 1))
        return result.ravel()


class NonlinearOperator(ForwardOperator):
    """
    Smooth nonlinearity on top of a base operator: tanh(gain * base(x)).
    """

    def __init__(self, base: ForwardOperator, gain: float):
        if not (gain > 0):
            raise ConfigurationError("Gain must be positive: %s" % str(gain))
        super().__init__(base.in_dim, base.out_dim, KIND_NONLINEAR)
        self.base = base
        self.gain = gain

    @property
    def is_linear(self) -> bool:
        return False

    def _apply(self, x):
        return np.tanh(self.gain * self.base.apply(x))

    def _vjp(self, x, u):
        th = np.tanh(self.gain * self.base.apply(x))
        return self.base.vjp(x, self.gain * (1.0 - th * th) * u)


def mask_operator(n: int, keep_fraction: float, seed: int) -> MaskOperator:
    """
    Keeps ceil(keep_fraction * n) coordinates chosen uniformly without replacement; indices are sorted.

    :param n: the signal dimension
    :type n: int
    :param keep_fraction: the fraction of coordinates to keep, in (0, 1]
    :type keep_fraction: float
    :param seed: the seed for the selection
    :type seed: int
    :return: the operator
    :rtype: MaskOperator
    """
    if not (0 < keep_fraction <= 1):
        raise ConfigurationError("Keep fraction must be in (0, 1]: %s" % str(keep_fraction))
    count = int(math.ceil(keep_fraction * n - 1e-9))
    if count < 1:
        raise ConfigurationError("Mask keeps no coordinates: n=%d, keep_fraction=%s" % (n, str(keep_fraction)))
    rng = np.random.default_rng(seed)
    indices = np.sort(rng.choice(n, size=count, replace=False))
    return MaskOperator(n, indices)


def downsample_operator(n: int, factor: int) -> DownsampleOperator:
    return DownsampleOperator(n, factor)


def circ_conv_operator(n: int, k: Kernel) -> CircConvOperator:
    return CircConvOperator(n, k)


def gaussian_operator(m: int, n: int, seed: int) -> MatrixOperator:
    """
    Dense matrix with i.i.d. N(0, 1/m) entries.

    :param m: the number of measurements
    :type m: int
    :param n: the signal dimension
    :type n: int
    :param seed: the seed
    :type seed: int
    :return: the operator
    :rtype: MatrixOperator
    """
    if (m < 1) or (n < 1):
        raise ConfigurationError("Dimensions must be positive: m=%d, n=%d" % (m, n))
    rng = np.random.default_rng(seed)
    return MatrixOperator(rng.standard_normal((m, n)) / math.sqrt(m), kind=KIND_GAUSSIAN)


def nonlinear_operator(base: ForwardOperator, gain: float) -> NonlinearOperator:
    return NonlinearOperator(base, gain)


def add_noise(y, sigma: float, seed: int) -> np.ndarray:
    """
    Adds seeded white Gaussian noise.

    :param y: the clean measurement
    :param sigma: the noise level, >= 0
    :type sigma: float
    :param seed: the seed
    :type seed: int
    :return: the noisy measurement
    :rtype: np.ndarray
    """
    if sigma < 0:
        raise ConfigurationError("Noise level must be non-negative: %s" % str(sigma))
    y = np.asarray(y, dtype=float)
    if sigma == 0:
        return y.copy()
    rng = np.random.default_rng(seed)
    return y + sigma * rng.standard_normal(y.shape)


def make_kernel(value, size: int = 5, width: float = 1.0) -> Kernel:
    """
    Builds a kernel from a configuration value: a list of taps (centered), "gaussian" or "delta".

    :param value: the configuration value
    :param size: the number of taps for generated kernels
    :type size: int
    :param width: the width for Gaussian kernels
    :type width: float
    :return: the kernel
    :rtype: Kernel
    """
    if (value is None) or (value == "gaussian"):
        return gaussian_kernel(size, width)
    if value == "delta":
        return Kernel([1.0], [0])
    if isinstance(value, (list, tuple)):
        return Kernel(value, centered_offsets(len(value)))
    raise ConfigurationError("Unknown kernel: %s" % str(value))


def make_operator(kind: str, n: int, seed: int = 0, keep_fraction: float = 0.3, factor: int = 4,
                  kernel: Kernel = None, m: int = None, gain: float = 1.0, grid: List[int] = None) -> ForwardOperator:
    """
    Creates the forward operator for a task kind. For blind deblurring the returned operator carries the
    true kernel that generates the measurements.

    :param kind: the task kind
    :type kind: str
    :param n: the signal dimension
    :type n: int
    :param seed: the seed for random operators
    :type seed: int
    :param keep_fraction: the inpainting keep fraction
    :type keep_fraction: float
    :param factor: the downsampling factor
    :type factor: int
    :param kernel: the deblurring kernel
    :type kernel: Kernel
    :param m: the number of Gaussian measurements (defaults to n)
    :type m: int
    :param gain: the gain of the nonlinearity
    :type gain: float
    :param grid: optional [h, w] for 2-d deblurring
    :type grid: list
    :return: the operator
    :rtype: ForwardOperator
    """
    if kind == KIND_IDENTITY:
        return IdentityOperator(n)
    if kind == KIND_INPAINT:
        return mask_operator(n, keep_fraction, seed)
    if kind == KIND_DOWNSAMPLE:
        return downsample_operator(n, factor)
    if kind in (KIND_DEBLUR, KIND_BLIND_DEBLUR):
        if kernel is None:
            kernel = gaussian_kernel()
        if (grid is not None) and (kind == KIND_DEBLUR):
            h, w = grid
            if h * w != n:
                raise ConfigurationError("Grid %dx%d does not match dimension %d" % (h, w, n))
            return CircConv2DOperator(h, w, np.outer(kernel.taps, kernel.taps))
        return CircConvOperator(n, kernel, kind=kind)
    if kind == KIND_GAUSSIAN:
        return gaussian_operator(n if m is None else m, n, seed)
    if kind == KIND_NONLINEAR:
        if kernel is None:
            kernel = gaussian_kernel()
        return nonlinear_operator(CircConvOperator(n, kernel), gain)
    raise ConfigurationError("Unknown task kind: %s" % kind)
