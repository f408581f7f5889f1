import logging
from typing import List, Optional, Union

import numpy as np
from skimage.metrics import peak_signal_noise_ratio
from skimage.util import view_as_windows

from ._errors import ConfigurationError, ShapeError

_logger = logging.getLogger("dmilo.metrics")

LAYOUT_FLAT = "flat"
LAYOUT_GRID = "grid"
LAYOUTS = [LAYOUT_FLAT, LAYOUT_GRID]

PSNR_INF = "inf"

SSIM_WINDOW = 8
SSIM_K1 = 0.01
SSIM_K2 = 0.03


class MetricSet(object):
    """
    Reconstruction quality of a single estimate.
    """

    def __init__(self, mse: float, psnr: Union[float, str], ssim: Optional[float], residual: float = None,
                 peak: float = None, empirical_peak: bool = False):
        self.mse = mse
        self.psnr = psnr
        self.ssim = ssim
        self.residual = residual
        self.peak = peak
        self.empirical_peak = empirical_peak

    def psnr_value(self) -> float:
        """
        Returns the PSNR as float, inf for the sentinel.
        """
        if self.psnr == PSNR_INF:
            return float("inf")
        return float(self.psnr)

    def to_dict(self) -> dict:
        return {
            "mse": self.mse,
            "psnr": self.psnr,
            "ssim": self.ssim,
            "residual": self.residual,
            "peak": self.peak,
            "empirical_peak": self.empirical_peak,
        }

    def __repr__(self):
        return "MetricSet(mse=%g, psnr=%s, ssim=%s)" % (self.mse, str(self.psnr), str(self.ssim))


def structural_similarity_windows(a: np.ndarray, b: np.ndarray, peak: float, window: int = SSIM_WINDOW) -> float:
    """
    Mean SSIM over all sliding window x window patches (uniform weights, population statistics).

    :param a: the first image
    :type a: np.ndarray
    :param b: the second image
    :type b: np.ndarray
    :param peak: the dynamic range
    :type peak: float
    :param window: the window size, clipped to the image size
    :type window: int
    :return: the mean SSIM
    :rtype: float
    """
    window = min(window, a.shape[0], a.shape[1])
    wa = view_as_windows(a, (window, window)).reshape(-1, window * window)
    wb = view_as_windows(b, (window, window)).reshape(-1, window * window)
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2
    mu_a = wa.mean(axis=1)
    mu_b = wb.mean(axis=1)
    var_a = wa.var(axis=1)
    var_b = wb.var(axis=1)
    cov = ((wa - mu_a[:, None]) * (wb - mu_b[:, None])).mean(axis=1)
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def compute_metrics(xhat, xstar, peak: float = None, layout: str = LAYOUT_FLAT, grid: List[int] = None,
                    residual: float = None) -> MetricSet:
    """
    Computes MSE, PSNR and (for the grid layout) SSIM of an estimate against the ground truth.
    Without a peak, the range max(xstar) - min(xstar) is used and flagged.

    :param xhat: the estimate
    :param xstar: the ground truth
    :param peak: the dynamic range for PSNR/SSIM, optional
    :type peak: float
    :param layout: flat or grid
    :type layout: str
    :param grid: the [h, w] of the grid layout
    :type grid: list
    :param residual: the measurement residual to carry along
    :type residual: float
    :return: the metrics
    :rtype: MetricSet
    """
    xhat = np.asarray(xhat, dtype=float)
    xstar = np.asarray(xstar, dtype=float)
    if xhat.shape != xstar.shape:
        raise ShapeError("Estimate shape %s does not match ground truth shape %s" % (str(xhat.shape), str(xstar.shape)))
    if layout not in LAYOUTS:
        raise ConfigurationError("Unknown layout: %s" % layout)

    empirical = peak is None
    if empirical:
        peak = float(np.max(xstar) - np.min(xstar))
        if peak <= 0:
            _logger.warning("Ground truth is constant, using peak 1.0")
            peak = 1.0
    elif not (peak > 0):
        raise ConfigurationError("Peak must be positive: %s" % str(peak))

    mse = float(np.mean((xhat - xstar) ** 2))
    if mse == 0:
        psnr = PSNR_INF
    else:
        psnr = float(peak_signal_noise_ratio(xstar, xhat, data_range=peak))

    ssim = None
    if layout == LAYOUT_GRID:
        if (grid is None) or (len(grid) != 2):
            raise ConfigurationError("Grid layout requires [h, w]: %s" % str(grid))
        h, w = grid
        if h * w != xstar.size:
            raise ShapeError("Grid %dx%d does not match dimension %d" % (h, w, xstar.size))
        ssim = structural_similarity_windows(xhat.reshape(h, w), xstar.reshape(h, w), peak)

    return MetricSet(mse, psnr, ssim, residual=residual, peak=peak, empirical_peak=empirical)
