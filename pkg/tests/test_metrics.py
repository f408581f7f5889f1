import numpy as np
import pytest

from dmilo.api import compute_metrics, structural_similarity_windows, PSNR_INF, LAYOUT_GRID, ShapeError, \
    ConfigurationError


def test_perfect_estimate():
    x = np.linspace(0.0, 1.0, 16)
    m = compute_metrics(x, x, peak=1.0, layout=LAYOUT_GRID, grid=[4, 4])
    assert m.mse == 0.0
    assert m.psnr == PSNR_INF
    assert m.psnr_value() == float("inf")
    assert m.ssim == pytest.approx(1.0)


def test_psnr_formula():
    xstar = np.zeros(4)
    xhat = np.full(4, 0.5)
    m = compute_metrics(xhat, xstar, peak=1.0)
    assert m.mse == pytest.approx(0.25)
    assert m.psnr == pytest.approx(6.0206, abs=1e-4)
    assert m.ssim is None
    assert not m.empirical_peak


def test_empirical_peak():
    xstar = np.array([-1.0, 0.0, 1.0, 3.0])
    m = compute_metrics(xstar + 0.1, xstar)
    assert m.empirical_peak
    assert m.peak == pytest.approx(4.0)
    assert m.psnr == pytest.approx(10 * np.log10(16.0 / 0.01))


def test_constant_ground_truth_uses_unit_peak():
    m = compute_metrics(np.full(4, 0.1), np.zeros(4))
    assert m.peak == 1.0


def test_ssim_against_mean_image():
    rng = np.random.default_rng(0)
    img = rng.uniform(0.0, 1.0, (8, 8))
    value = structural_similarity_windows(np.full_like(img, img.mean()), img, 1.0)
    assert 0.0 <= value < 1.0


def test_ssim_symmetric():
    rng = np.random.default_rng(1)
    a = rng.uniform(0.0, 1.0, (10, 10))
    b = a + 0.05 * rng.standard_normal((10, 10))
    assert structural_similarity_windows(a, b, 1.0) == pytest.approx(structural_similarity_windows(b, a, 1.0))


def test_errors():
    with pytest.raises(ShapeError):
        compute_metrics(np.zeros(3), np.zeros(4))
    with pytest.raises(ShapeError):
        compute_metrics(np.zeros(16), np.zeros(16), peak=1.0, layout=LAYOUT_GRID, grid=[3, 4])
    with pytest.raises(ConfigurationError):
        compute_metrics(np.zeros(16), np.zeros(16), peak=1.0, layout=LAYOUT_GRID)
    with pytest.raises(ConfigurationError):
        compute_metrics(np.zeros(4), np.zeros(4), layout="cube")
    with pytest.raises(ConfigurationError):
        compute_metrics(np.zeros(4), np.ones(4), peak=0.0)


def test_to_dict():
    d = compute_metrics(np.ones(4), np.zeros(4), peak=1.0, residual=0.5).to_dict()
    assert d["mse"] == 1.0
    assert d["psnr"] == pytest.approx(0.0)
    assert d["residual"] == 0.5
