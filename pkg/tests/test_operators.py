import math

import numpy as np
import pytest

from dmilo.api import IdentityOperator, MatrixOperator, MaskOperator, CircConvOperator, CircConv2DOperator, Kernel, \
    gaussian_kernel, mask_operator, downsample_operator, circ_conv_operator, gaussian_operator, nonlinear_operator, \
    add_noise, make_kernel, make_operator, circ_conv, circ_corr, centered_offsets, ConfigurationError, \
    ShapeError, TASK_KINDS, KIND_BLIND_DEBLUR

from conftest import central_difference_vjp, relative_error

N = 8


def _linear_operators():
    return [
        IdentityOperator(N),
        mask_operator(N, 0.5, 1),
        downsample_operator(N, 2),
        circ_conv_operator(N, gaussian_kernel(3, 1.0)),
        gaussian_operator(5, N, 2),
        CircConv2DOperator(2, 4, np.outer([0.25, 0.5, 0.25], [0.5, 0.5])[:2, :]),
    ]


@pytest.mark.parametrize("op", _linear_operators(), ids=lambda op: op.kind)
def test_adjoint(op):
    rng = np.random.default_rng(0)
    x = rng.standard_normal(op.in_dim)
    u = rng.standard_normal(op.out_dim)
    assert np.dot(op.apply(x), u) == pytest.approx(np.dot(x, op.vjp(None, u)), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("op", _linear_operators(), ids=lambda op: op.kind)
def test_vjp_finite_difference(op):
    rng = np.random.default_rng(1)
    x = rng.standard_normal(op.in_dim)
    u = rng.standard_normal(op.out_dim)
    fd = central_difference_vjp(op.apply, x, u)
    assert relative_error(op.vjp(x, u), fd) < 1e-5


@pytest.mark.parametrize("op", _linear_operators(), ids=lambda op: op.kind)
def test_matrix(op):
    rng = np.random.default_rng(2)
    x = rng.standard_normal(op.in_dim)
    np.testing.assert_allclose(op.matrix() @ x, op.apply(x), atol=1e-12)


def test_nonlinear_vjp():
    op = nonlinear_operator(circ_conv_operator(N, gaussian_kernel(3, 1.0)), 2.0)
    assert not op.is_linear
    rng = np.random.default_rng(3)
    for _ in range(10):
        x = rng.standard_normal(N)
        u = rng.standard_normal(N)
        fd = central_difference_vjp(op.apply, x, u)
        assert relative_error(op.vjp(x, u), fd) < 1e-5
    with pytest.raises(ConfigurationError):
        op.matrix()
    with pytest.raises(ShapeError):
        op.vjp(None, np.ones(N))


def test_kernel_vjp():
    op = circ_conv_operator(N, gaussian_kernel(5, 1.0))
    rng = np.random.default_rng(4)
    x = rng.standard_normal(N)
    u = rng.standard_normal(N)

    def f(taps):
        return circ_conv(op.kernel.with_taps(taps), x)

    fd = central_difference_vjp(f, op.kernel.taps, u)
    assert relative_error(op.kernel_vjp(x, u), fd) < 1e-5


def test_mask_count_and_order():
    op = mask_operator(64, 0.3, 7)
    assert op.out_dim == math.ceil(0.3 * 64)
    assert np.all(np.diff(op.indices) > 0)
    np.testing.assert_array_equal(op.indices, mask_operator(64, 0.3, 7).indices)


@pytest.mark.parametrize("keep", [0.0, 1.5])
def test_mask_invalid(keep):
    with pytest.raises(ConfigurationError):
        mask_operator(N, keep, 0)


def test_downsample():
    op = downsample_operator(N, 4)
    np.testing.assert_allclose(op.apply(np.arange(N, dtype=float)), [1.5, 5.5])
    with pytest.raises(ConfigurationError):
        downsample_operator(N, 3)


def test_gaussian_kernel():
    k = gaussian_kernel(5, 1.0)
    assert np.sum(k.taps) == pytest.approx(1.0)
    np.testing.assert_array_equal(k.offsets, [-2, -1, 0, 1, 2])
    np.testing.assert_allclose(k.taps, k.taps[::-1])


def test_delta_kernel_is_identity():
    x = np.arange(N, dtype=float)
    np.testing.assert_array_equal(circ_conv(make_kernel("delta"), x), x)


def test_circ_corr_is_adjoint_of_conv():
    k = Kernel([0.2, 0.5, 0.3], centered_offsets(3))
    rng = np.random.default_rng(5)
    x = rng.standard_normal(N)
    u = rng.standard_normal(N)
    assert np.dot(circ_conv(k, x), u) == pytest.approx(np.dot(x, circ_corr(k, u)))


def test_kernel_too_large():
    with pytest.raises(ConfigurationError):
        CircConvOperator(3, gaussian_kernel(5))


def test_make_kernel():
    k = make_kernel([0.1, 0.8, 0.1])
    np.testing.assert_array_equal(k.offsets, [-1, 0, 1])
    with pytest.raises(ConfigurationError):
        make_kernel("box")


def test_shape_errors():
    op = IdentityOperator(N)
    with pytest.raises(ShapeError):
        op.apply(np.zeros(N + 1))
    with pytest.raises(ShapeError):
        op.vjp(None, np.zeros(N - 1))
    with pytest.raises(ShapeError):
        Kernel([1.0, 2.0], [0])


def test_gaussian_operator_scaling():
    op = gaussian_operator(400, 20, 0)
    assert np.var(op.matrix()) == pytest.approx(1.0 / 400, rel=0.1)


def test_matrix_operator_scaled():
    op = MatrixOperator(np.eye(3))
    np.testing.assert_allclose(op.scaled(2.0).apply(np.ones(3)), 2.0 * np.ones(3))


def test_add_noise():
    y = np.ones(N)
    np.testing.assert_array_equal(add_noise(y, 0.0, 1), y)
    np.testing.assert_array_equal(add_noise(y, 0.1, 1), add_noise(y, 0.1, 1))
    assert not np.array_equal(add_noise(y, 0.1, 1), y)
    with pytest.raises(ConfigurationError):
        add_noise(y, -0.1, 1)


@pytest.mark.parametrize("kind", TASK_KINDS)
def test_make_operator(kind):
    op = make_operator(kind, 16, seed=0)
    assert op.in_dim == 16
    assert op.apply(np.ones(16)).shape == (op.out_dim,)
    if kind == KIND_BLIND_DEBLUR:
        assert isinstance(op, CircConvOperator)


def test_make_operator_unknown():
    with pytest.raises(ConfigurationError):
        make_operator("tomography", 16)
