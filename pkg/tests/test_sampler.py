import csv

import numpy as np
import pytest

from dmilo.api import RetainedContextCounter, step_coefficients, ddim_step, ddim_step_vjp, sample_compose, \
    compose_vjp, write_trace_csv, StepMapping, ComposedMapping, make_schedule, make_prior, GmmDenoiser, \
    DenoiserInterface, DomainError, ShapeError

from conftest import central_difference_vjp, relative_error


def test_step_coefficients(schedule):
    for i in range(1, schedule.N + 1):
        a, b = step_coefficients(schedule, i)
        assert a == pytest.approx(schedule.sigma_at(i - 1) / schedule.sigma_at(i))
        assert b == pytest.approx(schedule.alpha_at(i - 1) - a * schedule.alpha_at(i))
        assert 0 < a < 1


def test_step_index_range(schedule, denoiser):
    with pytest.raises(DomainError):
        ddim_step(schedule, denoiser, 0, np.zeros(denoiser.n))
    with pytest.raises(DomainError):
        ddim_step(schedule, denoiser, schedule.N + 1, np.zeros(denoiser.n))


def test_step_shape(schedule, denoiser):
    with pytest.raises(ShapeError):
        ddim_step(schedule, denoiser, 1, np.zeros(denoiser.n + 2))


def test_step_matches_formula(schedule, denoiser, rng):
    x = rng.standard_normal(denoiser.n)
    a, b = step_coefficients(schedule, 2)
    expected = a * x + b * denoiser.predict(x, schedule.t(2))
    np.testing.assert_allclose(ddim_step(schedule, denoiser, 2, x), expected)


def test_step_vjp(schedule, denoiser, rng):
    for _ in range(20):
        i = int(rng.integers(1, schedule.N + 1))
        x = rng.standard_normal(denoiser.n)
        u = rng.standard_normal(denoiser.n)
        fd = central_difference_vjp(lambda v: ddim_step(schedule, denoiser, i, v), x, u)
        assert relative_error(ddim_step_vjp(schedule, denoiser, i, x, u), fd) < 1e-5


def test_compose_trace_and_counter(schedule, denoiser, rng):
    counter = RetainedContextCounter()
    x, trace = sample_compose(schedule, denoiser, rng.standard_normal(denoiser.n), counter=counter)
    assert len(trace) == schedule.N + 1
    np.testing.assert_array_equal(trace[-1], x)
    assert counter.peak == 1
    assert counter.current == 0


@pytest.mark.parametrize("N", [1, 2, 3, 5, 10])
def test_retain_all_peak(prior, N):
    s = make_schedule(N=N)
    d = GmmDenoiser(prior, s)
    counter = RetainedContextCounter()
    _, trace = sample_compose(s, d, np.ones(prior.n), counter=counter, retain_all=True)
    assert counter.current == N
    compose_vjp(s, d, trace, np.ones(prior.n), counter=counter)
    assert counter.peak == N
    assert counter.current == 0


def test_compose_vjp(schedule, denoiser, rng):
    x = rng.standard_normal(denoiser.n)
    u = rng.standard_normal(denoiser.n)
    _, trace = sample_compose(schedule, denoiser, x)
    result = compose_vjp(schedule, denoiser, trace, u, retained=False)
    fd = central_difference_vjp(lambda v: sample_compose(schedule, denoiser, v)[0], x, u)
    assert relative_error(result, fd) < 1e-5


def test_last_step(schedule, denoiser, rng):
    x = rng.standard_normal(denoiser.n)
    result, trace = sample_compose(schedule, denoiser, x, last_step=1)
    assert len(trace) == 2
    np.testing.assert_allclose(result, ddim_step(schedule, denoiser, 1, x))


def test_counter_release_underflow():
    counter = RetainedContextCounter()
    counter.acquire()
    counter.release()
    with pytest.raises(DomainError):
        counter.release()


def test_step_mapping(schedule, denoiser, rng):
    m = StepMapping(schedule, denoiser, 1)
    x = rng.standard_normal(denoiser.n)
    np.testing.assert_array_equal(m.apply(x), ddim_step(schedule, denoiser, 1, x))
    with pytest.raises(DomainError):
        StepMapping(schedule, denoiser, 0)


def test_composed_mapping_contexts(schedule, denoiser, rng):
    counter = RetainedContextCounter()
    m = ComposedMapping(schedule, denoiser, counter)
    x = rng.standard_normal(denoiser.n)
    m.apply(x)
    assert counter.current == schedule.N
    m.vjp(x, np.ones(denoiser.n))
    assert counter.current == 0
    m.apply(x)
    m.close()
    assert counter.current == 0
    assert counter.peak == schedule.N


def test_write_trace_csv(tmp_path, schedule, denoiser):
    _, trace = sample_compose(schedule, denoiser, np.ones(denoiser.n))
    path = str(tmp_path / "trace.csv")
    write_trace_csv(trace, path)
    with open(path, "r") as fp:
        rows = list(csv.reader(fp))
    assert rows[0] == ["step", "norm"]
    assert [r[0] for r in rows[1:]] == [str(i) for i in range(schedule.N, -1, -1)]
    assert float(rows[1][1]) == pytest.approx(np.linalg.norm(np.ones(denoiser.n)))


class _PointMassDenoiser(DenoiserInterface):

    def __init__(self, mean):
        self.mean = np.asarray(mean, dtype=float)

    @property
    def n(self) -> int:
        return len(self.mean)

    def predict(self, x, t):
        return np.broadcast_to(self.mean, np.shape(x)).copy()

    def vjp(self, x, t, u):
        return np.zeros_like(np.asarray(x, dtype=float))


class _AffineDenoiser(DenoiserInterface):

    def __init__(self, matrix, offset):
        self.matrix = np.asarray(matrix, dtype=float)
        self.offset = np.asarray(offset, dtype=float)

    @property
    def n(self) -> int:
        return len(self.offset)

    def predict(self, x, t):
        return np.asarray(x, dtype=float) @ self.matrix.T + self.offset

    def vjp(self, x, t, u):
        return np.asarray(u, dtype=float) @ self.matrix


class _TableSchedule(object):
    """
    Two-point grid with prescribed (alpha, sigma) pairs.
    """

    N = 1

    def __init__(self, alphas, sigmas):
        self.alphas = alphas
        self.sigmas = sigmas

    def t(self, i):
        return 0.5 * i

    def alpha_at(self, i):
        return self.alphas[i]

    def sigma_at(self, i):
        return self.sigmas[i]


def test_point_mass_moves_along_alpha(schedule):
    mean = np.array([0.4, -1.0, 2.5])
    d = _PointMassDenoiser(mean)
    for i in range(1, schedule.N + 1):
        result = ddim_step(schedule, d, i, schedule.alpha_at(i) * mean)
        np.testing.assert_allclose(result, schedule.alpha_at(i - 1) * mean, rtol=1e-12)


def test_step_numeric_value():
    s = _TableSchedule([0.9, 0.5], [0.4359, 0.8660])
    result = ddim_step(s, _PointMassDenoiser([1.0]), 1, np.array([0.5]))
    assert result[0] == pytest.approx(0.9, abs=1e-3)


def test_step_affine_in_latent(schedule, rng):
    B = rng.standard_normal((4, 4))
    d = _AffineDenoiser(B, rng.standard_normal(4))
    x1 = rng.standard_normal(4)
    x2 = rng.standard_normal(4)
    u = rng.standard_normal(4)
    for i in range(1, schedule.N + 1):
        a, b = step_coefficients(schedule, i)
        J = a * np.eye(4) + b * B
        np.testing.assert_allclose(ddim_step(schedule, d, i, x1) - ddim_step(schedule, d, i, x2), J @ (x1 - x2),
                                   rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(ddim_step_vjp(schedule, d, i, x1, u), J.T @ u, rtol=1e-10, atol=1e-12)


@pytest.mark.slow
def test_sampling_reaches_prior_marginal():
    mean = np.array([1.0, -0.5, 0.25, 0.0])
    tau = 0.5
    s = make_schedule(N=500)
    d = GmmDenoiser(make_prior([1.0], [mean], tau), s)
    draws = 10000
    xT = np.random.default_rng(0).standard_normal((draws, len(mean)))
    x0, _ = sample_compose(s, d, xT)
    alpha = s.alpha_at(0)
    sigma = s.sigma_at(0)
    np.testing.assert_array_less(np.abs(np.mean(x0, axis=0) - alpha * mean), 5.0 / np.sqrt(draws) * tau)
    expected = alpha ** 2 * tau ** 2 + sigma ** 2
    np.testing.assert_array_less(np.abs(np.var(x0, axis=0) / expected - 1.0), 0.1)
