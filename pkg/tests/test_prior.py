import numpy as np
import pytest

from dmilo.api import make_prior, make_toy_prior, prior_from_dict, load_prior, sample_prior, score, denoise, \
    denoise_vjp, marginal_log_density, GmmDenoiser, CountingDenoiser, ConfigurationError, ShapeError, DomainError

from conftest import central_difference_vjp, relative_error


def test_toy_prior_deterministic():
    a = make_toy_prior(K=4, n=6, tau=0.2, seed=3)
    b = make_toy_prior(K=4, n=6, tau=0.2, seed=3)
    np.testing.assert_array_equal(a.means, b.means)
    assert np.max(np.abs(a.means)) == pytest.approx(1.0)
    np.testing.assert_allclose(a.weights, 0.25)


@pytest.mark.parametrize("weights,means,stddevs", [
    ([0.5, 0.4], [[0.0], [1.0]], 0.1),
    ([1.5, -0.5], [[0.0], [1.0]], 0.1),
    ([0.5, 0.5], [[0.0], [1.0]], 0.0),
])
def test_invalid_prior(weights, means, stddevs):
    with pytest.raises(ConfigurationError):
        make_prior(weights, means, stddevs)


def test_means_count_mismatch():
    with pytest.raises(ShapeError):
        make_prior([0.5, 0.5], [[0.0, 1.0]], 0.1)


def test_prior_from_dict_uniform_weights():
    p = prior_from_dict({"means": [[0.0, 0.0], [1.0, 1.0]], "tau": 0.2})
    np.testing.assert_allclose(p.weights, [0.5, 0.5])
    np.testing.assert_allclose(p.stddevs, [0.2, 0.2])


def test_load_prior(tmp_path):
    path = tmp_path / "prior.json"
    path.write_text('{"means": [[0.0, 1.0]], "stddevs": [0.5]}')
    p = load_prior(str(path))
    assert p.K == 1
    assert p.n == 2


def test_sample_prior_seeded(prior):
    a = sample_prior(prior, 5, 10)
    b = sample_prior(prior, 5, 10)
    assert a.shape == (10, prior.n)
    np.testing.assert_array_equal(a, b)
    with pytest.raises(ConfigurationError):
        sample_prior(prior, 5, 0)


def test_single_gaussian_denoiser(schedule):
    mean = np.array([0.3, -0.2, 0.5])
    tau = 0.4
    p = make_prior([1.0], [mean], tau)
    t = schedule.t(2)
    alpha = schedule.alpha(t)
    sigma = schedule.sigma(t)
    x = np.array([0.1, 0.7, -0.4])
    expected = mean + alpha * tau ** 2 / (alpha ** 2 * tau ** 2 + sigma ** 2) * (x - alpha * mean)
    np.testing.assert_allclose(denoise(p, schedule, x, t), expected, rtol=1e-12)


def test_lipschitz_single(schedule):
    p = make_prior([1.0], [[0.0, 0.0]], 0.5)
    t = schedule.t(1)
    alpha = schedule.alpha(t)
    sigma = schedule.sigma(t)
    assert p.lipschitz_single(schedule, t) == pytest.approx(alpha * 0.25 / (alpha ** 2 * 0.25 + sigma ** 2))
    with pytest.raises(ConfigurationError):
        make_toy_prior(K=2, n=2).lipschitz_single(schedule, t)


def test_tweedie_identity(prior, schedule, rng):
    for _ in range(20):
        t = rng.uniform(schedule.epsilon, schedule.T)
        x = rng.standard_normal(prior.n)
        residual = schedule.alpha(t) * denoise(prior, schedule, x, t) - x - schedule.sigma(t) ** 2 * score(prior, schedule, x, t)
        assert np.max(np.abs(residual)) < 1e-10


def test_score_is_gradient_of_log_density(prior, schedule, rng):
    for i in range(1, schedule.N + 1):
        t = schedule.t(i)
        x = rng.standard_normal(prior.n)
        fd = central_difference_vjp(lambda v: np.array([marginal_log_density(prior, schedule, v, t)]), x, np.ones(1))
        assert relative_error(score(prior, schedule, x, t), fd) < 1e-5


def test_denoise_vjp(prior, schedule, rng):
    for _ in range(20):
        t = schedule.t(int(rng.integers(1, schedule.N + 1)))
        x = rng.standard_normal(prior.n)
        u = rng.standard_normal(prior.n)
        fd = central_difference_vjp(lambda v: denoise(prior, schedule, v, t), x, u)
        assert relative_error(denoise_vjp(prior, schedule, x, t, u), fd) < 1e-5


def test_denoise_vjp_at_end_times(prior, schedule, rng):
    for t in [schedule.T, schedule.epsilon]:
        for _ in range(10):
            x = rng.standard_normal(prior.n)
            u = rng.standard_normal(prior.n)
            fd = central_difference_vjp(lambda v: denoise(prior, schedule, v, t), x, u)
            assert relative_error(denoise_vjp(prior, schedule, x, t, u), fd) < 1e-5


def test_denoise_matches_tweedie_form(prior, schedule, rng):
    t = schedule.t(2)
    alpha = schedule.alpha(t)
    sigma = schedule.sigma(t)
    x = rng.standard_normal((5, prior.n))
    expected = (x + sigma ** 2 * score(prior, schedule, x, t)) / alpha
    np.testing.assert_allclose(denoise(prior, schedule, x, t), expected, rtol=1e-9, atol=1e-12)


def test_batch_matches_single(prior, schedule, rng):
    t = schedule.t(2)
    x = rng.standard_normal((4, prior.n))
    batch = denoise(prior, schedule, x, t)
    for j in range(4):
        np.testing.assert_allclose(batch[j], denoise(prior, schedule, x[j], t), rtol=1e-12)


def test_time_and_shape_checks(prior, schedule):
    with pytest.raises(DomainError):
        score(prior, schedule, np.zeros(prior.n), 2.0)
    with pytest.raises(ShapeError):
        score(prior, schedule, np.zeros(prior.n + 1), 0.5)


def test_extreme_inputs_stay_finite(prior, schedule):
    x = np.full(prior.n, 1e3)
    assert np.all(np.isfinite(score(prior, schedule, x, schedule.epsilon)))
    assert np.isfinite(marginal_log_density(prior, schedule, x, schedule.epsilon))


def test_counting_denoiser(prior, schedule):
    d = CountingDenoiser(GmmDenoiser(prior, schedule))
    d.predict(np.zeros(prior.n), 0.5)
    d.vjp(np.zeros(prior.n), 0.5, np.ones(prior.n))
    d.predict(np.zeros((3, prior.n)), 0.5)
    assert d.nfe == 5
    assert d.n == prior.n


@pytest.mark.slow
def test_gradients_at_many_points(prior, schedule, rng):
    for _ in range(100):
        t = schedule.t(int(rng.integers(1, schedule.N + 1)))
        x = rng.standard_normal(prior.n)
        u = rng.standard_normal(prior.n)
        fd = central_difference_vjp(lambda v: np.array([marginal_log_density(prior, schedule, v, t)]), x, np.ones(1))
        assert relative_error(score(prior, schedule, x, t), fd) < 1e-5
        fd = central_difference_vjp(lambda v: denoise(prior, schedule, v, t), x, u)
        assert relative_error(denoise_vjp(prior, schedule, x, t, u), fd) < 1e-5


@pytest.mark.slow
def test_tweedie_identity_at_many_points(prior, schedule, rng):
    for _ in range(100):
        t = rng.uniform(schedule.epsilon, schedule.T)
        x = rng.standard_normal(prior.n)
        residual = schedule.alpha(t) * denoise(prior, schedule, x, t) - x - schedule.sigma(t) ** 2 * score(prior, schedule, x, t)
        assert np.max(np.abs(residual)) < 1e-10
