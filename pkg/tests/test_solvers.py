import numpy as np
import pytest

from dmilo.api import make_schedule, make_toy_prior, GmmDenoiser, DenoiserInterface, CountingDenoiser, \
    IdentityOperator, mask_operator, circ_conv_operator, gaussian_kernel, sample_compose, add_noise, compute_metrics, \
    Kernel, centered_offsets, circ_conv, circ_corr, circ_conv_kernel_vjp, ddim_step, soft_threshold, \
    RetainedContextCounter, ConfigurationError, ShapeError, DivergenceError
from dmilo.solver import Dmilo, DmiloPgd, Dmplug, DmiloBid, DmiloPgdBid, conv_step_size, impulse_response

FAST = {"inner_iters": 20, "outer_iters": 2}

# stream of the ground-truth latent, kept apart from the solvers' default_rng(seed) draws
GROUND_TRUTH_STREAM = 7919


def _problem(n: int = 8, N: int = 3, seed: int = 0, operator: str = "identity", sigma: float = 0.0):
    s = make_schedule(N=N)
    prior = make_toy_prior(K=3, n=n, tau=0.1, seed=0)
    d = GmmDenoiser(prior, s)
    latent = np.random.default_rng([seed, GROUND_TRUTH_STREAM]).standard_normal(n)
    xstar, _ = sample_compose(s, d, latent)
    if operator == "identity":
        A = IdentityOperator(n)
    elif operator == "inpaint":
        A = mask_operator(n, 0.5, seed)
    else:
        A = circ_conv_operator(n, gaussian_kernel(5, 1.0))
    y = add_noise(A.apply(xstar), sigma, seed)
    return s, d, A, xstar, y


def _solver(cls, **kwargs):
    result = cls(**kwargs)
    result.initialize()
    return result


@pytest.mark.parametrize("cls", [Dmilo, DmiloPgd])
@pytest.mark.parametrize("N", [2, 3, 5])
def test_ilo_context_peak_is_one(cls, N):
    s, d, A, _, y = _problem(N=N)
    report = _solver(cls, inner_iters=3, outer_iters=1).solve(y, A, s, d)
    assert report.context_peak == 1


@pytest.mark.parametrize("N", [2, 3, 5])
def test_dmplug_context_peak_is_n(N):
    s, d, A, _, y = _problem(N=N)
    report = _solver(Dmplug, inner_iters=3, outer_iters=1).solve(y, A, s, d)
    assert report.context_peak == N


def test_dmilo_reduces_residual():
    s, d, A, _, y = _problem()
    report = _solver(Dmilo, inner_iters=100, outer_iters=3).solve(y, A, s, d)
    assert len(report.residuals) == 3
    assert report.residual_final < report.residual_init
    assert report.nfe > 0
    assert report.wall_ms >= 0


def test_dmilo_chain_consistent():
    s, d, A, _, y = _problem()
    report = _solver(Dmilo, **FAST).solve(y, A, s, d)
    assert report.state.consistency_error(s, d) < 1e-12
    np.testing.assert_array_equal(report.estimate, report.state.estimate)


def test_dmilo_deterministic():
    s, d, A, _, y = _problem(operator="inpaint")
    a = _solver(Dmilo, seed=3, **FAST).solve(y, A, s, d)
    b = _solver(Dmilo, seed=3, **FAST).solve(y, A, s, d)
    np.testing.assert_array_equal(a.estimate, b.estimate)
    assert a.residuals == b.residuals
    c = _solver(Dmilo, seed=4, **FAST).solve(y, A, s, d)
    assert not np.array_equal(a.estimate, c.estimate)


def test_frozen_deviations_stay_zero():
    s, d, A, _, y = _problem()
    report = _solver(Dmilo, sparse_deviation=False, **FAST).solve(y, A, s, d)
    for nu in report.state.deviations:
        np.testing.assert_array_equal(nu, np.zeros(d.n))


def test_last_timestep_only():
    s, d, A, _, y = _problem()
    report = _solver(Dmilo, last_timestep_only=True, seed=5, **FAST).solve(y, A, s, d)
    assert report.state.active_steps == 1
    xT = np.random.default_rng(5).standard_normal(d.n)
    np.testing.assert_array_equal(report.state.latents[s.N], xT)
    assert report.state.consistency_error(s, d) < 1e-12


def test_dmplug_single_step_matches_dmilo_without_deviation():
    s, d, A, _, y = _problem(N=1, operator="inpaint")
    a = _solver(Dmplug, seed=1, **FAST).solve(y, A, s, d)
    b = _solver(Dmilo, seed=1, sparse_deviation=False, **FAST).solve(y, A, s, d)
    np.testing.assert_allclose(a.estimate, b.estimate, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(a.residuals, b.residuals, rtol=1e-8, atol=1e-12)


@pytest.mark.parametrize("operator", ["identity", "inpaint", "deblur"])
def test_pgd_fidelity_descends(operator):
    s, d, A, _, y = _problem(operator=operator, sigma=0.01)
    report = _solver(DmiloPgd, eta=0.4, **FAST).solve(y, A, s, d)
    assert len(report.fidelity_trace) == 2
    for entry in report.fidelity_trace:
        assert entry["after"] <= entry["before"]


def test_pgd_first_gradient_step_from_zero():
    s, d, A, _, y = _problem()
    report = _solver(DmiloPgd, eta=0.5, inner_iters=2, outer_iters=1).solve(y, A, s, d)
    # identity operator and eta=0.5 land exactly on y
    assert report.fidelity_trace[0]["before"] == pytest.approx(np.dot(y, y))
    assert report.fidelity_trace[0]["after"] == pytest.approx(0.0, abs=1e-20)


def test_pgd_without_iterations_returns_initial_estimate():
    s, d, A, _, y = _problem()
    report = _solver(DmiloPgd, inner_iters=2, outer_iters=0).solve(y, A, s, d)
    assert report.residuals == []
    assert report.residual_final == report.residual_init
    np.testing.assert_array_equal(report.estimate, report.state.estimate)


def test_pgd_distance_projection():
    s, d, A, _, y = _problem(operator="inpaint")
    report = _solver(DmiloPgd, projection="distance", **FAST).solve(y, A, s, d)
    assert report.context_peak == 1
    assert np.all(np.isfinite(report.estimate))


def test_blind_solvers_ignore_operator():
    s, d, A, _, y = _problem(operator="deblur", sigma=0.01)
    for cls in [DmiloBid, DmiloPgdBid]:
        solver = _solver(cls, **FAST)
        assert solver.is_blind()
        report = solver.solve(y, None, s, d)
        assert report.kernel.support == 5
        assert report.context_peak == 1
        assert np.isfinite(report.residual_final)


def test_blind_kernel_init_seeded():
    s, d, A, _, y = _problem(operator="deblur")
    a = _solver(DmiloBid, seed=2, **FAST).solve(y, None, s, d)
    b = _solver(DmiloBid, seed=2, **FAST).solve(y, None, s, d)
    np.testing.assert_array_equal(a.kernel.taps, b.kernel.taps)


def test_normalized_kernel():
    s, d, A, _, y = _problem(operator="deblur")
    report = _solver(DmiloBid, normalize_kernel=True, kernel_init=[0.1, 0.2, 0.4, 0.2, 0.1], **FAST).solve(y, None, s, d)
    assert np.sum(report.kernel.taps) == pytest.approx(1.0)


def test_pgd_bid_with_known_kernel_matches_pgd():
    s, d, A, _, y = _problem(operator="deblur", sigma=0.01)
    kwargs = dict(seed=7, inner_iters=20, outer_iters=3)
    blind = _solver(DmiloPgdBid, eta_x=0.4, eta_k=0.0, kernel_init=A.kernel.taps.tolist(), **kwargs).solve(y, None, s, d)
    known = _solver(DmiloPgd, eta=0.4, **kwargs).solve(y, A, s, d)
    np.testing.assert_allclose(blind.estimate, known.estimate, rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(blind.residuals, known.residuals, rtol=1e-6, atol=1e-10)
    np.testing.assert_array_equal(blind.kernel.taps, A.kernel.taps)


def test_conv_step_size_descends():
    rng = np.random.default_rng(11)
    n = 16
    k = Kernel(rng.standard_normal(5), centered_offsets(5))
    x = rng.standard_normal(n)
    y = rng.standard_normal(n)

    def fidelity(kernel, image):
        r = y - circ_conv(kernel, image)
        return float(np.dot(r, r))

    eta_x = conv_step_size(impulse_response(k, n))
    x_next = x - eta_x * 2.0 * circ_corr(k, circ_conv(k, x) - y)
    assert eta_x > 0
    assert fidelity(k, x_next) <= fidelity(k, x)
    eta_k = conv_step_size(x)
    k_next = k.with_taps(k.taps - eta_k * 2.0 * circ_conv_kernel_vjp(k, x, circ_conv(k, x) - y))
    assert eta_k > 0
    assert fidelity(k_next, x) <= fidelity(k, x)
    assert conv_step_size(np.zeros(n)) == 0.0
    np.testing.assert_array_equal(impulse_response(Kernel([1.0], [0]), 4), [1.0, 0.0, 0.0, 0.0])


def test_pgd_bid_default_learns_kernel():
    s, d, A, _, y = _problem(n=16, operator="deblur", sigma=0.01)
    initial = np.random.default_rng([3, 1]).standard_normal(5)
    report = _solver(DmiloPgdBid, inner_iters=20, outer_iters=3, seed=3).solve(y, None, s, d)
    assert not np.allclose(report.kernel.taps, initial)
    for entry in report.fidelity_trace:
        assert entry["after"] <= entry["before"] * (1.0 + 1e-12)
    bid = _solver(DmiloBid, inner_iters=20, outer_iters=3, seed=3).solve(y, None, s, d)
    assert not np.allclose(bid.kernel.taps, initial)


def test_solvers_start_away_from_ground_truth():
    for seed in range(3):
        s, d, A, xstar, y = _problem(seed=seed)
        latent = np.random.default_rng([seed, GROUND_TRUTH_STREAM]).standard_normal(d.n)
        assert not np.array_equal(latent, np.random.default_rng(seed).standard_normal(d.n))
        report = _solver(Dmilo, seed=seed, **FAST).solve(y, A, s, d)
        assert report.residual_init > 1e-3


def test_upper_layer_fit_within_threshold():
    s, d, _, _, _ = _problem()
    solver = _solver(Dmilo, **FAST)
    solver._counter = RetainedContextCounter()
    solver._denoiser = CountingDenoiser(d)
    state = solver._init_state(s)
    target = state.latents[1] + 0.3
    solver._solve_layer(s, state, 2, target)
    residual = target - ddim_step(s, d, 2, state.latents[2])
    np.testing.assert_allclose(state.deviations[2], soft_threshold(residual, solver.lam / 2.0))
    assert np.max(np.abs(residual - state.deviations[2])) <= solver.lam / 2.0 + 1e-12
    assert solver._counter.current == 0


def test_measurement_shape_checked():
    s, d, A, _, y = _problem()
    with pytest.raises(ShapeError):
        _solver(Dmilo, **FAST).solve(y[:-1], A, s, d)


class _NanDenoiser(DenoiserInterface):

    def __init__(self, n):
        self._n = n

    @property
    def n(self) -> int:
        return self._n

    def predict(self, x, t):
        return np.full_like(np.asarray(x, dtype=float), np.nan)

    def vjp(self, x, t, u):
        return np.full_like(np.asarray(x, dtype=float), np.nan)


def test_divergence_names_layer_and_outer():
    s = make_schedule()
    with pytest.raises(DivergenceError) as e:
        _solver(Dmilo, **FAST).solve(np.zeros(4), IdentityOperator(4), s, _NanDenoiser(4))
    assert e.value.layer == 1
    assert e.value.outer == 1


@pytest.mark.parametrize("cls,kwargs", [
    (Dmilo, {"outer_iters": -1}),
    (Dmilo, {"mode": "newton"}),
    (DmiloPgd, {"eta": -0.5}),
    (DmiloPgd, {"projection": "orthogonal"}),
    (DmiloBid, {"kernel_size": 0}),
    (DmiloPgdBid, {"eta_k": -1.0}),
])
def test_invalid_options(cls, kwargs):
    with pytest.raises(ConfigurationError):
        _solver(cls, **kwargs)


def test_command_line_options():
    solver = Dmilo()
    solver.parse_args(["-J", "3", "--inner_iters", "12", "--no_sparse_deviation", "--mode", "proximal"])
    solver.initialize()
    assert solver.outer_iters == 3
    assert solver.inner_iters == 12
    assert not solver.sparse_deviation
    assert solver.mode == "proximal"


def test_plugin_names():
    assert [cls().name() for cls in [Dmilo, DmiloPgd, Dmplug, DmiloBid, DmiloPgdBid]] == \
           ["dmilo", "dmilo_pgd", "dmplug", "dmilo_bid", "dmilo_pgd_bid"]


# acceptance runs


def _median_over_seeds(cls, seeds, operator="identity", sigma=0.0, n=16, **kwargs):
    reductions = []
    mses = []
    for seed in seeds:
        s, d, A, xstar, y = _problem(n=n, seed=seed, operator=operator, sigma=sigma)
        report = _solver(cls, seed=seed, **kwargs).solve(y, A, s, d)
        reductions.append(report.residual_init / max(report.residual_final, 1e-300))
        mses.append(compute_metrics(report.estimate, xstar, peak=1.0).mse)
    return float(np.median(reductions)), float(np.median(mses))


@pytest.mark.slow
@pytest.mark.parametrize("N", [2, 3, 5, 10])
def test_memory_law(N):
    s, d, A, _, y = _problem(N=N)
    for cls in [Dmilo, DmiloPgd]:
        assert _solver(cls, inner_iters=5, outer_iters=2).solve(y, A, s, d).context_peak == 1
    assert _solver(Dmplug, inner_iters=5, outer_iters=2).solve(y, A, s, d).context_peak == N


@pytest.mark.slow
@pytest.mark.parametrize("cls", [Dmilo, DmiloPgd, Dmplug])
def test_noise_free_in_range_recovery(cls):
    reduction, mse = _median_over_seeds(cls, range(20), inner_iters=200, outer_iters=10)
    assert reduction >= 10.0
    if cls is Dmilo:
        assert mse <= 1e-3


@pytest.mark.slow
def test_pgd_descent_contract():
    for seed in range(20):
        s, d, A, _, y = _problem(n=16, seed=seed, operator="inpaint", sigma=0.01)
        report = _solver(DmiloPgd, eta=0.5, inner_iters=50, outer_iters=5, seed=seed).solve(y, A, s, d)
        assert all(e["after"] <= e["before"] for e in report.fidelity_trace)


@pytest.mark.slow
def test_delta_kernel_bid_close_to_known_operator():
    ratios = []
    for seed in range(20):
        s, d, _, xstar, _ = _problem(n=16, seed=seed)
        A = circ_conv_operator(16, gaussian_kernel(1))
        y = A.apply(xstar)
        kwargs = dict(seed=seed, inner_iters=200, outer_iters=10)
        blind = _solver(DmiloBid, kernel_size=1, **kwargs).solve(y, None, s, d)
        known = _solver(Dmilo, **kwargs).solve(y, A, s, d)
        ratios.append(compute_metrics(blind.estimate, xstar, peak=1.0).mse
                      / max(compute_metrics(known.estimate, xstar, peak=1.0).mse, 1e-300))
    assert np.median(ratios) <= 2.0


@pytest.mark.slow
def test_pgd_bid_reduces_residual():
    initial = []
    final = []
    for seed in range(20):
        s, d, _, _, y = _problem(n=16, seed=seed, operator="deblur", sigma=0.01)
        report = _solver(DmiloPgdBid, seed=seed, inner_iters=50, outer_iters=5).solve(y, None, s, d)
        initial.append(report.residual_init)
        final.append(report.residual_final)
    assert np.median(final) < np.median(initial)
