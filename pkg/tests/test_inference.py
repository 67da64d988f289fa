import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from cfexpansion import _kernels as K
from cfexpansion.expansion import CorrectionSpec, transition_log_proxy
from cfexpansion.inference import (
    ObservationMode,
    ObservationSet,
    Posterior,
    SamplerConfig,
    default_priors,
    initial_path,
    log_likelihood,
    mle_fit,
    rwm_sample,
    simulate_observations,
    to_natural,
    to_unconstrained,
)
from cfexpansion.models import FitzHughNagumo, OrnsteinUhlenbeck

LINEAR = CorrectionSpec(2, 2, "exact-linear")


def ou_exact_logpdf(theta, x, y, dt):
    kappa, mu, sigma = theta
    e = np.exp(-kappa * dt)
    return stats.norm(mu + (x - mu) * e, np.sqrt(sigma**2 * (1 - e**2) / (2 * kappa))).logpdf(y)


@pytest.fixture(scope="module")
def ou_data():
    ou = OrnsteinUhlenbeck(kappa=1.5, mu=0.5, sigma=0.6)
    obs, path = simulate_observations(ou, [0.0], 0.1, 400, 50, seed=4)
    return ou, obs, path


def test_observation_set_validation(tmp_path):
    with pytest.raises(ValueError):
        ObservationSet(np.array([0.0, 0.1, 0.3]), np.zeros(3))
    with pytest.raises(ValueError):
        ObservationSet(np.arange(4) * 0.1, np.zeros(4), ObservationMode.NOISY)
    obs = ObservationSet(np.arange(5) * 0.1, np.arange(5.0), ObservationMode.NOISY, noise_sd=0.1)
    obs.write_csv(tmp_path / "o.csv")
    back = ObservationSet.read_csv(tmp_path / "o.csv", ObservationMode.NOISY, 0.1)
    np.testing.assert_array_equal(back.values, obs.values)
    assert back.dt == pytest.approx(0.1) and back.n == 4


def test_noisy_observations_use_separate_stream():
    m = FitzHughNagumo()
    full, path = simulate_observations(m, [0.0, 0.0], 0.05, 20, 10, seed=3)
    noisy, path2 = simulate_observations(m, [0.0, 0.0], 0.05, 20, 10, seed=3, noise_sd=0.01)
    np.testing.assert_array_equal(path, path2)
    assert np.std(noisy.values - path[:, 0]) == pytest.approx(0.01, rel=0.5)


def test_ou_log_likelihood_exact(ou_data):
    ou, obs, path = ou_data
    ref = ou_exact_logpdf(ou.theta, path[:-1, 0], path[1:, 0], 0.1).sum()
    assert log_likelihood(LINEAR, ou, obs) == pytest.approx(ref, rel=1e-12)


def test_fhn_log_likelihood_is_sum_of_proxies():
    m = FitzHughNagumo()
    obs, path = simulate_observations(m, [0.0, 0.0], 0.05, 50, 20, seed=1)
    spec = CorrectionSpec(4, 2, "DE-I")
    ref = transition_log_proxy(spec, m, path[:-1], path[1:], 0.05).sum()
    assert log_likelihood(spec, m, obs) == pytest.approx(ref, rel=1e-10)


def test_ou_mle_matches_regression_oracle(ou_data):
    # the exact OU likelihood is an AR(1) regression with a closed-form maximiser
    ou, obs, path = ou_data
    x, y = path[:-1, 0], path[1:, 0]
    a, c = np.polyfit(x, y, 1)
    v = np.mean((y - a * x - c) ** 2)
    kappa = -np.log(a) / 0.1
    ref = np.array([kappa, c / (1 - a), np.sqrt(v * 2 * kappa / (1 - a**2))])
    res = mle_fit(LINEAR, ou, obs, [1.0, 0.0, 1.0], budget=3000)
    assert res.converged
    np.testing.assert_allclose(res.theta_hat, ref, rtol=1e-4, atol=1e-5)


@given(st.lists(st.floats(0.01, 10.0), min_size=4, max_size=4))
def test_parameter_transform_round_trip(theta):
    m = FitzHughNagumo()
    np.testing.assert_allclose(to_natural(m, to_unconstrained(m, theta)), theta, rtol=1e-12)


def test_ou_mean_is_unconstrained():
    ou = OrnsteinUhlenbeck()
    phi = to_unconstrained(ou, [2.0, -0.5, 0.3])
    assert phi[1] == -0.5 and phi[0] == pytest.approx(np.log(2.0))


@pytest.fixture(scope="module")
def noisy_fhn():
    m = FitzHughNagumo(partial=True)
    obs, path = simulate_observations(m, [0.0, 0.0], 0.05, 40, 50, seed=2, noise_sd=0.01)
    return Posterior(CorrectionSpec(3, 2, "DE-II"), m, obs, default_priors(m)), path


@given(st.integers(0, 10_000))
def test_latent_path_round_trip(noisy_fhn, seed):
    post, _ = noisy_fhn
    phi = to_unconstrained(post.model, post.model.theta)
    eta = np.random.default_rng(seed).normal(size=(post.n_states, 2))
    X, ok = post.path(phi, eta)
    assert ok
    back, ok = post.latents(phi, X)
    np.testing.assert_allclose(back, eta, rtol=1e-8, atol=1e-8)


def test_noncentred_density_includes_jacobian():
    ou = OrnsteinUhlenbeck(kappa=1.0, mu=0.2, sigma=0.5)
    obs, _ = simulate_observations(ou, [0.0], 0.1, 30, 20, seed=5, noise_sd=0.1)
    post = Posterior(LINEAR, ou, obs, default_priors(ou))
    phi = to_unconstrained(ou, ou.theta)
    eta = np.random.default_rng(0).normal(size=(31, 1))
    lp_nc, X = post.log_post_noncentred(phi, eta)
    e = np.exp(-0.1)
    log_jac = np.log(post.priors.init_sd[0]) + 30 * 0.5 * np.log(0.25 * (1 - e**2) / 2)
    assert lp_nc == pytest.approx(post.log_post_centred(phi, X) + log_jac, rel=1e-12)


def test_centred_density_terms():
    ou = OrnsteinUhlenbeck(kappa=1.0, mu=0.2, sigma=0.5)
    obs, path = simulate_observations(ou, [0.0], 0.1, 30, 20, seed=5, noise_sd=0.1)
    pri = default_priors(ou)
    post = Posterior(LINEAR, ou, obs, pri)
    phi = to_unconstrained(ou, ou.theta)
    X = path
    ref = (
        stats.norm(X[:, 0], 0.1).logpdf(obs.values).sum()
        + ou_exact_logpdf(ou.theta, X[:-1, 0], X[1:, 0], 0.1).sum()
        + stats.norm(pri.init_mean[0], pri.init_sd[0]).logpdf(X[0, 0])
        + stats.norm(0, 1).logpdf(phi).sum()
    )
    assert post.log_post_centred(phi, X) == pytest.approx(ref, rel=1e-12)


def rts_smoother(kappa, mu, sigma, tau, m0, s0, y, dt):
    """Kalman filter and Rauch-Tung-Striebel smoother for a noisy OU path.

    Parameters may be arrays of equal shape; the filter runs on all of them
    at once and returns smoothed means, variances and the log-likelihood.
    """
    kappa, mu, sigma = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (kappa, mu, sigma)))
    a = np.exp(-kappa * dt)
    q = sigma**2 * (1 - a**2) / (2 * kappa)
    n = len(y)
    shape = (n,) + kappa.shape
    mf, Pf, mp, Pp = np.empty(shape), np.empty(shape), np.empty(shape), np.empty(shape)
    mp[0], Pp[0] = m0, s0**2
    loglik = np.zeros(kappa.shape)
    for k in range(n):
        if k:
            mp[k] = mu + a * (mf[k - 1] - mu)
            Pp[k] = a * a * Pf[k - 1] + q
        S = Pp[k] + tau**2
        loglik += -0.5 * (y[k] - mp[k]) ** 2 / S - 0.5 * np.log(2 * np.pi * S)
        g = Pp[k] / S
        mf[k] = mp[k] + g * (y[k] - mp[k])
        Pf[k] = (1 - g) * Pp[k]
    ms, Ps = mf.copy(), Pf.copy()
    for k in range(n - 2, -1, -1):
        c = Pf[k] * a / Pp[k + 1]
        ms[k] = mf[k] + c * (ms[k + 1] - mp[k + 1])
        Ps[k] = Pf[k] + c * c * (Ps[k + 1] - Pp[k + 1])
    return ms, Ps, loglik


def test_path_gaussian_is_kalman_smoother_for_linear_model():
    ou = OrnsteinUhlenbeck(kappa=1.3, mu=0.4, sigma=0.7)
    obs, _ = simulate_observations(ou, [0.0], 0.1, 25, 20, seed=8, noise_sd=0.2)
    pri = default_priors(ou)
    post = Posterior(LINEAR, ou, obs, pri)
    mu, Ld, Ls = post.path_gaussian(to_unconstrained(ou, ou.theta))
    ms, Ps, _ = rts_smoother(1.3, 0.4, 0.7, 0.2, pri.init_mean[0], pri.init_sd[0], obs.values, 0.1)
    n = len(ms)
    L = np.zeros((n, n))
    for k in range(n):
        L[k, k] = Ld[k, 0, 0]
        if k:
            L[k, k - 1] = Ls[k, 0, 0]
    cov = np.linalg.inv(L @ L.T)
    np.testing.assert_allclose(mu[:, 0], ms, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(np.diag(cov), Ps, rtol=1e-9)


def test_standardised_path_round_trip(noisy_fhn):
    post, path = noisy_fhn
    phi = to_unconstrained(post.model, post.model.theta)
    mu, Ld, Ls = post.path_gaussian(phi)
    zeta = K.standard_from_path(Ld, Ls, mu, path)
    np.testing.assert_allclose(K.path_from_standard(Ld, Ls, mu, zeta), path, rtol=1e-10, atol=1e-12)


def test_initial_path_follows_data(noisy_fhn):
    post, path = noisy_fhn
    X = initial_path(post, to_unconstrained(post.model, post.model.theta))
    assert X.shape == path.shape
    np.testing.assert_allclose(X[:, 0], post.obs.values)


def test_sampler_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(n_iters=10, n_warmup=10)
    with pytest.raises(ValueError):
        SamplerConfig(n_chains=0)


def test_sampler_deterministic_and_adapts_only_in_warmup(noisy_fhn):
    post, _ = noisy_fhn
    cfg = SamplerConfig(n_iters=60, n_warmup=30, n_chains=1, seed=3, path_moves=2)
    a = rwm_sample(post.spec, post.model, post.obs, cfg=cfg)
    b = rwm_sample(post.spec, post.model, post.obs, cfg=cfg)
    np.testing.assert_array_equal(a.draws, b.draws)
    longer = rwm_sample(post.spec, post.model, post.obs,
                        cfg=SamplerConfig(n_iters=90, n_warmup=30, n_chains=1, seed=3, path_moves=2))
    # the kernel is frozen after warmup: same warmup, same final scales, same first draws
    np.testing.assert_array_equal(longer.chains[0].warmup_scales, a.chains[0].warmup_scales)
    np.testing.assert_array_equal(longer.draws[:, :30], a.draws)
    assert "theta_path" in a.diagnostics_dict()["acceptance"][0]


def test_chains_csv_layout(noisy_fhn):
    post, _ = noisy_fhn
    res = rwm_sample(post.spec, post.model, post.obs, cfg=SamplerConfig(n_iters=20, n_warmup=10, seed=1))
    lines = res.chains_csv().splitlines()
    assert lines[0] == "chain,iteration,epsilon,gamma,beta,sigma"
    assert len(lines) == 1 + 2 * 10


def test_ou_posterior_matches_kalman_quadrature():
    """Sampler marginals against a grid posterior built from the Kalman likelihood."""
    ou = OrnsteinUhlenbeck(kappa=1.0, mu=0.3, sigma=0.6)
    obs, _ = simulate_observations(ou, [0.0], 0.2, 60, 40, seed=12, noise_sd=0.1)
    pri = default_priors(ou)
    axes = [np.linspace(-3.5, 2.0, 71), np.linspace(-1.5, 2.0, 61), np.linspace(-1.5, 0.3, 61)]
    A, B, C = np.meshgrid(*axes, indexing="ij")
    ll = rts_smoother(np.exp(A), B, np.exp(C), 0.1, pri.init_mean[0], pri.init_sd[0], obs.values, 0.2)[2]
    logp = ll - 0.5 * (A**2 + B**2 + C**2)
    w = np.exp(logp - logp.max())
    w /= w.sum()
    marg = [w.sum(axis=(1, 2)), w.sum(axis=(0, 2)), w.sum(axis=(0, 1))]
    grid_mean = [np.sum(m * ax) for m, ax in zip(marg, axes)]
    grid_sd = [np.sqrt(np.sum(m * (ax - mu) ** 2)) for m, ax, mu in zip(marg, axes, grid_mean)]
    res = rwm_sample(LINEAR, ou, obs, pri, SamplerConfig(n_iters=3000, n_warmup=1000, seed=2, path_moves=3))
    d = res.draws.reshape(-1, 3)
    u = np.column_stack([np.log(d[:, 0]), d[:, 1], np.log(d[:, 2])])
    for i in range(3):
        ess = res.diagnostics[ou.param_names[i]]["ess_bulk"]
        se = grid_sd[i] / np.sqrt(ess)
        assert abs(u[:, i].mean() - grid_mean[i]) < 4 * se + 0.02 * grid_sd[i]
        assert u[:, i].std() == pytest.approx(grid_sd[i], rel=0.15)
