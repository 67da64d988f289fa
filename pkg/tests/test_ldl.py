import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from scipy import integrate, stats

from cfexpansion.ldl import (
    DegenerateMomentsError,
    factorize,
    gaussian_logpdf,
    gaussian_sample,
    ldl_moments,
    linear_gaussian_moments,
    mat_exp,
)
from cfexpansion.models import FitzHughNagumo, OrnsteinUhlenbeck, UnderdampedLangevin

square = hnp.arrays(np.float64, (3, 3), elements=st.floats(-4.0, 4.0))


@given(square, st.sampled_from([1e-4, 0.01, 0.3, 1.0, 5.0]))
def test_mat_exp_matches_scipy(A, scale):
    # scale sweeps every Pade degree branch
    B = A * scale
    expected = scipy.linalg.expm(B)
    np.testing.assert_allclose(mat_exp(B), expected, rtol=1e-11, atol=1e-12 * np.abs(expected).max())


def test_mat_exp_large_norm():
    A = np.array([[-30.0, 50.0], [-40.0, -2.0]])
    ref = scipy.linalg.expm(A)
    np.testing.assert_allclose(mat_exp(A), ref, rtol=1e-9, atol=1e-12)


def test_mat_exp_stack_and_errors():
    A = np.random.default_rng(0).normal(size=(4, 2, 2))
    out = mat_exp(A)
    for k in range(4):
        np.testing.assert_allclose(out[k], scipy.linalg.expm(A[k]), rtol=1e-12)
    with pytest.raises(ValueError):
        mat_exp(np.ones((2, 3)))
    with pytest.raises(ValueError):
        mat_exp(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def _quad_moments(A, a, b, x, dt):
    """Direct quadrature of the mean and covariance integrals."""
    E = lambda s: scipy.linalg.expm(s * A)  # noqa: E731
    cov = integrate.quad_vec(lambda s: E(dt - s) @ a @ E(dt - s).T, 0.0, dt, epsabs=1e-14)[0]
    drift = integrate.quad_vec(lambda s: E(dt - s) @ b, 0.0, dt, epsabs=1e-14)[0]
    return E(dt) @ x + drift, cov


@pytest.mark.parametrize("dt", [0.01, 0.1, 0.7])
def test_van_loan_matches_quadrature(dt):
    A = np.array([[0.4, -1.3], [2.0, -0.8]])
    sig = np.array([[0.0], [0.9]])
    b = np.array([0.3, -0.2])
    x = np.array([0.5, -1.0])
    mean, cov, M = linear_gaussian_moments(A, sig @ sig.T, b, x, dt)
    qm, qc = _quad_moments(A, sig @ sig.T, b, x, dt)
    np.testing.assert_allclose(mean, qm, rtol=1e-10, atol=1e-13)
    np.testing.assert_allclose(cov, qc, rtol=1e-8, atol=1e-15)
    np.testing.assert_allclose(M, scipy.linalg.expm(dt * A), rtol=1e-12)


def test_ou_moments_closed_form():
    m = OrnsteinUhlenbeck(kappa=2.0, mu=0.5, sigma=0.7)
    dt, x = 0.3, np.array([1.5])
    mom = ldl_moments(m, x, dt)
    e = np.exp(-2.0 * dt)
    assert mom.mean[0] == pytest.approx(0.5 + (1.5 - 0.5) * e, rel=1e-13)
    assert mom.cov[0, 0] == pytest.approx(0.49 * (1 - e**2) / 4.0, rel=1e-12)


def test_langevin_small_dt_scaling():
    # hypo-elliptic covariance: Var(q) ~ sigma^2 dt^3 / 3, Cov ~ sigma^2 dt^2 / 2
    m = UnderdampedLangevin(alpha=0.5, sigma=1.3)
    dt = 1e-3
    c = ldl_moments(m, [0.2, 0.1], dt).cov
    assert c[0, 0] == pytest.approx(1.69 * dt**3 / 3, rel=1e-2)
    assert c[0, 1] == pytest.approx(1.69 * dt**2 / 2, rel=1e-2)
    assert c[1, 1] == pytest.approx(1.69 * dt, rel=1e-2)


@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.sampled_from([0.01, 0.05, 0.1]), st.booleans())
def test_fhn_covariance_symmetric_positive(v, u, dt, partial):
    mom = ldl_moments(FitzHughNagumo(partial=partial), [v, u], dt)
    np.testing.assert_array_equal(mom.cov, mom.cov.T)
    assert np.all(np.linalg.eigvalsh(mom.cov) > 0)
    np.testing.assert_allclose(mom.chol @ mom.chol.T, mom.cov, rtol=1e-12, atol=1e-18)


def test_batched_moments_match_single():
    m = FitzHughNagumo()
    X = np.random.default_rng(1).uniform(-1, 1, size=(5, 2))
    batch = ldl_moments(m, X, 0.05)
    for k in range(5):
        single = ldl_moments(m, X[k], 0.05)
        np.testing.assert_allclose(batch.mean[k], single.mean, rtol=1e-14)
        np.testing.assert_allclose(batch.cov[k], single.cov, rtol=1e-14)


def test_degenerate_without_noise():
    with pytest.raises(DegenerateMomentsError):
        ldl_moments(FitzHughNagumo(sigma=0.0), [0.1, 0.2], 0.1)


def test_factorize_jitters_semidefinite_once():
    cov, chol = factorize(np.array([[1.0, 1.0], [1.0, 1.0]]))
    np.testing.assert_allclose(chol @ chol.T, cov)
    with pytest.raises(DegenerateMomentsError) as info:
        factorize(np.array([[1.0, 0.0], [0.0, -1.0]]))
    assert info.value.smallest_eigenvalue == pytest.approx(-1.0)


def test_gaussian_logpdf_matches_scipy():
    mom = ldl_moments(FitzHughNagumo(), [-0.1, 0.2], 0.1)
    y = np.array([[-0.2, 0.1], [0.0, 0.5]])
    ref = stats.multivariate_normal(mom.mean, mom.cov).logpdf(y)
    np.testing.assert_allclose(gaussian_logpdf(mom, y), ref, rtol=1e-12)


def test_gaussian_sample_moments():
    mom = ldl_moments(FitzHughNagumo(), [-0.1, 0.2], 0.1)
    draws = gaussian_sample(mom, np.random.default_rng(3), size=200_000)
    se = np.sqrt(np.diag(mom.cov) / len(draws))
    assert np.all(np.abs(draws.mean(axis=0) - mom.mean) < 4 * se)
    np.testing.assert_allclose(np.cov(draws.T), mom.cov, rtol=0.02)


def test_nonpositive_dt_rejected():
    with pytest.raises(ValueError):
        ldl_moments(FitzHughNagumo(), [0.0, 0.0], 0.0)
