import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from fmmsl.msl import (EPS_D, MslParams, NotPositiveDefiniteError, msl_cf, msl_logpdf, msl_moments,
                       msl_sample, v_conditional_moments)

# mpmath evaluation (30 digits) of the closed form at p=2, mu=(2,2), Sigma=1.5 I, gamma=(1,1), y=(5,5)
DESK_P2 = -3.95849372684029285339695784881


def random_params(rng, p, gamma_scale=1.0):
    a = rng.normal(size=(p, p))
    sigma = a @ a.T / p + 0.5 * np.eye(p)
    return MslParams(rng.normal(size=p), sigma, gamma_scale * rng.uniform(-1, 1, size=p))


def symmetric_laplace_logpdf(y, mu, sigma):
    """Symmetric multivariate Laplace, coded with explicit inverse and scalar loops."""
    p = len(mu)
    inv = np.linalg.inv(sigma)
    d = sum((y[i] - mu[i]) * inv[i, j] * (y[j] - mu[j]) for i in range(p) for j in range(p))
    return (-0.5 * math.log(np.linalg.det(sigma)) - p * math.log(2) - 0.5 * (p - 1) * math.log(math.pi)
            - math.lgamma((p + 1) / 2) - math.sqrt(d))


def mixture_integral_pdf(y, params):
    """Density as the normal variance-mean mixture over W ~ chi2(p+1)."""
    p = params.p
    def f(w):
        return (stats.multivariate_normal.pdf(y, params.mu + w * params.gamma, w * params.sigma)
                * stats.chi2.pdf(w, p + 1))
    val, _ = integrate.quad(f, 0, np.inf, epsabs=0, epsrel=1e-11, limit=500)
    return val


def test_logpdf_standard_laplace_at_center():
    assert msl_logpdf([0.0], MslParams([0.0], [[1.0]], [0.0])) == pytest.approx(math.log(0.5), abs=1e-15)


def test_logpdf_desk_value_p2():
    params = MslParams([2, 2], 1.5 * np.eye(2), [1, 1])
    assert msl_logpdf(np.array([5.0, 5.0]), params) == pytest.approx(DESK_P2, rel=1e-14)


def test_symmetric_case_matches_independent_laplace():
    rng = np.random.default_rng(11)
    for p in (1, 2, 3):
        base = random_params(rng, p)
        params = MslParams(base.mu, base.sigma, np.zeros(p))
        for y in rng.normal(scale=2, size=(10, p)):
            expected = symmetric_laplace_logpdf(y, params.mu, params.sigma)
            assert msl_logpdf(y, params) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_skew_density_matches_mixture_integral():
    rng = np.random.default_rng(5)
    for p in (1, 2):
        params = random_params(rng, p)
        for y in rng.normal(size=(4, p)) + params.mu:
            assert math.exp(msl_logpdf(y, params)) == pytest.approx(mixture_integral_pdf(y, params), rel=1e-8)


def test_vectorized_rows_match_single_calls():
    rng = np.random.default_rng(2)
    params = random_params(rng, 3)
    ys = rng.normal(size=(7, 3))
    batch = msl_logpdf(ys, params)
    assert batch.shape == (7,)
    np.testing.assert_allclose(batch, [msl_logpdf(y, params) for y in ys], rtol=0, atol=1e-13)


@pytest.mark.parametrize("draw", range(5))
def test_normalizes_p1(draw):
    params = random_params(np.random.default_rng(100 + draw), 1)
    m = float(params.mu[0])
    def f(x):
        return math.exp(msl_logpdf(np.array([x]), params))
    left, _ = integrate.quad(f, -np.inf, m, epsabs=1e-13, epsrel=1e-12, limit=400)
    right, _ = integrate.quad(f, m, np.inf, epsabs=1e-13, epsrel=1e-12, limit=400)
    assert left + right == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("draw", range(5))
def test_normalizes_p2_grid(draw):
    params = random_params(np.random.default_rng(200 + draw), 2)
    # integrate in whitened coordinates y = mu + L z so one grid fits every draw
    h = 0.05
    axis = np.arange(-70, 70 + h / 2, h)
    zx, zy = np.meshgrid(axis, axis, indexing="ij")
    z = np.column_stack([zx.ravel(), zy.ravel()])
    y = params.mu + z @ params.chol.T
    jac = float(np.prod(np.diag(params.chol)))
    total = np.exp(msl_logpdf(y, params)).sum() * h * h * jac
    assert total == pytest.approx(1.0, abs=1e-3)


def test_moment_examples():
    mean, cov = msl_moments(MslParams([2, 2], np.eye(2), [1, 1]))
    np.testing.assert_allclose(mean, [5, 5])
    mean, cov = msl_moments(MslParams([0.0], [[1.0]], [1.0]))
    assert mean[0] == 2 and cov[0, 0] == 6
    sigma = np.array([[2.0, 0.3], [0.3, 1.0]])
    mean, cov = msl_moments(MslParams([1, -1], sigma, [0, 0]))
    np.testing.assert_allclose(mean, [1, -1])
    np.testing.assert_allclose(cov, 3 * sigma)


def test_cf_trivial_cases():
    rng = np.random.default_rng(3)
    params = random_params(rng, 2)
    assert msl_cf(np.zeros(2), params) == pytest.approx(1 + 0j)
    sym = MslParams(np.zeros(2), params.sigma, np.zeros(2))
    for t in rng.normal(size=(10, 2)):
        assert msl_cf(t, sym).imag == 0.0


def test_cf_matches_empirical_cf():
    params = MslParams([2, 2], [[1, 0.5], [0.5, 1]], [1, 1])
    y = msl_sample(params, 10**6, seed=17)
    rng = np.random.default_rng(18)
    for t in rng.normal(scale=0.4, size=(20, 2)):
        phase = y @ t
        c, s = np.cos(phase), np.sin(phase)
        n = len(phase)
        target = msl_cf(t, params)
        assert abs(c.mean() - target.real) < 3 * c.std() / math.sqrt(n)
        assert abs(s.mean() - target.imag) < 3 * s.std() / math.sqrt(n)


def gig_posterior_moments(y, params):
    """E(V|y) and E(1/V|y) by quadrature over the unnormalized conditional density of V."""
    p = params.p
    inv = np.linalg.inv(params.sigma)
    r = y - params.mu

    def log_kernel(v):
        dev = r - params.gamma / v
        return 0.5 * p * math.log(v) - 0.5 * v * dev @ inv @ dev - 0.5 * (p + 3) * math.log(v) - 0.5 / v

    # rescale by the mode of the kernel to keep the integrands in range
    grid = np.geomspace(1e-4, 1e4, 4001)
    shift = max(log_kernel(v) for v in grid)
    vmode = grid[np.argmax([log_kernel(v) for v in grid])]

    def moment(k):
        f = lambda v: v ** k * math.exp(log_kernel(v) - shift)
        a, _ = integrate.quad(f, 0, vmode, epsabs=0, epsrel=1e-12, limit=500)
        b, _ = integrate.quad(f, vmode, np.inf, epsabs=0, epsrel=1e-12, limit=500)
        return a + b

    z = moment(0)
    return moment(1) / z, moment(-1) / z


def test_conditional_moments_match_quadrature():
    rng = np.random.default_rng(23)
    for p in (1, 2, 3):
        for _ in range(4):
            params = random_params(rng, p)
            y = params.mu + rng.normal(size=p)
            got = v_conditional_moments(y, params)
            e_v, e_vinv = gig_posterior_moments(y, params)
            assert float(got.e_v) == pytest.approx(e_v, rel=1e-6)
            assert float(got.e_vinv) == pytest.approx(e_vinv, rel=1e-6)


def test_conditional_moments_trivial_and_clamped():
    params = MslParams(np.zeros(2), np.eye(2), np.zeros(2))
    m = v_conditional_moments(np.array([2.0, 0.0]), params)
    assert float(m.e_v) == pytest.approx(0.5) and float(m.e_vinv) == pytest.approx(3.0)
    skew = MslParams(np.ones(2), np.eye(2), np.array([0.5, -1.0]))
    alpha = skew.alpha
    m = v_conditional_moments(np.ones(2), skew)
    assert float(m.e_v) == pytest.approx(alpha / math.sqrt(EPS_D))
    assert float(m.e_vinv) == pytest.approx(1 / alpha**2 + math.sqrt(EPS_D) / alpha)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), p=st.integers(1, 4), scale=st.floats(0.01, 20))
def test_conditional_moment_product_identity(seed, p, scale):
    rng = np.random.default_rng(seed)
    params = random_params(rng, p)
    y = params.mu + scale * rng.normal(size=p)
    m = v_conditional_moments(y, params)
    w = np.ravel(params.whiten(y))
    d = float(w @ w)
    expected = 1 + 1 / (params.alpha * math.sqrt(max(d, EPS_D)))
    assert float(m.e_v * m.e_vinv) == pytest.approx(expected, rel=1e-12)


def test_sampler_moments_within_four_standard_errors():
    params = MslParams([2, 2], [[1, 0.5], [0.5, 1]], [1, 1])
    n = 10**6
    y = msl_sample(params, n, seed=99)
    mean, cov = msl_moments(params)
    se_mean = y.std(axis=0) / math.sqrt(n)
    assert np.all(np.abs(y.mean(axis=0) - mean) < 4 * se_mean)
    dev = y - y.mean(axis=0)
    for i in range(2):
        for j in range(2):
            prod = dev[:, i] * dev[:, j]
            assert abs(prod.mean() - cov[i, j]) < 4 * prod.std() / math.sqrt(n)


def test_symmetric_sampler_has_no_skewness():
    y = msl_sample(MslParams([0, 0], [[1, 0.2], [0.2, 2]], [0, 0]), 10**6, seed=4)
    skew = stats.skew(y, axis=0)
    # skewness standard error from the sampling variance of the third standardized moment
    z = (y - y.mean(axis=0)) / y.std(axis=0)
    se = (z**3).std(axis=0) / math.sqrt(len(y))
    assert np.all(np.abs(skew) < 4 * se)


def test_sampler_is_deterministic():
    params = MslParams([0, 1], np.eye(2), [0.3, -0.2])
    assert np.array_equal(msl_sample(params, 50, 8), msl_sample(params, 50, 8))
    assert not np.array_equal(msl_sample(params, 50, 8), msl_sample(params, 50, 9))


def test_invalid_parameters_rejected():
    with pytest.raises(NotPositiveDefiniteError):
        MslParams([0, 0], [[1, 2], [2, 1]], [0, 0])
    with pytest.raises(ValueError):
        MslParams([0, 0], np.eye(3), [0, 0])
    with pytest.raises(ValueError):
        MslParams([0, 0], [[1, 0.1], [0.2, 1]], [0, 0])
    with pytest.raises(ValueError):
        msl_logpdf([0, 0, 0], MslParams([0, 0], np.eye(2), [0, 0]))
