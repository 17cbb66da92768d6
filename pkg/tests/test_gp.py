import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import multivariate_normal

from stip import _accel
from stip.errors import DataError, SingularKernelError
from stip.gp import GaussianProcess, HyperBounds, Hyperparams, cholesky_jitter, kernel, kernel_matrix


def dense_oracle(x, y, xs, h):
    """Textbook posterior with an explicit inverse."""
    k = np.array([[kernel(a, b, h) for b in x] for a in x]) + h.noise_var * np.eye(len(x))
    ks = np.array([[kernel(a, b, h) for b in xs] for a in x])
    kss = np.array([[kernel(a, b, h) for b in xs] for a in xs])
    kinv = np.linalg.inv(k)
    mean = ks.T @ kinv @ y
    cov = kss - ks.T @ kinv @ ks
    lml = -0.5 * y @ kinv @ y - 0.5 * np.linalg.slogdet(k)[1] - 0.5 * len(x) * math.log(2 * math.pi)
    return mean, cov, lml


def random_problem(rng, n=None):
    n = int(rng.integers(1, 21)) if n is None else n
    h = Hyperparams(float(rng.uniform(0.3, 3.0)), float(rng.uniform(1.0, 6.0)), float(rng.uniform(0.01, 0.5)))
    x = rng.uniform(0, 10, (n, 2))
    y = rng.normal(size=n)
    xs = rng.uniform(0, 10, (7, 2))
    return x, y, xs, h


@pytest.mark.parametrize("seed", range(20))
def test_matches_dense_oracle(seed):
    x, y, xs, h = random_problem(np.random.default_rng(seed))
    gp = GaussianProcess(h, standardize="none").add_data(x, y)
    post = gp.predict(xs)
    mean, cov, lml = dense_oracle(x, y, xs, h)
    assert np.allclose(post.mean, mean, atol=1e-8)
    assert np.allclose(post.cov, cov, atol=1e-8)
    assert gp.log_marginal_likelihood() == pytest.approx(lml, abs=1e-8)
    assert np.allclose(gp.predict(xs, full_cov=False).cov, np.diag(cov), atol=1e-8)
    assert np.allclose(gp.predict_mean(xs), mean, atol=1e-8)


def test_lml_matches_scipy_logpdf():
    x, y, _, h = random_problem(np.random.default_rng(3), n=12)
    gp = GaussianProcess(h, standardize="none").add_data(x, y)
    k = kernel_matrix(x, x, h) + h.noise_var * np.eye(12)
    assert gp.log_marginal_likelihood() == pytest.approx(multivariate_normal(np.zeros(12), k).logpdf(y), rel=1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_lml_gradient_finite_difference(seed):
    x, y, _, h = random_problem(np.random.default_rng(seed), n=15)
    gp = GaussianProcess(h).add_data(x, y)
    theta = h.to_log()
    eps = 1e-5
    fd = []
    for i in range(3):
        e = eps * np.eye(3)[i]
        up = gp.log_marginal_likelihood(Hyperparams.from_log(theta + e))
        dn = gp.log_marginal_likelihood(Hyperparams.from_log(theta - e))
        fd.append((up - dn) / (2 * eps))
    assert np.allclose(gp.lml_gradient(), fd, rtol=1e-4, atol=1e-6)


@pytest.mark.parametrize("mode", ["scale", "center"])
def test_standardization_is_an_affine_wrapper(mode):
    x, y, xs, h = random_problem(np.random.default_rng(8), n=10)
    y = 3e-3 * y + 1e-3
    gp = GaussianProcess(h, standardize=mode).add_data(x, y)
    off, scale = gp.target_transform()
    if mode == "scale":
        assert off == 0.0 and scale == pytest.approx(np.sqrt(np.mean(y * y)))
    mean, cov, _ = dense_oracle(x, (y - off) / scale, xs, h)
    post = gp.predict(xs)
    assert np.allclose(post.mean, off + scale * mean, rtol=1e-9, atol=1e-15)
    assert np.allclose(post.cov, scale**2 * cov, rtol=1e-9, atol=1e-18)


def test_single_point_reduction_algebra():
    h = Hyperparams(2.0, 3.0, 0.5)
    gp = GaussianProcess(h)
    red = gp.variance_reduction(np.array([[1.0, 1.0]]))
    assert red == pytest.approx(h.signal_var**2 / (h.signal_var + h.noise_var), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_variance_properties(seed):
    rng = np.random.default_rng(seed)
    x, y, xs, h = random_problem(rng, n=int(rng.integers(2, 15)))
    gp = GaussianProcess(h, standardize="none")
    prev = gp.predict(xs, full_cov=False).cov
    assert np.all(prev <= h.signal_var + 1e-10)
    for i in range(len(x)):
        gp.add_data(x[i : i + 1], y[i : i + 1])
        var = gp.predict(xs, full_cov=False).cov
        assert np.all(var <= prev + 1e-10)
        prev = var


def test_noiseless_interpolation():
    rng = np.random.default_rng(1)
    x = rng.uniform(0, 10, (8, 2))
    y = np.sin(x[:, 0]) + x[:, 1] / 10
    gp = GaussianProcess(Hyperparams(1.0, 2.0, 0.0), standardize="none").add_data(x, y)
    assert np.allclose(gp.predict(x).mean, y, atol=1e-6)


def test_large_noise_shrinks_toward_prior_mean():
    rng = np.random.default_rng(2)
    x = rng.uniform(0, 10, (6, 2))
    y = rng.normal(2.0, 0.1, 6)
    norms = []
    for sn2 in (0.01, 0.1, 1.0, 10.0, 100.0, 1e4):
        m = GaussianProcess(Hyperparams(1.0, 3.0, sn2), standardize="none").add_data(x, y).predict_mean(x)
        norms.append(np.linalg.norm(m))
    assert np.all(np.diff(norms) < 0)
    assert norms[-1] < 1e-2 * norms[0]


def test_duplicate_points_use_jitter():
    x = np.array([[1.0, 1.0]] * 4 + [[2.0, 1.0]])
    gp = GaussianProcess(Hyperparams(1.0, 2.0, 0.0), standardize="none").add_data(x, [1, 1, 1, 1, 0.5])
    assert np.all(np.isfinite(gp.predict([[1.5, 1.0]]).mean))
    chol, jitter = cholesky_jitter(kernel_matrix(x, x, gp.hyper), 1.0)
    assert 0 < jitter <= 1e-6
    with pytest.raises(SingularKernelError):
        cholesky_jitter(-np.eye(3), 1.0)


def test_data_validation_and_reset():
    gp = GaussianProcess()
    with pytest.raises(DataError):
        gp.add_data([[0, 0], [1, 1]], [1.0])
    with pytest.raises(DataError):
        gp.add_data([[0, 0]], [math.nan])
    with pytest.raises(DataError):
        gp.log_marginal_likelihood()
    gp.add_data([[0, 0], [1, 1]], [1.0, 2.0])
    gp.set_hyper(Hyperparams(2.0, 5.0, 0.1))
    gp.reset()
    assert gp.n == 0 and gp.hyper == Hyperparams(2.0, 5.0, 0.1)
    assert np.array_equal(gp.predict_mean([[3.0, 3.0]]), [0.0])
    with pytest.raises(ValueError):
        GaussianProcess(standardize="whiten")


def sample_gp(seed, h, n=20):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 20, (n, 2))
    k = kernel_matrix(x, x, h) + h.noise_var * np.eye(n)
    y = np.linalg.cholesky(k) @ rng.normal(size=n)
    return x, y


def test_length_scale_recovery():
    truth = Hyperparams(1.0, 4.0, 0.01)
    hits = 0
    for seed in range(10):
        x, y = sample_gp(seed, truth)
        gp = GaussianProcess(Hyperparams(1.0, 10.0, 0.1)).add_data(x, y)
        fit = gp.optimize_hyperparams()
        hits += 0.5 * truth.length_scale <= fit.length_scale <= 2.0 * truth.length_scale
    assert hits >= 8


def test_optimizer_never_worse_than_starts_and_idempotent():
    x, y = sample_gp(11, Hyperparams(1.0, 3.0, 0.05))
    gp = GaussianProcess(Hyperparams(0.5, 8.0, 0.2)).add_data(x, y)
    starts = gp.start_points()
    fit = gp.optimize_hyperparams()
    best = gp.log_marginal_likelihood()
    for s in starts:
        assert best >= gp.log_marginal_likelihood(s) - 1e-12
    gp.optimize_hyperparams()
    assert abs(gp.log_marginal_likelihood() - best) < 1e-9
    lo, hi = HyperBounds().length_scale
    assert lo <= fit.length_scale <= hi
    with pytest.raises(DataError):
        GaussianProcess().add_data([[0, 0]], [1.0]).optimize_hyperparams()


def test_optimizer_keeps_previous_values_when_every_start_fails(monkeypatch, caplog):
    gp = GaussianProcess(Hyperparams(1.0, 2.0, 0.1)).add_data([[0, 0], [1, 0]], [1.0, 2.0])
    monkeypatch.setattr(_accel, "lml", lambda *a: math.nan)
    before = gp.hyper
    assert gp.optimize_hyperparams() == before
    assert gp.last_status == "failed"
    assert "failed" in caplog.text


def test_copy_is_independent():
    gp = GaussianProcess().add_data([[0, 0]], [1.0])
    other = gp.copy().add_data([[1, 1]], [2.0])
    assert gp.n == 1 and other.n == 2
