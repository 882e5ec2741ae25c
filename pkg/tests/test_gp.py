import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gtbo.gp import (
    GpHyperparams,
    GpSurrogate,
    LengthscalePrior,
    fit_map,
    kernel_matrix,
    log_posterior_and_grad,
    matern52,
)

LN01 = LengthscalePrior(0.0, 1.0)


def _hyper(ls, sf=1.0, noise=1e-3, c=0.0):
    return GpHyperparams(np.asarray(ls, dtype=float), sf, noise, c)


def test_matern_at_zero_distance_and_far_away():
    h = _hyper([0.2, 0.5], sf=1.7)
    x = np.array([0.3, 0.4])
    assert matern52(x, x, h) == pytest.approx(1.7)
    assert matern52(x, x + 100, h) < 1e-100


def test_matern_formula():
    h = _hyper([0.5], sf=2.0)
    r = 0.3 / 0.5
    s = math.sqrt(5) * r
    assert matern52([0.1], [0.4], h) == pytest.approx(2.0 * (1 + s + s * s / 3) * math.exp(-s), rel=1e-14)


def test_long_lengthscale_ignores_coordinate():
    h = _hyper([0.3, math.exp(7)])
    x1 = np.array([0.2, 0.5])
    x2 = np.array([0.6, 0.1])
    eps = 1e-4
    fd = (matern52(x1, x2 + [0, eps], h) - matern52(x1, x2 - [0, eps], h)) / (2 * eps)
    assert abs(fd) < 1e-6


def test_kernel_matrix_exactly_symmetric(rng):
    x = rng.random((40, 7))
    k = kernel_matrix(x, x, _hyper(rng.uniform(0.1, 2, 7)))
    assert np.max(np.abs(k - k.T)) == 0.0


def _fd_check(theta, x, y, priors, step=1e-5):
    _, g = log_posterior_and_grad(theta, x, y, priors)
    fd = np.zeros_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = step
        fd[i] = (log_posterior_and_grad(theta + e, x, y, priors)[0]
                 - log_posterior_and_grad(theta - e, x, y, priors)[0]) / (2 * step)
    return np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_finite_differences(seed):
    r = np.random.default_rng(seed)
    x = r.random((10, 5))
    y = np.sin(3 * x[:, 0]) + 0.1 * r.standard_normal(10)
    priors = [LN01, LN01, LengthscalePrior(7, 1), LengthscalePrior(3, 1), LN01]
    for _ in range(10):
        theta = np.concatenate([r.uniform(-2, 2, 5), [r.uniform(-1, 1), r.uniform(-6, -1), r.uniform(-1, 1)]])
        assert _fd_check(theta, x, y, priors) <= 1e-4


def test_prior_at_median():
    theta = np.array([2.0, 0.0, math.log(math.exp(-4.0)), 0.0])
    lp, _ = log_posterior_and_grad(theta, np.zeros((0, 1)), np.zeros(0), [LengthscalePrior(2.0, 1.0)])
    # with no data only priors remain; at value = exp(mu) each log-normal gives -mu - log sqrt(2 pi)
    expected = (-2.0 - 0.5 * math.log(2 * math.pi)) + (0.0 - 0.5 * math.log(2 * math.pi)) + (4.0 - 0.5 * math.log(2 * math.pi))
    assert lp == pytest.approx(expected, rel=1e-12)


def test_log_posterior_permutation_invariant(rng):
    x = rng.random((12, 3))
    y = rng.standard_normal(12)
    theta = np.array([-1.0, 0.0, 1.0, 0.2, -3.0, 0.1])
    perm = rng.permutation(12)
    a, ga = log_posterior_and_grad(theta, x, y, [LN01] * 3)
    b, gb = log_posterior_and_grad(theta, x[perm], y[perm], [LN01] * 3)
    assert a == pytest.approx(b, rel=1e-12)
    np.testing.assert_allclose(ga, gb, rtol=1e-9, atol=1e-9)


def _sample_gp(seed, n=40, ls=(0.3, 0.3)):
    r = np.random.default_rng(seed)
    x = r.random((n, 2))
    k = kernel_matrix(x, x, _hyper(ls, sf=1.0)) + 1e-4 * np.eye(n)
    return x, np.linalg.cholesky(k) @ r.standard_normal(n)


def test_recovers_known_lengthscales():
    errs = []
    tight = LengthscalePrior(math.log(0.3), 0.5)
    for seed in range(10):
        x, y = _sample_gp(seed)
        model = fit_map(x, y, [tight, tight], restarts=2, rng=np.random.default_rng(seed))
        errs.append(np.abs(model.hyper.lengthscales / 0.3 - 1))
    assert np.all(np.median(errs, axis=0) <= 0.5)


def test_restart_at_optimum_is_fixed_point():
    x, y = _sample_gp(3, n=25)
    model = fit_map(x, y, [LN01, LN01], restarts=1, gtol=1e-9, max_iter=500)
    theta = model.hyper.to_vector()
    _, g = log_posterior_and_grad(theta, x, model.train_targets, [LN01, LN01])
    assert np.linalg.norm(g) < 1e-3
    again = fit_map(x, y, [LN01, LN01], restarts=1, warm_start=model.hyper, gtol=1e-9)
    np.testing.assert_allclose(again.hyper.to_vector(), theta, atol=1e-4)


def test_strong_prior_switches_off_irrelevant_dim():
    r = np.random.default_rng(0)
    x = r.random((30, 2))
    y = np.sin(6 * x[:, 0]) + 0.01 * r.standard_normal(30)
    model = fit_map(x, y, [LN01, LengthscalePrior(7, 1)], restarts=3, rng=r)
    assert model.hyper.lengthscales[1] > math.exp(3)


def test_prediction_interpolates_and_reverts():
    x = np.array([[0.1], [0.5], [0.9]])
    y = np.array([1.0, -0.5, 2.0])
    s = GpSurrogate(x, y, _hyper([0.2], sf=1.3, noise=1e-10, c=0.4), [LN01])
    mean, var = s.predict_standardized(x)
    np.testing.assert_allclose(mean, y, atol=1e-6)
    mean, var = s.predict_standardized(np.array([[50.0]]))
    assert mean[0] == pytest.approx(0.4, abs=1e-12)
    assert var[0] == pytest.approx(1.3, abs=1e-12)


def test_prediction_matches_dense_solve():
    x = np.array([[0.1], [0.45], [0.8]])
    y = np.array([0.3, -1.2, 0.7])
    h = _hyper([0.3], sf=0.9, noise=0.05, c=0.1)
    s = GpSurrogate(x, y, h, [LN01])
    xt = np.array([[0.2], [0.6], [0.95]])

    def k(a, b):
        r = np.abs(a[:, None, 0] - b[None, :, 0]) / 0.3
        t = math.sqrt(5) * r
        return 0.9 * (1 + t + t * t / 3) * np.exp(-t)

    kxx = k(x, x) + (0.05 + s.jitter * 0.9) * np.eye(3)
    mean = 0.1 + k(xt, x) @ np.linalg.solve(kxx, y - 0.1)
    var = 0.9 - np.einsum("ij,ji->i", k(xt, x), np.linalg.solve(kxx, k(x, xt)))
    m, v = s.predict_standardized(xt)
    np.testing.assert_allclose(m, mean, atol=1e-8)
    np.testing.assert_allclose(v, var, atol=1e-8)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_predictive_variance_bounded(seed):
    r = np.random.default_rng(seed)
    x = r.random((8, 3))
    h = _hyper(r.uniform(0.05, 2, 3), sf=float(r.uniform(0.1, 3)), noise=float(r.uniform(1e-6, 0.1)))
    s = GpSurrogate(x, r.standard_normal(8), h, [LN01] * 3)
    _, var = s.predict_standardized(r.random((50, 3)))
    assert np.all(var >= 0)
    assert np.all(var <= h.signal_var + h.noise_var + 1e-9)


def test_predict_original_scale():
    x = np.array([[0.2], [0.7], [0.4]])
    model = fit_map(x, np.array([10.0, 14.0, 12.0]), [LN01], restarts=1)
    mean, var = model.predict(x)
    ms, vs = model.predict_standardized(x)
    np.testing.assert_allclose(mean, ms * model.y_std + model.y_mean)
    np.testing.assert_allclose(var, vs * model.y_std**2)


def test_fit_needs_two_points():
    with pytest.raises(ValueError):
        fit_map(np.zeros((1, 2)), [1.0], [LN01, LN01])
