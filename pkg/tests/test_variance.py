import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gtbo.variance import (
    estimate_default,
    estimate_variances,
    n_bins,
    null_bias,
    order_and_floor,
    split_variances,
)


class Counting:
    def __init__(self, fn, noise=0.0, seed=0):
        self.fn, self.noise, self.calls = fn, noise, 0
        self.rng = np.random.default_rng(seed)

    def __call__(self, x):
        self.calls += 1
        return self.fn(x) + self.noise * self.rng.standard_normal()


def test_default_estimate_noiseless():
    f = Counting(lambda x: 3.25)
    assert estimate_default(f, np.zeros(4), 5) == 3.25
    assert f.calls == 5


def test_default_estimate_standard_error():
    hits = 0
    for seed in range(200):
        est = estimate_default(Counting(lambda x: 2.0, noise=1.0, seed=seed), np.zeros(4), 5)
        hits += abs(est - 2.0) <= 2 / math.sqrt(5)
    # two standard errors cover about 95%
    assert hits >= 180


def test_default_estimate_large_n():
    est = estimate_default(Counting(lambda x: -1.0, noise=1.0, seed=3), np.zeros(4), 20000)
    assert abs(est + 1.0) < 3 / math.sqrt(20000)


def test_default_needs_two_samples():
    with pytest.raises(ValueError):
        estimate_default(lambda x: 0.0, np.zeros(4), 1)


@pytest.mark.parametrize("dim", [4, 10, 50, 100, 300])
def test_evaluation_count_and_bins(dim):
    f = Counting(lambda x: 0.0, noise=1.0)
    res = estimate_variances(f, np.full(dim, 0.5), dim, np.random.default_rng(0), n_def=5)
    assert f.calls == res.n_evaluations == 5 + 3 * math.isqrt(dim)
    assert len(res.bins) == n_bins(dim)
    merged = np.sort(np.concatenate(res.bins))
    np.testing.assert_array_equal(merged, np.arange(dim))
    assert res.signal_var >= res.noise_var > 0


def test_hundred_dims_split_sizes():
    assert n_bins(100) == 30
    d = np.arange(1, 31, dtype=float)
    lo, hi = split_variances(d, 100, calibrate=False)
    assert lo == pytest.approx(np.var(d[:20], ddof=1))
    assert hi == pytest.approx(np.var(d[20:], ddof=1))


def test_literal_sort_breaks_ties_by_bin():
    d = np.array([1.0, -1.0, 1.0, 2.0, -2.0, 5.0])  # D = 4: r = 2, six bins
    lo, hi = split_variances(d, 4, calibrate=False)
    assert lo == pytest.approx(np.var([1.0, -1.0, 1.0, 2.0], ddof=1))
    assert hi == pytest.approx(np.var([-2.0, 5.0], ddof=1))


def test_constant_function_estimates_near_noise():
    ok = 0
    for seed in range(20):
        f = Counting(lambda x: 7.0, noise=1.0, seed=seed)
        res = estimate_variances(f, np.full(100, 0.5), 100, np.random.default_rng(seed))
        ok += 0.5 <= res.noise_var <= 2.0 and 0.5 <= res.signal_var <= 2.0
    assert ok >= 16


def test_calibrated_split_unbiased_on_pure_noise():
    r = np.random.default_rng(0)
    est = np.array([split_variances(r.standard_normal(30), 100) for _ in range(2000)])
    se = est.std(axis=0, ddof=1) / math.sqrt(len(est))
    assert np.all(np.abs(est.mean(axis=0) - 1.0) < 4 * se)


def test_null_bias_is_cached_and_sane():
    a = null_bias(30, 20)
    assert null_bias(30, 20) is a
    assert a[0] < 1.0 < a[1]


def test_one_huge_dimension_dominates():
    f = Counting(lambda x: 1e3 * (x[17] - 0.5), noise=1e-6)
    res = estimate_variances(f, np.full(64, 0.5), 64, np.random.default_rng(2))
    assert res.signal_var > 1e4 * res.noise_var


@settings(max_examples=60, deadline=None)
@given(a=st.floats(-1e3, 1e3), b=st.floats(-1e3, 1e3))
def test_order_and_floor(a, b):
    lo, hi = order_and_floor(a, b)
    assert 0 < lo <= hi
    assert lo >= 1e-6 * hi


def test_small_dimension_rejected():
    with pytest.raises(ValueError):
        estimate_variances(lambda x: 0.0, np.full(3, 0.5), 3, np.random.default_rng(0))
