import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gtbo.model import (
    ActivityEnsemble,
    GtObservation,
    NoiseModel,
    exact_posterior,
    history_arrays,
    init_ensemble,
    make_perturbed_point,
)
from gtbo.smc import (
    SmcConfig,
    effective_sample_size,
    gibbs_kernel,
    gibbs_move,
    maybe_resample_move,
    recompute_counts,
    systematic_resample,
)

NM = NoiseModel(0.1, 2.0)


def _ens(weights, dim=3):
    n = len(weights)
    parts = (np.arange(n)[:, None] >> np.arange(dim)) & 1
    with np.errstate(divide="ignore"):
        return ActivityEnsemble(parts.astype(bool), np.log(weights), 0.1)


def _history(dim, n_tests, truth, seed, nm=NM):
    r = np.random.default_rng(seed)
    out = []
    for _ in range(n_tests):
        g = r.random(dim) < 0.35
        if not g.any():
            g[r.integers(dim)] = True
        var = nm.signal_var if (g & truth).any() else nm.noise_var
        out.append(GtObservation(g, float(np.sqrt(var) * r.standard_normal()), np.zeros(dim)))
    return out


def test_ess_examples():
    assert effective_sample_size(_ens(np.full(8, 1 / 8))) == pytest.approx(8)
    assert effective_sample_size(_ens([1, 0, 0, 0])) == pytest.approx(1)
    assert effective_sample_size(_ens([0.5, 0.5, 0, 0])) == pytest.approx(2)


def test_resample_all_weight_on_one():
    ens = _ens([0, 0, 1, 0])
    out = systematic_resample(ens, np.random.default_rng(0))
    assert (out.particles == ens.particles[2]).all()
    np.testing.assert_allclose(out.weights, 0.25)


def test_resample_three_to_one():
    ens = _ens([0.75, 0.25, 0.0, 0.0])
    for seed in range(200):
        out = systematic_resample(ens, np.random.default_rng(seed))
        rows = [tuple(p) for p in out.particles]
        assert rows.count(tuple(ens.particles[0])) == 3
        assert rows.count(tuple(ens.particles[1])) == 1


def test_resample_uniform_keeps_each_particle_once():
    ens = _ens(np.full(8, 1 / 8))
    out = systematic_resample(ens, np.random.default_rng(3))
    # with equal weights each stratum holds exactly one particle
    assert sorted(map(tuple, out.particles)) == sorted(map(tuple, ens.particles))


def test_resample_preserves_expected_marginals():
    r = np.random.default_rng(0)
    parts = r.random((40, 5)) < 0.4
    ens = ActivityEnsemble(parts, r.normal(size=40) * 2, 0.1)
    target = ens.marginals()
    draws = np.array([systematic_resample(ens, np.random.default_rng(s)).marginals() for s in range(400)])
    se = draws.std(axis=0, ddof=1) / np.sqrt(len(draws))
    assert np.all(np.abs(draws.mean(axis=0) - target) <= 3 * se + 1e-12)


def test_gibbs_empty_history_targets_prior():
    ens = init_ensemble(6, 20000, np.array([0.05, 0.2, 0.5, 0.7, 0.9, 0.3]), np.random.default_rng(0))
    ens = ens.with_particles(np.ones((20000, 6), bool))
    out = gibbs_move(ens, [], NM, SmcConfig(gibbs_sweeps=2), np.random.default_rng(1))
    se = np.sqrt(ens.prior_q * (1 - ens.prior_q) / 20000)
    assert np.all(np.abs(out.marginals() - ens.prior_q) < 4 * se)


def test_gibbs_untested_dim_follows_prior():
    hist = _history(5, 12, np.array([1, 0, 0, 0, 0], bool), 2)
    hist = [GtObservation(np.r_[o.group[:4], False], o.z, o.point) for o in hist]
    ens = init_ensemble(5, 20000, 0.3, np.random.default_rng(0))
    out = gibbs_move(ens, hist, NM, SmcConfig(), np.random.default_rng(5))
    assert abs(out.marginals()[4] - 0.3) < 4 * np.sqrt(0.3 * 0.7 / 20000)


def _tv(particles, post):
    idx = particles.astype(np.int64) @ (1 << np.arange(particles.shape[1]))
    emp = np.bincount(idx, minlength=post.probs.size) / len(idx)
    return 0.5 * np.abs(emp - post.probs).sum()


def test_gibbs_matches_exact_posterior_d6():
    dim, q = 6, 0.2
    truth = np.array([0, 1, 0, 0, 1, 0], bool)
    hist = _history(dim, 10, truth, 11)
    post = exact_posterior(dim, q, hist, NM)
    ens = init_ensemble(dim, 20000, q, np.random.default_rng(0))
    r = np.random.default_rng(1)
    for _ in range(15):
        ens = gibbs_move(ens, hist, NM, SmcConfig(), r)
    assert _tv(ens.particles, post) <= 0.05


def test_gibbs_leaves_exact_posterior_invariant():
    dim, q, m = 6, 0.2, 10000
    hist = _history(dim, 10, np.array([1, 0, 0, 1, 0, 0], bool), 4)
    post = exact_posterior(dim, q, hist, NM)
    r = np.random.default_rng(9)
    parts = post.states[r.choice(post.probs.size, m, p=post.probs)]
    ens = ActivityEnsemble(parts, np.zeros(m), np.full(dim, q))
    moved = gibbs_move(ens, hist, NM, SmcConfig(), r)
    se = np.sqrt(post.marginals * (1 - post.marginals) * 2 / m) + 1e-12
    assert np.all(np.abs(moved.marginals() - post.marginals) <= 3 * se)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), sweeps=st.integers(1, 3))
def test_incremental_counts_equal_recompute(seed, sweeps):
    r = np.random.default_rng(seed)
    dim = int(r.integers(3, 12))
    hist = _history(dim, int(r.integers(0, 15)), r.random(dim) < 0.3, seed)
    parts = r.random((50, dim)) < 0.3
    groups, z = history_arrays(hist, dim)
    moved, counts = gibbs_kernel(parts, groups, z, np.full(dim, 0.1), NM, SmcConfig(gibbs_sweeps=sweeps), r)
    np.testing.assert_array_equal(counts, recompute_counts(moved, hist))


def test_maybe_resample_move_cases():
    hist = _history(4, 5, np.array([1, 0, 0, 0], bool), 0)
    ens = init_ensemble(4, 100, 0.2, np.random.default_rng(0))
    same, moved = maybe_resample_move(ens, hist, NM, SmcConfig(), np.random.default_rng(1))
    assert not moved and same is ens
    lw = np.full(100, -np.inf)
    lw[7] = 0.0
    degenerate = ActivityEnsemble(ens.particles, lw, ens.prior_q)
    out, moved = maybe_resample_move(degenerate, hist, NM, SmcConfig(), np.random.default_rng(1))
    assert moved
    np.testing.assert_allclose(out.weights, 0.01)
    _, moved = maybe_resample_move(ens, hist, NM, SmcConfig(ess_threshold_fraction=1.0), np.random.default_rng(1))
    assert moved


def test_smc_config_validation():
    with pytest.raises(ValueError):
        SmcConfig(ess_threshold_fraction=0.0)
    with pytest.raises(ValueError):
        SmcConfig(gibbs_sweeps=0)
    with pytest.raises(ValueError):
        SmcConfig(move_dims_per_sweep=0)


def test_partial_sweep_touches_only_some_dims():
    # empty history, prior 0.5: visited bits get redrawn, the rest stay set
    parts = np.ones((4000, 8), bool)
    groups, z = history_arrays([], 8)
    moved, _ = gibbs_kernel(parts, groups, z, np.full(8, 0.5), NM, SmcConfig(move_dims_per_sweep=2), np.random.default_rng(0))
    assert (moved.all(axis=0)).sum() == 6
