"""Choosing informative groups to test.

A test outcome is a two-component Gaussian mixture whose weight is the
probability ``p`` that the group holds an active dimension, so the mutual
information between the outcome and the activity vector is a function of
``p`` alone. Groups are grown and pruned greedily to maximise it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .errors import SelectionError
from .model import ActivityEnsemble, NoiseModel, as_group, group_active_prob

LOG_2PI = math.log(2 * math.pi)
_TOL = 1e-12


@dataclass(frozen=True)
class MiEstimate:
    value: float
    mc_samples: int

    @property
    def reported(self) -> float:
        return max(0.0, self.value)


@dataclass(frozen=True)
class SelectionConfig:
    n_seed_groups: int = 3
    max_group_size: Optional[int] = None  # None: ceil(D / 2)
    mc_samples: int = 512
    final_mc_samples: int = 4096
    batch_size: int = 5
    near_optimal_fraction: float = 0.9

    def __post_init__(self):
        if self.n_seed_groups < 1 or self.mc_samples < 1 or self.final_mc_samples < 1:
            raise ValueError("seed count and MC sample sizes must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_group_size is not None and self.max_group_size < 1:
            raise ValueError("max_group_size must be positive")
        if not 0 <= self.near_optimal_fraction <= 1:
            raise ValueError("near_optimal_fraction must lie in [0, 1]")

    def group_cap(self, dim: int) -> int:
        cap = math.ceil(dim / 2) if self.max_group_size is None else self.max_group_size
        return min(cap, dim)


def gaussian_entropy(var: float) -> float:
    return 0.5 * math.log(2 * math.pi * math.e * var)


def _log_normal(z, var):
    return -0.5 * (LOG_2PI + np.log(var) + z * z / var)


def _log_mixture(z, p, nm: NoiseModel):
    with np.errstate(divide="ignore"):
        a = np.log(p) + _log_normal(z, nm.signal_var)
        b = np.log1p(-p) + _log_normal(z, nm.noise_var)
    return np.logaddexp(a, b)


def mixture_entropy_mc(p_active: float, nm: NoiseModel, n_samples: int, rng: np.random.Generator) -> float:
    """Monte-Carlo entropy of p N(0, signal_var) + (1-p) N(0, noise_var)."""
    if not 0 <= p_active <= 1:
        raise ValueError("p_active must lie in [0, 1]")
    active = rng.random(n_samples) < p_active
    sd = np.where(active, math.sqrt(nm.signal_var), math.sqrt(nm.noise_var))
    z = sd * rng.standard_normal(n_samples)
    return float(-np.mean(_log_mixture(z, p_active, nm)))


def mutual_information(
    ens: ActivityEnsemble, g, nm: NoiseModel, n_samples: int, rng: np.random.Generator
) -> MiEstimate:
    """Outcome entropy minus the expected conditional (Gaussian) entropy."""
    g = as_group(g, ens.dim)
    if not g.any():
        raise ValueError("group must be nonempty")
    p = group_active_prob(ens, g)
    h = mixture_entropy_mc(p, nm, n_samples, rng)
    cond = (1 - p) * gaussian_entropy(nm.noise_var) + p * gaussian_entropy(nm.signal_var)
    return MiEstimate(h - cond, n_samples)


class MiEvaluator:
    """Mutual information as a function of ``p`` on fixed random numbers.

    Each mixture component is sampled from the same standard normals, and
    the conditional entropies are estimated on those same draws, so the
    estimate is a smooth deterministic function of ``p``: exactly zero at
    p in {0, 1} or when the two variances coincide.
    """

    def __init__(self, nm: NoiseModel, n_samples: int, rng: np.random.Generator):
        self.nm = nm
        self.n_samples = n_samples
        e = rng.standard_normal(n_samples)
        self._zs = math.sqrt(nm.signal_var) * e
        self._zn = math.sqrt(nm.noise_var) * e
        self._ls_s = _log_normal(self._zs, nm.signal_var)
        self._ln_s = _log_normal(self._zs, nm.noise_var)
        self._ls_n = _log_normal(self._zn, nm.signal_var)
        self._ln_n = _log_normal(self._zn, nm.noise_var)

    def __call__(self, p) -> np.ndarray:
        p = np.clip(np.atleast_1d(np.asarray(p, dtype=float)), 0.0, 1.0)[:, None]
        with np.errstate(divide="ignore"):
            lp, lq = np.log(p), np.log1p(-p)
        mix_s = np.logaddexp(lp + self._ls_s, lq + self._ln_s)
        mix_n = np.logaddexp(lp + self._ls_n, lq + self._ln_n)
        kl_s = np.mean(self._ls_s - mix_s, axis=1)
        kl_n = np.mean(self._ln_n - mix_n, axis=1)
        p = p[:, 0]
        return np.where(p > 0, p * kl_s, 0.0) + np.where(p < 1, (1 - p) * kl_n, 0.0)

    def estimate(self, p: float) -> MiEstimate:
        return MiEstimate(float(self(p)[0]), self.n_samples)


@dataclass(frozen=True)
class Selection:
    group: np.ndarray
    mi: float
    p_active: float


class _GroupSearch:
    """Greedy add/remove moves, scored through ``p`` updates in bulk."""

    def __init__(self, ens: ActivityEnsemble, mi: MiEvaluator, cap: int):
        self.w = ens.weights
        self.parts = ens.particles
        self.parts_f = ens.particles.astype(float)
        self.mi = mi
        self.cap = cap

    def run(self, seed: np.ndarray) -> tuple[np.ndarray, float]:
        g = seed.copy()
        cnt = self.parts[:, g].sum(axis=1)
        p = float(self.w @ (cnt > 0))
        cur = float(self.mi(p)[0])
        for _ in range(4 * g.size + 8):
            changed = False
            while g.sum() < self.cap:
                gain = (self.w * (cnt == 0)) @ self.parts_f
                cand = np.where(g, -np.inf, self.mi(p + gain))
                j = int(np.argmax(cand))
                if not cand[j] > cur + _TOL:
                    break
                g[j] = True
                cnt = cnt + self.parts[:, j]
                p, cur, changed = p + gain[j], float(cand[j]), True
            while g.sum() > 1:
                loss = (self.w * (cnt == 1)) @ self.parts_f
                cand = np.where(g, self.mi(p - loss), -np.inf)
                j = int(np.argmax(cand))
                if not cand[j] > cur + _TOL:
                    break
                g[j] = False
                cnt = cnt - self.parts[:, j]
                p, cur, changed = p - loss[j], float(cand[j]), True
            if not changed:
                break
        return g, cur


def seed_groups(ens: ActivityEnsemble, n_seeds: int, cap: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Starting groups: one prior draw, one particle draw, rest from marginals."""
    dim = ens.dim
    seeds = [rng.random(dim) < ens.prior_q]
    if n_seeds > 1:
        k = rng.choice(ens.n_particles, p=ens.weights)
        seeds.append(ens.particles[k].copy())
    marg = ens.marginals()
    while len(seeds) < n_seeds:
        seeds.append(rng.random(dim) < marg)
    out = []
    for s in seeds[:n_seeds]:
        idx = np.flatnonzero(s)
        if idx.size > cap:
            s = np.zeros(dim, dtype=bool)
            s[rng.choice(idx, cap, replace=False)] = True
        out.append(s)
    return out


def _key(g: np.ndarray) -> bytes:
    return np.packbits(g).tobytes()


def forward_backward(
    ens: ActivityEnsemble,
    nm: NoiseModel,
    cfg: SelectionConfig,
    excluded: Iterable = (),
    rng: np.random.Generator = None,
    *,
    search_mi: MiEvaluator = None,
    final_mi: MiEvaluator = None,
    seeds: list = None,
) -> Selection:
    """Multi-start greedy MI maximisation; best result not in ``excluded``."""
    if rng is None:
        rng = np.random.default_rng()
    if search_mi is None:
        search_mi = MiEvaluator(nm, cfg.mc_samples, rng)
    if final_mi is None:
        final_mi = MiEvaluator(nm, cfg.final_mc_samples, rng)
    cap = cfg.group_cap(ens.dim)
    if seeds is None:
        seeds = seed_groups(ens, cfg.n_seed_groups, cap, rng)
    banned = {_key(as_group(g, ens.dim)) for g in excluded}
    search = _GroupSearch(ens, search_mi, cap)

    best = None
    seen = set()
    for seed in seeds:
        g, _ = search.run(as_group(seed, ens.dim))
        key = _key(g)
        if not g.any() or key in banned or key in seen:
            continue
        seen.add(key)
        p = group_active_prob(ens, g)
        mi = float(final_mi(p)[0])
        if best is None or mi > best.mi:
            best = Selection(g, mi, p)
    if best is None:
        raise SelectionError("every candidate group was empty or excluded")
    return best


def select_batch(
    ens: ActivityEnsemble, nm: NoiseModel, cfg: SelectionConfig, rng: np.random.Generator
) -> list[Selection]:
    """Up to ``batch_size`` distinct groups, each close to the best MI."""
    search_mi = MiEvaluator(nm, cfg.mc_samples, rng)
    final_mi = MiEvaluator(nm, cfg.final_mc_samples, rng)
    first = forward_backward(ens, nm, cfg, (), rng, search_mi=search_mi, final_mi=final_mi)
    batch = [first]
    while len(batch) < cfg.batch_size:
        try:
            nxt = forward_backward(
                ens, nm, cfg, [s.group for s in batch], rng, search_mi=search_mi, final_mi=final_mi
            )
        except SelectionError:
            break
        if nxt.mi < cfg.near_optimal_fraction * first.mi:
            break
        batch.append(nxt)
    return batch
