"""Resample-move rejuvenation for the activity ensemble."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.special import expit

from .model import ActivityEnsemble, GtObservation, NoiseModel, history_arrays


@dataclass(frozen=True)
class SmcConfig:
    ess_threshold_fraction: float = 0.5
    gibbs_sweeps: int = 1
    move_dims_per_sweep: Union[str, int] = "all"

    def __post_init__(self):
        if not 0 < self.ess_threshold_fraction <= 1:
            raise ValueError("ess_threshold_fraction must lie in (0, 1]")
        if self.gibbs_sweeps < 1:
            raise ValueError("gibbs_sweeps must be positive")
        if self.move_dims_per_sweep != "all" and int(self.move_dims_per_sweep) < 1:
            raise ValueError("move_dims_per_sweep must be 'all' or a positive integer")


def effective_sample_size(ens: ActivityEnsemble) -> float:
    w = ens.weights
    return float(1.0 / np.sum(w * w))


def systematic_positions(n: int, rng: np.random.Generator) -> np.ndarray:
    return (rng.random() + np.arange(n)) / n


def systematic_resample(ens: ActivityEnsemble, rng: np.random.Generator) -> ActivityEnsemble:
    m = ens.n_particles
    cdf = np.cumsum(ens.weights)
    cdf[-1] = 1.0
    idx = np.searchsorted(cdf, systematic_positions(m, rng), side="right")
    return ens.with_particles(ens.particles[idx])


def _visit_order(dim: int, cfg: SmcConfig, rng: np.random.Generator) -> np.ndarray:
    order = rng.permutation(dim)
    if cfg.move_dims_per_sweep != "all":
        order = order[: min(dim, int(cfg.move_dims_per_sweep))]
    return order


def gibbs_kernel(
    particles: np.ndarray,
    groups: np.ndarray,
    z: np.ndarray,
    prior_q: np.ndarray,
    nm: NoiseModel,
    cfg: SmcConfig,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Run the Gibbs sweeps on a copy of ``particles``.

    Returns the moved particles and the per-(particle, test) active counts
    maintained incrementally along the way.
    """
    particles = particles.copy()
    n, dim = particles.shape
    prior_logit = np.log(prior_q) - np.log1p(-prior_q)
    delta = nm.log_lik_ratio(z) if len(z) else np.zeros(0)
    counts = particles.astype(np.int32) @ groups.T.astype(np.int32)
    tests_of = [np.flatnonzero(groups[:, i]) for i in range(dim)]

    for _ in range(cfg.gibbs_sweeps):
        order = _visit_order(dim, cfg, rng)
        u = rng.random((len(order), n))
        for j, i in enumerate(order):
            ts = tests_of[i]
            old = particles[:, i]
            logit = np.full(n, prior_logit[i])
            if ts.size:
                # tests where no *other* member of the group is active
                others = counts[:, ts] - old[:, None].astype(np.int32)
                logit += (others == 0) @ delta[ts]
            new = u[j] < expit(logit)
            changed = new != old
            if ts.size and changed.any():
                step = new[changed].astype(np.int32) - old[changed].astype(np.int32)
                counts[np.ix_(np.flatnonzero(changed), ts)] += step[:, None]
            particles[:, i] = new
    return particles, counts


def gibbs_move(
    ens: ActivityEnsemble,
    history: Sequence[GtObservation],
    nm: NoiseModel,
    cfg: SmcConfig,
    rng: np.random.Generator,
) -> ActivityEnsemble:
    """Gibbs sweeps over bits, targeting prior x likelihood of ``history``.

    All particles share the random visiting order of a sweep; each bit is
    redrawn from its full conditional. Active counts per (particle, test)
    are updated incrementally, so flipping bit i only touches the tests
    whose group contains i.
    """
    groups, z = history_arrays(history, ens.dim)
    particles, _ = gibbs_kernel(ens.particles, groups, z, ens.prior_q, nm, cfg, rng)
    return ens.with_particles(particles, ens.log_weights)


def recompute_counts(particles: np.ndarray, history: Sequence[GtObservation]) -> np.ndarray:
    groups, _ = history_arrays(history, particles.shape[1])
    return particles.astype(np.int32) @ groups.T.astype(np.int32)


def maybe_resample_move(
    ens: ActivityEnsemble,
    history: Sequence[GtObservation],
    nm: NoiseModel,
    cfg: SmcConfig,
    rng: np.random.Generator,
) -> tuple[ActivityEnsemble, bool]:
    """Resample and move when the ESS falls below the configured fraction.

    Returns the (possibly new) ensemble and whether a move happened.
    """
    threshold = cfg.ess_threshold_fraction * ens.n_particles
    ess = effective_sample_size(ens)
    # with threshold 1.0 uniform weights give ess == M up to round-off
    if ess < threshold or (cfg.ess_threshold_fraction >= 1.0):
        ens = systematic_resample(ens, rng)
        ens = gibbs_move(ens, history, nm, cfg, rng)
        return ens, True
    return ens, False
