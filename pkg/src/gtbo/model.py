"""Posterior over which dimensions are active.

A test perturbs a group of coordinates away from the default point and
observes the change ``z`` in the objective. If the group holds no active
dimension, ``z`` is pure noise, N(0, noise_var); otherwise it is drawn from
N(0, signal_var). The posterior over activity vectors is carried by a
weighted particle ensemble, with an exhaustive enumeration for small D as
reference.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import CapacityError, DegeneracyError

LOG_2PI = np.log(2 * np.pi)
MAX_EXACT_DIM = 20


@dataclass(frozen=True)
class NoiseModel:
    noise_var: float
    signal_var: float

    def __post_init__(self):
        if not (self.noise_var > 0 and self.signal_var >= self.noise_var):
            raise ValueError(
                f"need signal_var >= noise_var > 0, got {self.signal_var}, {self.noise_var}"
            )

    def log_lik_ratio(self, z) -> np.ndarray:
        """log p(z | active) - log p(z | inactive)."""
        return outcome_loglik(z, True, self) - outcome_loglik(z, False, self)


@dataclass(frozen=True)
class GtObservation:
    group: np.ndarray  # bool (D,)
    z: float
    point: np.ndarray
    y: float = float("nan")  # raw noisy value at ``point``


class ActivityEnsemble:
    """Weighted particles over {0,1}^D, weights kept in log space."""

    def __init__(self, particles, log_weights, prior_q):
        self.particles = np.asarray(particles, dtype=bool)
        lw = np.asarray(log_weights, dtype=float)
        self.prior_q = np.asarray(prior_q, dtype=float)
        if self.particles.ndim != 2 or lw.shape != (self.particles.shape[0],):
            raise ValueError("particles must be (M, D) with one log-weight per particle")
        norm = logsumexp(lw)
        if not np.isfinite(norm):
            raise DegeneracyError("all particle weights are zero")
        self.log_weights = lw - norm

    @property
    def n_particles(self) -> int:
        return self.particles.shape[0]

    @property
    def dim(self) -> int:
        return self.particles.shape[1]

    @property
    def weights(self) -> np.ndarray:
        w = np.exp(self.log_weights)
        return w / w.sum()

    def marginals(self) -> np.ndarray:
        return np.clip(self.weights @ self.particles, 0.0, 1.0)

    def with_particles(self, particles, log_weights=None) -> "ActivityEnsemble":
        if log_weights is None:
            log_weights = np.zeros(len(particles))
        return ActivityEnsemble(particles, log_weights, self.prior_q)


def as_group(g, dim: int | None = None) -> np.ndarray:
    g = np.asarray(g)
    if g.dtype != bool:
        g = g.astype(bool)
    if dim is not None and g.shape != (dim,):
        raise ValueError(f"group must have shape ({dim},), got {g.shape}")
    return g


def make_perturbed_point(g, x_def, rng: np.random.Generator, *, allow_empty: bool = False) -> np.ndarray:
    """Default point with a Uniform(-0.5, 0.5) offset on each grouped coordinate.

    The result is clipped to the unit box, which only matters for
    off-centre default points.
    """
    x_def = np.asarray(x_def, dtype=float)
    g = as_group(g, x_def.size)
    if not allow_empty and not g.any():
        raise ValueError("cannot test an empty group")
    offsets = rng.uniform(-0.5, 0.5, size=x_def.size)
    return np.clip(x_def + np.where(g, offsets, 0.0), 0.0, 1.0)


def group_active_prob(ens: ActivityEnsemble, g) -> float:
    """Posterior probability that ``g`` contains at least one active dimension."""
    g = as_group(g, ens.dim)
    hit = ens.particles[:, g].any(axis=1)
    return float(min(1.0, max(0.0, ens.weights @ hit)))


def outcome_loglik(z, contains_active, nm: NoiseModel):
    var = np.where(contains_active, nm.signal_var, nm.noise_var)
    z = np.asarray(z, dtype=float)
    out = -0.5 * (LOG_2PI + np.log(var) + z * z / var)
    return float(out) if out.ndim == 0 else out


def update_weights(ens: ActivityEnsemble, obs: GtObservation, nm: NoiseModel) -> ActivityEnsemble:
    hit = ens.particles[:, as_group(obs.group, ens.dim)].any(axis=1)
    loglik = np.where(
        hit, outcome_loglik(obs.z, True, nm), outcome_loglik(obs.z, False, nm)
    )
    return ActivityEnsemble(ens.particles, ens.log_weights + loglik, ens.prior_q)


def prior_vector(q, dim: int) -> np.ndarray:
    q = np.broadcast_to(np.asarray(q, dtype=float), (dim,)).copy()
    if np.any(q <= 0) or np.any(q >= 1):
        raise ValueError("prior activity probabilities must lie in (0, 1)")
    return q


def init_ensemble(dim: int, n_particles: int, q, rng: np.random.Generator) -> ActivityEnsemble:
    if n_particles < 1:
        raise ValueError("need at least one particle")
    q = prior_vector(q, dim)
    particles = rng.random((n_particles, dim)) < q
    return ActivityEnsemble(particles, np.zeros(n_particles), q)


def log_prior(particles: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Product-Bernoulli log prior of each row of ``particles``."""
    return particles @ np.log(q) + (~particles) @ np.log1p(-q)


def history_arrays(history: Sequence[GtObservation], dim: int):
    """Stack a history into a (T, D) group matrix and a (T,) outcome vector."""
    if not history:
        return np.zeros((0, dim), dtype=bool), np.zeros(0)
    groups = np.stack([as_group(o.group, dim) for o in history])
    z = np.array([o.z for o in history], dtype=float)
    return groups, z


def log_posterior_unnormalized(particles, q, history, nm: NoiseModel) -> np.ndarray:
    """Log prior plus log likelihood of every observation, per row."""
    particles = np.asarray(particles, dtype=bool)
    groups, z = history_arrays(history, particles.shape[1])
    out = log_prior(particles, q)
    if len(z):
        hit = (particles.astype(np.int32) @ groups.T.astype(np.int32)) > 0
        l1 = outcome_loglik(z, True, nm)
        l0 = outcome_loglik(z, False, nm)
        out = out + np.where(hit, l1, l0).sum(axis=1)
    return out


@dataclass(frozen=True)
class ExactPosterior:
    states: np.ndarray  # (2^D, D) bool
    probs: np.ndarray  # (2^D,)
    marginals: np.ndarray  # (D,)

    def prob_of(self, particles) -> np.ndarray:
        """Probability of each row in ``particles`` (state index lookup)."""
        idx = np.asarray(particles, dtype=np.int64) @ (1 << np.arange(self.states.shape[1]))
        return self.probs[idx]


def all_states(dim: int) -> np.ndarray:
    idx = np.arange(2**dim, dtype=np.int64)
    return ((idx[:, None] >> np.arange(dim)) & 1).astype(bool)


def exact_posterior(dim: int, q, history: Sequence[GtObservation], nm: NoiseModel) -> ExactPosterior:
    """Full Bayes posterior by enumerating all 2^D activity vectors."""
    if dim > MAX_EXACT_DIM:
        raise CapacityError(f"exact enumeration limited to D <= {MAX_EXACT_DIM}, got {dim}")
    q = prior_vector(q, dim)
    states = all_states(dim)
    logp = log_posterior_unnormalized(states, q, history, nm)
    probs = np.exp(logp - logsumexp(logp))
    return ExactPosterior(states, probs, probs @ states)
