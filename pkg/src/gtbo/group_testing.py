"""The group testing phase: find which input dimensions are active."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, SelectionError
from .model import (
    ActivityEnsemble,
    GtObservation,
    NoiseModel,
    init_ensemble,
    make_perturbed_point,
    update_weights,
)
from .selection import Selection, SelectionConfig, select_batch
from .smc import SmcConfig, maybe_resample_move
from .variance import VarianceProbeResult, estimate_variances

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GtConfig:
    max_tests: int = 300
    particles: int = 10000
    prior_q: float = 0.05
    eta: float = 0.5
    c_lower: float = 5e-3
    c_upper: float = 0.9
    batch_size: int = 5
    n_def: int = 5
    min_tests_before_convergence: int = 5
    calibrate_variances: bool = True
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    smc: SmcConfig = field(default_factory=SmcConfig)

    def __post_init__(self):
        if self.max_tests < 1:
            raise ConfigError("gt.max_tests", "must be a positive integer")
        if self.particles < 1:
            raise ConfigError("gt.particles", "must be a positive integer")
        if not 0 < self.prior_q < 1:
            raise ConfigError("gt.prior_q", "must lie in (0, 1)")
        if not 0 <= self.c_lower < self.c_upper <= 1:
            raise ConfigError("gt.c_lower", "need 0 <= c_lower < c_upper <= 1")
        if not self.c_lower < self.eta <= 1:
            raise ConfigError("gt.eta", "must lie in (c_lower, 1]")
        if self.batch_size < 1:
            raise ConfigError("gt.batch_size", "must be >= 1")
        if self.n_def < 2:
            raise ConfigError("gt.n_def", "must be >= 2")


@dataclass
class GtResult:
    active_dims: np.ndarray  # bool (D,)
    marginals_history: np.ndarray  # (n_tests, D)
    observations: list
    noise_model: NoiseModel
    converged_at: Optional[int]
    evaluations_used: int
    probe: VarianceProbeResult
    x_def: np.ndarray
    eta: float
    ensemble: ActivityEnsemble = None
    resample_moves: int = 0

    @property
    def final_marginals(self) -> np.ndarray:
        if len(self.marginals_history):
            return self.marginals_history[-1]
        return self.ensemble.marginals()

    def active_counts(self) -> np.ndarray:
        """Number of dims at or above ``eta`` after each test."""
        return (self.marginals_history >= self.eta).sum(axis=1)

    def evaluations(self):
        """All black-box evaluations in order as (kind, point, y) tuples."""
        out = [("default", self.x_def.copy(), y) for y in self.probe.default_values]
        out += [("probe", p.point, p.y) for p in self.probe.probe_observations]
        out += [("test", o.point, o.y) for o in self.observations]
        return out


def outcome_model(probe: VarianceProbeResult) -> NoiseModel:
    """Outcome variances for z = y - mean of the default evaluations.

    The default-point mean carries its own error of variance
    noise_var / n_def, which is added to both mixture components.
    """
    extra = probe.noise_var / len(probe.default_values)
    return NoiseModel(probe.noise_var + extra, probe.signal_var + extra)


def marginals(ens: ActivityEnsemble) -> np.ndarray:
    return ens.marginals()


def is_converged(marg, c_lower: float, c_upper: float) -> bool:
    m = np.asarray(marg)
    return bool(np.all((m <= c_lower) | (m >= c_upper)))


def _fallback_group(dim: int, cap: int, rng: np.random.Generator) -> np.ndarray:
    g = np.zeros(dim, dtype=bool)
    g[rng.choice(dim, int(rng.integers(1, cap + 1)), replace=False)] = True
    return g


def run_group_testing(
    f: Callable,
    x_def,
    cfg: GtConfig,
    rng: np.random.Generator,
    on_test: Callable = None,
) -> GtResult:
    """Probe variances, then select, evaluate and update until converged.

    ``f`` maps a point in [0,1]^D to a noisy value. ``on_test`` is called
    with ``(test_index, observation, marginals)`` after every test.
    """
    x_def = np.asarray(x_def, dtype=float)
    dim = x_def.size
    probe = estimate_variances(f, x_def, dim, rng, cfg.n_def, cfg.calibrate_variances)
    nm = outcome_model(probe)
    f_def = probe.default_estimate
    sel_cfg = replace(cfg.selection, batch_size=cfg.batch_size)
    cap = sel_cfg.group_cap(dim)

    ens = init_ensemble(dim, cfg.particles, cfg.prior_q, rng)
    history: list[GtObservation] = []
    rows: list[np.ndarray] = []
    converged_at = None
    moves = 0

    while len(history) < cfg.max_tests:
        try:
            batch = [s.group for s in select_batch(ens, nm, sel_cfg, rng)]
        except SelectionError:
            log.warning("group selection failed at test %d; using a random group", len(history) + 1)
            batch = [_fallback_group(dim, cap, rng)]
        batch = batch[: cfg.max_tests - len(history)]
        for k, g in enumerate(batch):
            x = make_perturbed_point(g, x_def, rng)
            y = float(f(x))
            obs = GtObservation(g, y - f_def, x, y)
            history.append(obs)
            ens = update_weights(ens, obs, nm)
            if k == len(batch) - 1:
                ens, moved = maybe_resample_move(ens, history, nm, cfg.smc, rng)
                moves += moved
            m = ens.marginals()
            rows.append(m)
            if on_test is not None:
                on_test(len(history), obs, m)
        if len(history) >= cfg.min_tests_before_convergence and is_converged(
            rows[-1], cfg.c_lower, cfg.c_upper
        ):
            converged_at = len(history)
            break

    final = rows[-1]
    gamma = final >= cfg.eta
    if gamma.sum() > math.isqrt(dim):
        log.warning(
            "%d dimensions flagged active, more than the sqrt(D)=%d assumed by the variance probe",
            gamma.sum(),
            math.isqrt(dim),
        )
    return GtResult(
        active_dims=gamma,
        marginals_history=np.array(rows),
        observations=history,
        noise_model=nm,
        converged_at=converged_at,
        evaluations_used=probe.n_evaluations + len(history),
        probe=probe,
        x_def=x_def,
        eta=cfg.eta,
        ensemble=ens,
        resample_moves=moves,
    )
