"""Optimization phase: a GP whose length-scale priors encode the activity
pattern found by group testing, driven by log expected improvement."""

from __future__ import annotations

import hashlib
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import erfcx, log_ndtr
from scipy.stats import qmc

from .errors import FitError
from .gp import GpHyperparams, GpSurrogate, LengthscalePrior, fit_map

log = logging.getLogger(__name__)

SYNTHETIC_PRIORS = (LengthscalePrior(0.0, 1.0), LengthscalePrior(7.0, 1.0))
REAL_WORLD_PRIORS = (LengthscalePrior(0.0, 1.0), LengthscalePrior(3.0, 1.0))
PROFILES = {"synthetic": SYNTHETIC_PRIORS, "real_world": REAL_WORLD_PRIORS}
LOG_EI_FLOOR = -1e4


@dataclass(frozen=True)
class BoConfig:
    budget: int = 100
    active_prior: LengthscalePrior = SYNTHETIC_PRIORS[0]
    inactive_prior: LengthscalePrior = SYNTHETIC_PRIORS[1]
    acq_restarts: int = 5
    acq_raw_samples: int = 512
    dedup_tolerance: float = 1e-9
    gp_restarts: int = 3
    gp_max_iter: int = 200
    pattern_max_iter: int = 100

    def __post_init__(self):
        if self.budget < 0:
            raise ValueError("budget must be nonnegative")
        if self.acq_restarts < 1 or self.acq_raw_samples < 1 or self.gp_restarts < 1:
            raise ValueError("acquisition restarts, raw samples and GP restarts must be positive")
        if self.dedup_tolerance < 0:
            raise ValueError("dedup_tolerance must be nonnegative")

    @classmethod
    def for_profile(cls, profile: str, **kwargs) -> "BoConfig":
        active, inactive = PROFILES[profile]
        return cls(active_prior=active, inactive_prior=inactive, **kwargs)


def point_hash(x) -> str:
    return hashlib.sha256(np.ascontiguousarray(x, dtype="<f8").tobytes()).hexdigest()[:16]


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    phase: str
    point_hash: str
    y: float
    f: Optional[float]
    best_y: float
    best_f: Optional[float]


@dataclass
class IncumbentTrace:
    """Every evaluation in order with running minima (minimization)."""

    rows: list = field(default_factory=list)
    points: list = field(default_factory=list)
    aborted: bool = False

    def append(self, phase: str, point, y: float, f: Optional[float] = None) -> TraceRow:
        prev = self.rows[-1] if self.rows else None
        best_y = y if prev is None else min(prev.best_y, y)
        if f is None:
            best_f = prev.best_f if prev is not None else None
        else:
            best_f = f if prev is None or prev.best_f is None else min(prev.best_f, f)
        row = TraceRow(len(self.rows) + 1, phase, point_hash(point), float(y), f, best_y, best_f)
        self.rows.append(row)
        self.points.append(np.array(point, dtype=float))
        return row

    def __len__(self):
        return len(self.rows)

    def phase_rows(self, phase: str) -> list:
        return [r for r in self.rows if r.phase == phase]

    def best_f(self) -> np.ndarray:
        return np.array([np.nan if r.best_f is None else r.best_f for r in self.rows])

    def best_y(self) -> np.ndarray:
        return np.array([r.best_y for r in self.rows])


def dedup_gt_data(points, values, active, tol: float = 1e-9, is_default=None):
    """Collapse evaluations that coincide on the active coordinates.

    The earliest point of each cluster is kept with its own value, except
    that replicate evaluations flagged in ``is_default`` collapse to one
    point carrying their mean. Returns ``(X, y)``.
    """
    x = np.asarray(points, dtype=float)
    y = np.asarray(values, dtype=float)
    if x.size == 0:
        return np.zeros((0, x.shape[-1] if x.ndim == 2 else 0)), np.zeros(0)
    active = np.asarray(active, dtype=bool)
    is_default = np.zeros(len(y), dtype=bool) if is_default is None else np.asarray(is_default, dtype=bool)

    kx, ky = [], []
    if is_default.any():
        first = int(np.flatnonzero(is_default)[0])
        kx.append(x[first])
        ky.append(float(y[is_default].mean()))
    for i in range(len(y)):
        if is_default[i]:
            continue
        if kx:
            kept = np.array(kx)[:, active]
            if kept.shape[1] == 0 or np.any(np.max(np.abs(kept - x[i, active]), axis=1) <= tol):
                continue
        kx.append(x[i])
        ky.append(float(y[i]))
    return np.array(kx), np.array(ky)


def build_priors(active, active_prior: LengthscalePrior, inactive_prior: LengthscalePrior) -> list:
    return [active_prior if a else inactive_prior for a in np.asarray(active, dtype=bool)]


def _log_h(u):
    """log(phi(u) + u * Phi(u)) without cancellation for very negative u."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    log_phi = -0.5 * u * u - 0.5 * math.log(2 * math.pi)
    mid = u > -1
    um = u[mid]
    out[mid] = np.log(np.exp(log_phi[mid]) + um * np.exp(log_ndtr(um)))
    w = -u[~mid]
    far = w > 1e6
    inner = np.empty_like(w)
    # u Phi(u) / phi(u) = -w * sqrt(pi/2) * erfcx(w / sqrt 2)
    t = np.log(w[~far]) + np.log(erfcx(w[~far] / math.sqrt(2))) + 0.5 * math.log(math.pi / 2)
    inner[~far] = np.log(-np.expm1(t))
    inner[far] = -2 * np.log(w[far])
    out[~mid] = log_phi[~mid] + inner
    return out


def log_ei_from_moments(mean, var, incumbent: float):
    """log E[max(incumbent - Y, 0)] for Y ~ N(mean, var), floored."""
    var = np.asarray(var, dtype=float)
    mean = np.asarray(mean, dtype=float)
    sd = np.sqrt(np.maximum(var, 1e-24))
    u = (incumbent - mean) / sd
    out = np.log(sd) + _log_h(u)
    # no predictive spread: EI is the plain improvement, zero at or above the incumbent
    with np.errstate(divide="ignore"):
        out = np.where(var > 0, out, np.log(np.maximum(incumbent - mean, 0.0)))
    return np.maximum(out, LOG_EI_FLOOR)


def plug_in_incumbent(surrogate: GpSurrogate) -> float:
    """Lowest posterior mean over the training inputs."""
    mean, _ = surrogate.predict_standardized(surrogate.train_inputs)
    return float(mean.min())


def log_expected_improvement(surrogate: GpSurrogate, x, incumbent: Optional[float] = None):
    """Log EI at ``x`` on the standardized scale (monotone in the raw-scale EI)."""
    if incumbent is None:
        incumbent = plug_in_incumbent(surrogate)
    mean, var = surrogate.predict_standardized(x)
    out = log_ei_from_moments(mean, var, incumbent)
    return float(out[0]) if np.ndim(x) == 1 else out


def _sobol(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    sampler = qmc.Sobol(dim, scramble=True, seed=rng)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return sampler.random(n)


def _pattern_search(acq: Callable, x0: np.ndarray, f0: float, max_iter: int):
    """Coordinate polling with step halving.

    Each round polls +-step on every coordinate, then tries the move that
    combines all improving coordinates; the better of that and the best
    single poll is accepted.
    """
    x, fx, step = x0.copy(), f0, 0.1
    dim = x.size
    eye = np.eye(dim)
    for _ in range(max_iter):
        if step < 1e-3:
            break
        polls = np.clip(np.concatenate([x + step * eye, x - step * eye]), 0.0, 1.0)
        vals = acq(polls)
        gain = vals - fx
        if not np.max(gain) > 1e-9:
            step /= 2
            continue
        j = int(np.argmax(gain))
        cand, cval = polls[j], vals[j]
        up, down = gain[:dim], gain[dim:]
        move = np.where((up > 1e-9) & (up >= down), step, np.where(down > 1e-9, -step, 0.0))
        combo = np.clip(x + move, 0.0, 1.0)
        comb_val = acq(combo[None, :])[0]
        if comb_val > cval:
            cand, cval = combo, comb_val
        x, fx = cand, float(cval)
    return x, fx


def optimize_acquisition(
    surrogate: GpSurrogate, cfg: BoConfig, rng: np.random.Generator, incumbent: Optional[float] = None
) -> np.ndarray:
    """Maximise log EI: quasi-random and local candidates, then pattern search."""
    if incumbent is None:
        incumbent = plug_in_incumbent(surrogate)
    dim = surrogate.dim

    def acq(z):
        mean, var = surrogate.predict_standardized(z)
        return log_ei_from_moments(mean, var, incumbent)

    cands = [_sobol(cfg.acq_raw_samples, dim, rng)]
    if len(surrogate.train_targets):
        mean, _ = surrogate.predict_standardized(surrogate.train_inputs)
        best = surrogate.train_inputs[int(np.argmin(mean))]
        n_local = max(1, cfg.acq_raw_samples // 4)
        scales = np.where(np.arange(n_local) % 2 == 0, 0.02, 0.1)[:, None]
        cands.append(np.clip(best + scales * rng.standard_normal((n_local, dim)), 0.0, 1.0))
    cands = np.concatenate(cands)
    vals = acq(cands)
    order = np.argsort(-vals, kind="stable")[: cfg.acq_restarts]

    best_x, best_v = cands[order[0]], vals[order[0]]
    for i in order:
        x, v = _pattern_search(acq, cands[i], float(vals[i]), cfg.pattern_max_iter)
        if v > best_v:
            best_x, best_v = x, v
    return np.clip(best_x, 0.0, 1.0)


def trace_from_gt(gt_result, truth: Optional[Callable] = None, trace: IncumbentTrace = None) -> IncumbentTrace:
    trace = IncumbentTrace() if trace is None else trace
    for _kind, x, y in gt_result.evaluations():
        trace.append("gt", x, y, truth(x) if truth else None)
    return trace


def gt_dataset(gt_result, tol: float):
    evals = gt_result.evaluations()
    if not evals:
        return np.zeros((0, gt_result.x_def.size)), np.zeros(0)
    x = np.array([e[1] for e in evals])
    y = np.array([e[2] for e in evals])
    is_def = np.array([e[0] == "default" for e in evals])
    return dedup_gt_data(x, y, gt_result.active_dims, tol, is_def)


def run_bo(
    objective: Callable,
    gt_result,
    cfg: BoConfig,
    rng: np.random.Generator,
    truth: Optional[Callable] = None,
    trace: Optional[IncumbentTrace] = None,
) -> IncumbentTrace:
    """Spend ``cfg.budget`` evaluations on GP-guided search.

    ``truth`` (noise-free objective) is only used to annotate the trace.
    When ``trace`` is None a fresh one is seeded with the group testing
    evaluations.
    """
    if trace is None:
        trace = trace_from_gt(gt_result, truth)
    dim = gt_result.x_def.size
    x, y = gt_dataset(gt_result, cfg.dedup_tolerance)
    priors = build_priors(gt_result.active_dims, cfg.active_prior, cfg.inactive_prior)

    def evaluate(point):
        val = float(objective(point))
        trace.append("bo", point, val, truth(point) if truth else None)
        return val

    spent = 0
    if len(y) < 2:
        # too little distinct data for a GP: space-filling seeds from the budget
        for point in _sobol(2, dim, rng)[: min(2 - len(y), cfg.budget)]:
            x = np.vstack([x, point]) if len(x) else point[None, :]
            y = np.append(y, evaluate(point))
            spent += 1

    warm: Optional[GpHyperparams] = None
    while spent < cfg.budget:
        noise_init = None
        if np.var(y) > 0:
            noise_init = float(np.clip(gt_result.noise_model.noise_var / np.var(y), 1e-8, 1.0))
        try:
            model = fit_map(
                x, y, priors, cfg.gp_restarts, rng,
                noise_init=noise_init, warm_start=warm, max_iter=cfg.gp_max_iter,
            )
        except FitError:
            log.error("GP fit failed after %d BO evaluations; stopping with a partial trace", spent)
            trace.aborted = True
            break
        warm = model.hyper
        point = optimize_acquisition(model, cfg, rng)
        x = np.vstack([x, point])
        y = np.append(y, evaluate(point))
        spent += 1
    return trace
