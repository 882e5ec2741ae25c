"""Experiment modes: full GTBO, group testing only, random search, sweeps."""

from __future__ import annotations

import dataclasses
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np
from threadpoolctl import threadpool_limits

from . import artifacts
from ._random import derive_rng
from .bo import IncumbentTrace, run_bo
from .config import RunConfig, to_dict
from .errors import ConfigError
from .group_testing import GtResult, run_group_testing
from .testbed import BenchmarkObjective, BenchmarkSpec, global_minimum

log = logging.getLogger(__name__)

INACTIVE_BELOW = 0.01
ACTIVE_ABOVE = 0.9


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("GTBO_THREADS", "1")))
    except ValueError:
        return 1


def make_spec(cfg: RunConfig) -> BenchmarkSpec:
    return cfg.benchmark.spec(derive_rng(cfg.seed, "placement"))


def trace_from_objective(objective: BenchmarkObjective) -> IncumbentTrace:
    trace = IncumbentTrace()
    for phase, obs in zip(objective.phases, objective.observations):
        trace.append(phase, obs.point, obs.noisy_value, obs.true_value)
    return trace


def random_search(spec: BenchmarkSpec, budget: int, rng: np.random.Generator, objective=None) -> IncumbentTrace:
    """Uniform i.i.d. points in the unit box."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    objective = objective or BenchmarkObjective(spec, rng)
    trace = IncumbentTrace()
    for _ in range(budget):
        x = rng.random(spec.ambient_dim)
        y = objective(x)
        trace.append("random", x, y, objective.truth(x))
    return trace


@dataclasses.dataclass
class RunOutcome:
    spec: BenchmarkSpec
    objective: BenchmarkObjective
    gt: Optional[GtResult] = None
    trace: Optional[IncumbentTrace] = None
    wallclock: dict = dataclasses.field(default_factory=dict)
    error: Optional[str] = None

    def regret(self) -> np.ndarray:
        return self.trace.best_f() - global_minimum(self.spec)


def run_gtbo(cfg: RunConfig, with_bo: bool = True) -> RunOutcome:
    """Group testing followed (optionally) by BO.

    Errors raised by the objective are captured in ``outcome.error`` so
    that the evaluations made so far can still be written out.
    """
    spec = make_spec(cfg)
    objective = BenchmarkObjective(spec, derive_rng(cfg.seed, "noise"), phase="gt")
    out = RunOutcome(spec, objective)
    try:
        t0 = time.perf_counter()
        gt_result = run_group_testing(objective, spec.default_point, cfg.gt, derive_rng(cfg.seed, "gt"))
        out.gt = gt_result
        out.wallclock["gt"] = time.perf_counter() - t0
        if with_bo:
            objective.phase = "bo"
            t1 = time.perf_counter()
            run_bo(objective, gt_result, cfg.bo, derive_rng(cfg.seed, "bo"), truth=objective.truth)
            out.wallclock["bo"] = time.perf_counter() - t1
    except Exception as exc:  # noqa: BLE001 - reported as a failed run
        log.exception("run failed")
        out.error = f"{type(exc).__name__}: {exc}"
    out.trace = trace_from_objective(objective)
    return out


def correct_fraction(marginals: np.ndarray, active_dims) -> np.ndarray:
    """Share of dims classified correctly after each test.

    Inactive dims count when below 1%, active dims when above 90%.
    """
    m = np.atleast_2d(marginals)
    truth = np.zeros(m.shape[1], dtype=bool)
    truth[list(active_dims)] = True
    ok = np.where(truth, m > ACTIVE_ABOVE, m < INACTIVE_BELOW)
    return ok.mean(axis=1)


def pad_curve(curve: np.ndarray, length: int) -> np.ndarray:
    """Hold the last value after early convergence."""
    if len(curve) >= length:
        return curve[:length]
    fill = curve[-1] if len(curve) else 0.0
    return np.concatenate([curve, np.full(length - len(curve), fill)])


def sweep_cell_config(cfg: RunConfig, axis: str, value, seed: int) -> RunConfig:
    b = cfg.benchmark
    if axis == "noise_std":
        b = dataclasses.replace(b, noise_std=float(value))
    elif axis == "ambient_dim":
        b = dataclasses.replace(b, ambient_dim=int(value))
    elif axis == "active_dim_count":
        if b.name not in ("levy", "levy4"):
            raise ConfigError("sweep.axis", "active_dim_count needs the levy benchmark")
        b = dataclasses.replace(b, name="levy", n_active=int(value))
    else:
        raise ConfigError("sweep.axis", f"unknown axis {axis!r}")
    return dataclasses.replace(cfg, benchmark=b, seed=int(seed), mode="gt_only")


def _sweep_cell(args) -> np.ndarray:
    cfg, axis, value, seed = args
    cell = sweep_cell_config(cfg, axis, value, seed)
    with threadpool_limits(1):
        out = run_gtbo(cell, with_bo=False)
    if out.error:
        raise RuntimeError(out.error)
    return pad_curve(correct_fraction(out.gt.marginals_history, out.spec.active_dims), cell.gt.max_tests)


def sweep(cfg: RunConfig, axis: str, values, seeds, workers: Optional[int] = None) -> dict:
    """Correctly classified fraction per test, one row per seed, per value."""
    workers = worker_count() if workers is None else workers
    jobs = [(cfg, axis, v, s) for v in values for s in seeds]
    for job in jobs:
        sweep_cell_config(*job)  # fail fast on inapplicable axes
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_cell, jobs))
    else:
        rows = [_sweep_cell(j) for j in jobs]
    out, k = {}, 0
    for v in values:
        out[v] = np.array(rows[k : k + len(seeds)])
        k += len(seeds)
    return out


def _summary(cfg: RunConfig, out: RunOutcome, files: list) -> dict:
    trace = out.trace
    n_gt = sum(r.phase == "gt" for r in trace.rows)
    n_bo = sum(r.phase == "bo" for r in trace.rows)
    last = trace.rows[-1] if trace.rows else None
    summary = {
        "seed": cfg.seed,
        "mode": cfg.mode,
        "status": "failed" if out.error else "ok",
        "error": out.error,
        "config": to_dict(cfg),
        "benchmark": {
            "active_dims": list(out.spec.active_dims),
            "noise_std": out.spec.noise_std,
            "global_minimum": global_minimum(out.spec),
        },
        "evaluations": {"gt": n_gt, "bo": n_bo, "random": len(trace) - n_gt - n_bo, "total": len(trace)},
        "final_incumbent": {
            "noisy": None if last is None else last.best_y,
            "true": None if last is None else last.best_f,
        },
        "regret": [None if not np.isfinite(v) else float(v) for v in out.regret()] if trace.rows else [],
        "wallclock": out.wallclock,
        "files": files,
    }
    if out.gt is not None:
        g = out.gt
        summary["gamma"] = [int(i) for i in np.flatnonzero(g.active_dims)]
        summary["gamma_bits"] = [int(b) for b in g.active_dims]
        summary["converged_at"] = g.converged_at
        summary["noise_model"] = {"noise_var": g.noise_model.noise_var, "signal_var": g.noise_model.signal_var}
        summary["gt_tests"] = len(g.observations)
        summary["final_marginals"] = [float(v) for v in g.final_marginals]
    return summary


def execute(cfg: RunConfig) -> dict:
    """Run ``cfg.mode`` and write its artifacts under ``cfg.output_dir``."""
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    with threadpool_limits(1):
        return _execute(cfg, out_dir, t0)


def _execute(cfg: RunConfig, out_dir: Path, t0: float) -> dict:
    if cfg.mode == "sweep":
        curves = sweep(cfg, cfg.sweep.axis, cfg.sweep.values, cfg.sweep.seeds)
        artifacts.write_sweep(out_dir / "sweep.csv", cfg.sweep.axis, curves, cfg.sweep.seeds, cfg.seed)
        summary = {
            "seed": cfg.seed,
            "mode": cfg.mode,
            "status": "ok",
            "error": None,
            "config": to_dict(cfg),
            "median_curves": {str(v): np.median(m, axis=0).tolist() for v, m in curves.items()},
            "wallclock": {"total": time.perf_counter() - t0},
            "files": ["sweep.csv", "summary.json"],
        }
        artifacts.write_json(out_dir / "summary.json", summary)
        return summary

    if cfg.mode == "random_search":
        spec = make_spec(cfg)
        objective = BenchmarkObjective(spec, derive_rng(cfg.seed, "noise"), phase="random")
        out = RunOutcome(spec, objective)
        budget = cfg.random_search_budget or cfg.bo.budget
        t1 = time.perf_counter()
        try:
            random_search(spec, budget, derive_rng(cfg.seed, "random_search"), objective)
        except Exception as exc:  # noqa: BLE001
            out.error = f"{type(exc).__name__}: {exc}"
        out.wallclock["random"] = time.perf_counter() - t1
        out.trace = trace_from_objective(objective)
    else:
        out = run_gtbo(cfg, with_bo=cfg.mode == "full")

    files = ["trace.csv"]
    artifacts.write_trace(out_dir / "trace.csv", out.trace.rows, cfg.seed)
    if out.gt is not None:
        artifacts.write_marginals(out_dir / "marginals.csv", out.gt.marginals_history, cfg.seed)
        artifacts.write_active_count(out_dir / "active_count.csv", out.gt.active_counts(), cfg.seed)
        files += ["marginals.csv", "active_count.csv"]
    files.append("summary.json")
    out.wallclock["total"] = time.perf_counter() - t0
    summary = _summary(cfg, out, files)
    artifacts.write_json(out_dir / "summary.json", summary)
    return summary
