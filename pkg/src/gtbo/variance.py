"""Noise and signal variance from binned probes around the default point."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .model import NoiseModel, make_perturbed_point

log = logging.getLogger(__name__)

VAR_FLOOR = 1e-12
REL_FLOOR = 1e-6


@dataclass(frozen=True)
class ProbeObservation:
    bin: int
    point: np.ndarray
    y: float


@dataclass
class VarianceProbeResult:
    noise_var: float
    signal_var: float
    default_estimate: float
    default_values: list = field(default_factory=list)
    probe_observations: list = field(default_factory=list)
    bins: list = field(default_factory=list)

    @property
    def noise_model(self) -> NoiseModel:
        return NoiseModel(self.noise_var, self.signal_var)

    @property
    def n_evaluations(self) -> int:
        return len(self.default_values) + len(self.probe_observations)


def n_bins(dim: int) -> int:
    return 3 * math.isqrt(dim)


def estimate_default(f: Callable, x_def, n_def: int, rng=None, values: list = None) -> float:
    """Mean of ``n_def`` noisy evaluations at the default point."""
    if n_def < 2:
        raise ValueError("n_def must be at least 2")
    ys = [float(f(np.asarray(x_def, dtype=float).copy())) for _ in range(n_def)]
    if values is not None:
        values.extend(ys)
    return float(np.mean(ys))


@lru_cache(maxsize=None)
def null_bias(n: int, k: int, reps: int = 20000) -> tuple[float, float]:
    """Expected sample variances of the split statistics under pure noise.

    For n unit-variance Gaussian differences, sorted by distance from their
    median: the mean sample variance of the k closest and of the n - k
    farthest. Deterministic (fixed internal seed).
    """
    rng = np.random.default_rng(20240917)
    d = rng.standard_normal((reps, n))
    s = _sorted_by_spread(d)
    return float(s[:, :k].var(axis=1, ddof=1).mean()), float(s[:, k:].var(axis=1, ddof=1).mean())


def _sorted_by_spread(d: np.ndarray) -> np.ndarray:
    c = d - np.median(d, axis=-1, keepdims=True)
    # stable sort: ties keep bin order
    order = np.argsort(np.abs(c), axis=-1, kind="stable")
    return np.take_along_axis(d, order, axis=-1)


def split_variances(diffs, dim: int, calibrate: bool = True) -> tuple[float, float]:
    """Noise/signal variance from the probe differences (before flooring).

    With ``calibrate`` the differences are ranked by distance from their
    median and both split variances are divided by their pure-noise bias,
    so a function with no active dimension yields unbiased estimates of the
    noise variance from either split. Without it, the ranking is by
    magnitude and the raw split variances are returned.
    """
    r = math.isqrt(dim)
    d = np.asarray(diffs, dtype=float)
    if d.size != 3 * r or r < 1:
        raise ValueError(f"expected {3 * r} differences, got {d.size}")
    if calibrate:
        s = _sorted_by_spread(d)
        lo_bias, hi_bias = null_bias(d.size, 2 * r)
    else:
        s = d[np.argsort(np.abs(d), kind="stable")]
        lo_bias = hi_bias = 1.0
    return s[: 2 * r].var(ddof=1) / lo_bias, s[2 * r :].var(ddof=1) / hi_bias


def order_and_floor(noise_var: float, signal_var: float) -> tuple[float, float]:
    lo, hi = sorted((float(noise_var), float(signal_var)))
    hi = max(hi, VAR_FLOOR)
    lo = max(lo, VAR_FLOOR, REL_FLOOR * hi)
    return lo, hi


def estimate_variances(
    f: Callable,
    x_def,
    dim: int,
    rng: np.random.Generator,
    n_def: int = 5,
    calibrate: bool = True,
) -> VarianceProbeResult:
    """Probe 3*floor(sqrt(D)) random bins of dimensions around ``x_def``.

    Uses ``n_def + 3*floor(sqrt(D))`` evaluations. Dimensions are assigned
    to near-equal bins at random; when D < 3*floor(sqrt(D)) some bins are
    empty and their probe is a repeat of the default point.
    """
    if dim < 4:
        raise ValueError("variance estimation needs D >= 4")
    x_def = np.asarray(x_def, dtype=float)
    defaults: list = []
    f_def = estimate_default(f, x_def, n_def, rng, values=defaults)

    bins = [b for b in np.array_split(rng.permutation(dim), n_bins(dim))]
    probes = []
    for j, b in enumerate(bins):
        g = np.zeros(dim, dtype=bool)
        g[b] = True
        x = make_perturbed_point(g, x_def, rng, allow_empty=True)
        probes.append(ProbeObservation(j, x, float(f(x))))

    diffs = [p.y - f_def for p in probes]
    nv, sv = order_and_floor(*split_variances(diffs, dim, calibrate))
    log.debug("variance probe: noise %.4g signal %.4g", nv, sv)
    return VarianceProbeResult(nv, sv, f_def, defaults, probes, [np.sort(b) for b in bins])
