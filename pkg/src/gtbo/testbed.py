"""Synthetic benchmarks embedded in a high-dimensional unit box.

Each benchmark evaluates a classic low-dimensional test function on a
handful of designated coordinates; every other coordinate is a dummy with
exactly zero effect. Observations carry additive Gaussian noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError

BRANIN_MIN = 0.397887357729738
HARTMANN6_MIN = -3.322368011415515
HARTMANN6_ARGMIN = np.array([0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573])

_H6_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
_H6_A = np.array(
    [
        [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
        [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
        [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
        [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
    ]
)
_H6_P = 1e-4 * np.array(
    [
        [1312, 1696, 5569, 124, 8283, 5886],
        [2329, 4135, 8307, 3736, 1004, 9991],
        [2348, 1451, 3522, 2883, 3047, 6650],
        [4047, 8828, 8732, 5743, 1091, 381],
    ]
)


def branin(x: np.ndarray) -> float:
    x1, x2 = x
    b = 5.1 / (4 * np.pi**2)
    c = 5 / np.pi
    t = 1 / (8 * np.pi)
    return float((x2 - b * x1**2 + c * x1 - 6) ** 2 + 10 * (1 - t) * np.cos(x1) + 10)


def levy(x: np.ndarray) -> float:
    w = 1 + (np.asarray(x, dtype=float) - 1) / 4
    head = np.sin(np.pi * w[0]) ** 2
    mid = np.sum((w[:-1] - 1) ** 2 * (1 + 10 * np.sin(np.pi * w[:-1] + 1) ** 2))
    tail = (w[-1] - 1) ** 2 * (1 + np.sin(2 * np.pi * w[-1]) ** 2)
    return float(head + mid + tail)


def hartmann6(x: np.ndarray) -> float:
    inner = np.sum(_H6_A * (np.asarray(x, dtype=float) - _H6_P) ** 2, axis=1)
    return float(-np.sum(_H6_ALPHA * np.exp(-inner)))


def griewank(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    i = np.arange(1, x.size + 1)
    return float(np.sum(x**2) / 4000 - np.prod(np.cos(x / np.sqrt(i))) + 1)


@dataclass(frozen=True)
class _Function:
    fn: object
    dim: Optional[int]  # None: any dimensionality (levy)
    lower: tuple
    upper: tuple
    minimum: float
    noise_std: float


FUNCTIONS = {
    "branin2": _Function(branin, 2, (-5.0, 0.0), (10.0, 15.0), BRANIN_MIN, 0.5),
    "levy4": _Function(levy, 4, (-10.0,), (10.0,), 0.0, 0.1),
    "levy": _Function(levy, None, (-10.0,), (10.0,), 0.0, 0.1),
    "hartmann6": _Function(hartmann6, 6, (0.0,), (1.0,), HARTMANN6_MIN, 0.01),
    "griewank8": _Function(griewank, 8, (-600.0,), (600.0,), 0.0, 0.5),
}


@dataclass(frozen=True)
class BenchmarkSpec:
    """A named test function hidden inside ``ambient_dim`` coordinates.

    ``n_active`` is only consulted for the variable-size ``levy`` function.
    ``active_dims`` defaults to the leading indices; ``noise_std`` defaults
    to the per-function value used for the noisy synthetic experiments.
    """

    name: str
    ambient_dim: int
    active_dims: tuple = None
    noise_std: float = None
    default_point: np.ndarray = field(default=None, compare=False)
    n_active: int = None

    def __post_init__(self):
        if self.name not in FUNCTIONS:
            raise ValueError(f"unknown benchmark {self.name!r}; choose from {sorted(FUNCTIONS)}")
        fn = FUNCTIONS[self.name]
        d_e = fn.dim if fn.dim is not None else self.n_active
        if d_e is None or d_e < 1:
            raise ValueError("levy needs n_active >= 1")
        if self.ambient_dim < d_e:
            raise ValueError(f"ambient_dim {self.ambient_dim} < intrinsic dim {d_e}")
        active = tuple(range(d_e)) if self.active_dims is None else tuple(int(i) for i in self.active_dims)
        if len(active) != d_e or len(set(active)) != d_e:
            raise ValueError(f"need {d_e} distinct active dims, got {active}")
        if min(active) < 0 or max(active) >= self.ambient_dim:
            raise ValueError("active dims out of bounds")
        object.__setattr__(self, "active_dims", active)
        object.__setattr__(self, "n_active", d_e)
        if self.noise_std is None:
            object.__setattr__(self, "noise_std", fn.noise_std)
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        if self.default_point is None:
            x_def = np.full(self.ambient_dim, 0.5)
            if self.name == "griewank8":
                # the optimum sits at the centre; start testing off-centre
                x_def[list(active)] = 0.75
        else:
            x_def = np.asarray(self.default_point, dtype=float).copy()
            if x_def.shape != (self.ambient_dim,) or np.any(x_def < 0) or np.any(x_def > 1):
                raise ValueError("default_point must lie in [0,1]^D")
        x_def.setflags(write=False)
        object.__setattr__(self, "default_point", x_def)

    @property
    def effective_dim(self) -> int:
        return self.n_active


def with_random_placement(spec: BenchmarkSpec, rng: np.random.Generator) -> BenchmarkSpec:
    """Copy of ``spec`` with the active coordinates drawn at random."""
    dims = tuple(sorted(int(i) for i in rng.choice(spec.ambient_dim, spec.n_active, replace=False)))
    return BenchmarkSpec(
        spec.name, spec.ambient_dim, dims, spec.noise_std, n_active=spec.n_active
    )


def _check_point(spec: BenchmarkSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.ambient_dim,):
        raise DomainError(f"expected a point of shape ({spec.ambient_dim},), got {x.shape}")
    if not np.all((x >= 0) & (x <= 1)):
        raise DomainError("point outside [0,1]^D")
    return x


def true_value(spec: BenchmarkSpec, x) -> float:
    """Noise-free objective value at ``x``."""
    x = _check_point(spec, x)
    fn = FUNCTIONS[spec.name]
    u = x[list(spec.active_dims)]
    d = u.size
    lo = np.resize(np.asarray(fn.lower), d)
    hi = np.resize(np.asarray(fn.upper), d)
    return fn.fn(lo + u * (hi - lo))


def global_minimum(spec: BenchmarkSpec) -> float:
    return FUNCTIONS[spec.name].minimum


@dataclass(frozen=True)
class Observation:
    point: np.ndarray
    noisy_value: float
    true_value: float


def evaluate(spec: BenchmarkSpec, x, rng: np.random.Generator) -> Observation:
    f = true_value(spec, x)
    y = f + spec.noise_std * rng.standard_normal() if spec.noise_std > 0 else f
    return Observation(np.array(x, dtype=float), float(y), f)


class BenchmarkObjective:
    """Noisy black box over a benchmark; remembers every observation.

    Calling it returns only the noisy value. The true values stay in
    ``observations`` for regret reporting, labelled with whatever ``phase``
    was current at the time of the call.
    """

    def __init__(self, spec: BenchmarkSpec, rng: np.random.Generator, phase: str = ""):
        self.spec = spec
        self.rng = rng
        self.phase = phase
        self.observations: list[Observation] = []
        self.phases: list[str] = []

    @property
    def dim(self) -> int:
        return self.spec.ambient_dim

    def __call__(self, x) -> float:
        obs = evaluate(self.spec, x, self.rng)
        self.observations.append(obs)
        self.phases.append(self.phase)
        return obs.noisy_value

    def truth(self, x) -> float:
        return true_value(self.spec, x)
