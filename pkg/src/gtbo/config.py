"""Run configuration: TOML file, presets and dotted ``key=value`` overrides."""

from __future__ import annotations

import copy
import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .bo import PROFILES, BoConfig
from .errors import ConfigError
from .gp import LengthscalePrior
from .group_testing import GtConfig
from .selection import SelectionConfig
from .smc import SmcConfig
from .testbed import FUNCTIONS, BenchmarkSpec

MODES = ("full", "gt_only", "random_search", "sweep")
SWEEP_AXES = ("noise_std", "ambient_dim", "active_dim_count")

PRESETS = {
    "desk": {
        "benchmark": {"ambient_dim": 100},
        "gt": {"particles": 2000, "max_tests": 150},
        "bo": {"budget": 100},
    },
}


@dataclass(frozen=True)
class BenchmarkConfig:
    name: str = "levy4"
    ambient_dim: int = 100
    n_active: Optional[int] = None
    noise_std: Optional[float] = None
    randomize_active: bool = False

    def spec(self, rng=None) -> BenchmarkSpec:
        from .testbed import with_random_placement

        s = BenchmarkSpec(self.name, self.ambient_dim, noise_std=self.noise_std, n_active=self.n_active)
        if self.randomize_active:
            if rng is None:
                raise ValueError("randomized placement needs an rng")
            s = with_random_placement(s, rng)
        return s


@dataclass(frozen=True)
class SweepConfig:
    axis: str = "noise_std"
    values: list = field(default_factory=lambda: [0.1, 1.0])
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])


@dataclass(frozen=True)
class RunConfig:
    benchmark: BenchmarkConfig = field(default_factory=BenchmarkConfig)
    gt: GtConfig = field(default_factory=GtConfig)
    bo: BoConfig = field(default_factory=BoConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    seed: int = 0
    output_dir: str = "gtbo-out"
    mode: str = "full"
    random_search_budget: Optional[int] = None  # None: bo.budget


def _coerce(tp, value, path: str):
    origin = typing.get_origin(tp)
    if origin is Union:
        args = typing.get_args(tp)
        if value is None and type(None) in args:
            return None
        errors = []
        for arg in args:
            if arg is type(None):
                continue
            try:
                return _coerce(arg, value, path)
            except ConfigError as exc:
                errors.append(str(exc))
        raise ConfigError(path, f"invalid value {value!r}")
    if dataclasses.is_dataclass(tp):
        if isinstance(value, tp):
            return value
        if tp is LengthscalePrior and isinstance(value, (list, tuple)) and len(value) == 2:
            value = {"mu": value[0], "sigma": value[1]}
        if not isinstance(value, dict):
            raise ConfigError(path, f"expected a table, got {value!r}")
        return build(tp, value, path)
    if tp is bool:
        if isinstance(value, bool):
            return value
        raise ConfigError(path, f"expected true/false, got {value!r}")
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return int(value)
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    if tp is list or origin is list:
        if not isinstance(value, list):
            raise ConfigError(path, f"expected a list, got {value!r}")
        return list(value)
    return value


def build(cls, data: dict, path: str = ""):
    """Instantiate dataclass ``cls`` from a plain dict, reporting field paths."""
    data = dict(data)
    if cls is BoConfig and "profile" in data:
        profile = data.pop("profile")
        if profile not in PROFILES:
            raise ConfigError(_join(path, "profile"), f"choose from {sorted(PROFILES)}")
        active, inactive = PROFILES[profile]
        data.setdefault("active_prior", {"mu": active.mu, "sigma": active.sigma})
        data.setdefault("inactive_prior", {"mu": inactive.mu, "sigma": inactive.sigma})
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls) if f.init and not f.name.startswith("_")}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(_join(path, unknown[0]), "unknown key")
    kwargs = {k: _coerce(hints[k], v, _join(path, k)) for k, v in data.items()}
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        raise ConfigError(_join(path, exc.path.split(".")[-1]) if path else exc.path, str(exc).split(": ", 1)[-1])
    except (TypeError, ValueError) as exc:
        raise ConfigError(path or cls.__name__, str(exc))


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def parse_value(raw: str) -> Any:
    try:
        return tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        return raw


def set_dotted(data: dict, key: str, value) -> None:
    parts = key.split(".")
    node = data
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(key, "cannot set a key below a scalar")
    node[parts[-1]] = value


def deep_merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate(cfg: RunConfig) -> RunConfig:
    if cfg.mode not in MODES:
        raise ConfigError("mode", f"choose from {list(MODES)}")
    b = cfg.benchmark
    if b.name not in FUNCTIONS:
        raise ConfigError("benchmark.name", f"choose from {sorted(FUNCTIONS)}")
    try:
        BenchmarkSpec(b.name, b.ambient_dim, noise_std=b.noise_std, n_active=b.n_active)
    except ValueError as exc:
        raise ConfigError("benchmark", str(exc))
    if b.ambient_dim < 4:
        raise ConfigError("benchmark.ambient_dim", "must be >= 4 for the variance probe")
    if cfg.random_search_budget is not None and cfg.random_search_budget < 1:
        raise ConfigError("random_search_budget", "must be >= 1")
    if cfg.mode == "random_search" and cfg.random_search_budget is None and cfg.bo.budget < 1:
        raise ConfigError("bo.budget", "random search needs a positive budget")
    if cfg.mode == "sweep":
        if cfg.sweep.axis not in SWEEP_AXES:
            raise ConfigError("sweep.axis", f"choose from {list(SWEEP_AXES)}")
        if cfg.sweep.axis == "active_dim_count" and b.name not in ("levy", "levy4"):
            raise ConfigError("sweep.axis", "active_dim_count needs the levy benchmark")
        if not cfg.sweep.values or not cfg.sweep.seeds:
            raise ConfigError("sweep.values", "need at least one value and one seed")
    return cfg


def load_config(
    path=None,
    overrides=(),
    preset: Optional[str] = None,
    **cli,
) -> RunConfig:
    """Resolve defaults < file < preset < ``--set`` overrides < CLI flags."""
    data: dict = {}
    if path is not None:
        try:
            with open(Path(path), "rb") as fh:
                data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError("", f"cannot parse {path}: {exc}")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError("preset", f"choose from {sorted(PRESETS)}")
        data = deep_merge(data, PRESETS[preset])
    for item in overrides:
        if "=" not in item:
            raise ConfigError(item, "override must look like key=value")
        key, raw = item.split("=", 1)
        set_dotted(data, key.strip(), parse_value(raw.strip()))
    for key, value in cli.items():
        if value is not None:
            data[key] = value
    return validate(build(RunConfig, data))


def to_dict(cfg) -> dict:
    """Plain-dict echo of a fully resolved configuration."""
    return dataclasses.asdict(cfg)
