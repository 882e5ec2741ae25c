import dataclasses

import pytest

from gtbo.config import RunConfig, build, load_config, parse_value, to_dict
from gtbo.errors import ConfigError
from gtbo.gp import LengthscalePrior


def _write(tmp_path, text):
    p = tmp_path / "c.toml"
    p.write_text(text)
    return p


def test_defaults_without_file():
    cfg = load_config()
    assert cfg == RunConfig()
    assert cfg.gt.particles == 10000 and cfg.gt.max_tests == 300
    assert cfg.gt.c_lower == 5e-3 and cfg.gt.c_upper == 0.9


def test_precedence(tmp_path):
    p = _write(tmp_path, "seed = 1\n[gt]\nparticles = 111\nmax_tests = 7\n[bo]\nbudget = 3\n")
    cfg = load_config(p)
    assert (cfg.seed, cfg.gt.particles, cfg.gt.max_tests, cfg.bo.budget) == (1, 111, 7, 3)
    cfg = load_config(p, preset="desk")
    assert (cfg.gt.particles, cfg.gt.max_tests, cfg.bo.budget, cfg.benchmark.ambient_dim) == (2000, 150, 100, 100)
    cfg = load_config(p, ["gt.particles=55", "seed=4"], preset="desk", seed=9)
    assert cfg.gt.particles == 55 and cfg.seed == 9


def test_field_path_errors(tmp_path):
    with pytest.raises(ConfigError) as e:
        load_config(_write(tmp_path, "[gt]\nparticles = 'lots'\n"))
    assert e.value.path == "gt.particles"
    with pytest.raises(ConfigError) as e:
        load_config(None, ["gt.selection.bogus=1"])
    assert e.value.path == "gt.selection.bogus"
    with pytest.raises(ConfigError) as e:
        load_config(None, ["gt.c_lower=0.99"])
    assert str(e.value).startswith("gt.c_lower")
    with pytest.raises(ConfigError) as e:
        load_config(None, ["benchmark.name='rosenbrock'"])
    assert e.value.path == "benchmark.name"
    with pytest.raises(ConfigError) as e:
        load_config(None, ["mode='sweep'", "sweep.axis='active_dim_count'", "benchmark.name='branin2'"])
    assert e.value.path == "sweep.axis"


def test_bad_toml(tmp_path):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, "[gt\n"))


def test_profile_expands_priors():
    cfg = load_config(None, ["bo.profile='real_world'"])
    assert cfg.bo.inactive_prior == LengthscalePrior(3.0, 1.0)
    cfg = load_config(None, ["bo.inactive_prior=[5.0, 0.5]"])
    assert cfg.bo.inactive_prior == LengthscalePrior(5.0, 0.5)


def test_parse_value():
    assert parse_value("3") == 3
    assert parse_value("0.5") == 0.5
    assert parse_value("true") is True
    assert parse_value("[1, 2]") == [1, 2]
    assert parse_value("levy4") == "levy4"


def test_to_dict_round_trip():
    cfg = load_config(None, ["gt.particles=77", "benchmark.noise_std=0.3"])
    assert build(RunConfig, to_dict(cfg)) == cfg
    d = to_dict(cfg)
    assert d["gt"]["smc"]["ess_threshold_fraction"] == 0.5
    assert d["gt"]["selection"]["mc_samples"] == 512


def test_frozen():
    with pytest.raises(dataclasses.FrozenInstanceError):
        RunConfig().seed = 3
