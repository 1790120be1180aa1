"""Scenario files: defaults, validation errors, canonical round trip and hashing."""

import math
from pathlib import Path

import pytest

from gyroscale.config import ConfigError, dumps, load_config, loads

from conftest import SCENARIOS

MINIMAL = """
[fields]
family = "zero"

[f0]
family = "isotropic_gaussian"
"""


def test_minimal_file_gets_documented_defaults():
    cfg = loads(MINIMAL)
    assert cfg.T == 0.5
    assert cfg.sampling.n_tau == 64
    assert cfg.sampling.cloud_size == 2**14
    assert cfg.seed == 42
    assert cfg.epsilon_list == (0.2, 0.1, 0.05, 0.025)


def test_epsilon_list_must_decrease():
    with pytest.raises(ConfigError) as info:
        loads(MINIMAL + "[scenario]\nepsilon_list = [0.1, 0.2]\n")
    assert info.value.key == "scenario.epsilon_list"
    assert "epsilon_list" in str(info.value)


@pytest.mark.parametrize("extra, key", [
    ("[scenario]\nepsilon_list = [0.1, -0.2]\n", "scenario.epsilon_list"),
    ("[scenario]\nT = 0.0\n", "scenario.T"),
    ("[scenario]\nbogus = 1\n", "scenario.bogus"),
    ("[sampling]\ncloud_size = 1000\n", "sampling.cloud_size"),
    ("[sampling]\nn_sigma = 6\n", "sampling.n_sigma"),
    ("[sampling]\ncloud = \"random\"\n", "sampling.cloud"),
    ("[sampling]\nn_tau = 3.5\n", "sampling.n_tau"),
    ("[residual]\nt0_frac = 0.0\n", "residual.t0_frac"),
    ("[residual]\ndeltas = [0.1, 0.01]\n", "residual.deltas"),
    ("[nowhere]\nx = 1\n", "nowhere"),
])
def test_validation_names_the_key(extra, key):
    with pytest.raises(ConfigError) as info:
        loads(MINIMAL + extra)
    assert info.value.key == key


def test_family_errors():
    with pytest.raises(ConfigError) as info:
        loads('[fields]\nfamily = "dipole"\n[f0]\nfamily = "isotropic_gaussian"\n')
    assert info.value.key == "fields.family"
    with pytest.raises(ConfigError) as info:
        loads('[f0]\nfamily = "isotropic_gaussian"\n')
    assert info.value.key == "fields.family"
    with pytest.raises(ConfigError) as info:
        loads(MINIMAL.replace('"zero"', '"parallel_uniform"\nE = [0.3, 0.1, 0.0]'))
    assert info.value.key == "fields"


def test_parse_error_reports_line_number():
    text = MINIMAL + "\n[scenario]\nT = = 3\n"
    with pytest.raises(ConfigError) as info:
        loads(text)
    assert info.value.line == text.splitlines().index("T = = 3") + 1


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        load_config("no/such/scenario.toml")


@pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.toml")), ids=lambda p: p.stem)
def test_shipped_scenarios_round_trip(path):
    cfg = load_config(path)
    again = loads(dumps(cfg))
    assert again == cfg
    assert dumps(again) == dumps(cfg)
    assert again.config_hash() == cfg.config_hash()


def test_infinite_width_round_trips():
    cfg = loads(MINIMAL.replace('"isotropic_gaussian"', '"isotropic_gaussian"\nsigma_x_perp = inf'))
    assert math.isinf(cfg.f0.sigma_x_perp)
    assert loads(dumps(cfg)) == cfg


def test_hash_ignores_output_dir_but_not_content():
    cfg = loads(MINIMAL)
    assert cfg.with_overrides(output_dir="elsewhere").config_hash() == cfg.config_hash()
    assert cfg.with_overrides(seed=7).config_hash() != cfg.config_hash()
    assert len(cfg.config_hash()) == 16


def test_load_from_disk(tmp_path: Path):
    p = tmp_path / "s.toml"
    p.write_text(MINIMAL, encoding="utf-8")
    assert load_config(p) == loads(MINIMAL)
