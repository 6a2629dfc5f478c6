"""Tests for experiment config files."""

import json
from pathlib import Path

import pytest

from pathedit.config.experiment import config_from_dict, load_config
from pathedit.core.errors import ConfigError


def write_config(tmp_path, data):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data))
    return path


def test_packaged_default():
    config = load_config()
    assert config.schedule.kind == "cosine"
    assert config.schedule.horizon == 1000
    assert config.grid.n_steps == 12
    assert (config.reg.form, config.reg.strength, config.reg.active_steps) == ("simplified", 1.0, 6)
    assert config.benchmark.n_instances == 200
    assert config.output_dir == Path("runs")


def test_empty_config_uses_defaults():
    assert config_from_dict({}).to_dict() == load_config().to_dict()


def test_overrides(tmp_path):
    path = write_config(tmp_path, {"seed": 4, "output_dir": "a"})
    config = load_config(path, seed=9, out=tmp_path / "b")
    assert config.seed == 9
    assert config.output_dir == tmp_path / "b"


def test_horizon_key():
    config = config_from_dict({"schedule": {"kind": "scaled_linear", "T": 500}})
    assert config.schedule.horizon == 500
    assert config.to_dict()["schedule"]["T"] == 500


def test_input_is_not_modified():
    data = {"schedule": {"T": 500}}
    config_from_dict(data)
    assert data == {"schedule": {"T": 500}}


@pytest.mark.parametrize("data", [
    {"color": "red"},
    {"reg": {"strenght": 0.5}},
    {"grid": []},
    {"reg": {"strength": 2.0}},
    {"reg": {"active_steps": 20}},
    {"seed": -3},
    {"workers": 0},
    {"workers": "2"},
    {"workers": 1.5},
    {"workers": True},
    {"metrics": {"dynamic_range": 0.0}},
    {"sweep": {"active_steps": [0, 13]}},
    {"sweep": {"strength": [1.5]}},
    {"grid": {"spacing": "log"}},
    {"schedule": {"kind": "linear"}},
])
def test_invalid_configs(data):
    with pytest.raises(ConfigError):
        config_from_dict(data)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")


def test_invalid_json(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("[1, 2")
    with pytest.raises(ConfigError):
        load_config(path)


def test_config_must_be_an_object(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write_config(tmp_path, [1, 2]))


def test_unknown_distribution_in_registry():
    config = config_from_dict({"benchmark": {"tar_distribution": "nowhere"}})
    with pytest.raises(ConfigError):
        config.load_registry()


def test_custom_registry_is_relative_to_the_config(tmp_path):
    (tmp_path / "dists.json").write_text(json.dumps({"distributions": [
        {"name": "left", "kind": "gmm", "means": [[-1.0]], "sigma": 1.0},
        {"name": "right", "kind": "gmm", "means": [[1.0]], "sigma": 1.0},
    ]}))
    path = write_config(tmp_path, {
        "model": {"registry": "dists.json"},
        "benchmark": {"src_distribution": "left", "tar_distribution": "right"},
    })
    registry = load_config(path).load_registry()
    assert set(registry.names) == {"left", "right"}


def test_edit_config_carries_uncond():
    config = config_from_dict({"guidance": {"uncond": "anything", "tar_scale": 3.0}})
    edit = config.edit_config(seed=5)
    assert edit.guidance.uncond.distribution_ref == "anything"
    assert edit.guidance.tar_scale == 3.0
    assert edit.seed == 5
    assert len(edit.grid) == 12
