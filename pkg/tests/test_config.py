import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gietrenorm.config import OUT_ENV, RunConfig, Thresholds
from gietrenorm.errors import ConfigError


def test_defaults_validate():
    cfg = RunConfig()
    assert cfg.acceleration == "zorich" and cfg.precision == "double"
    assert isinstance(cfg.thresholds, Thresholds)


@pytest.mark.parametrize("bad", [
    {"steps": -1}, {"steps": 1.5}, {"acceleration": "warp"}, {"precision": "quad"},
    {"seed": "x"}, {"dps": 5}, {"map": [1, 2]}, {"colour": "red"},
    {"thresholds": {"C_max": 1, "bogus": 2}}, {"thresholds": 3},
])
def test_invalid_configs(bad):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(bad)


def test_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.from_file(tmp_path / "missing.json")
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        RunConfig.from_file(p)


def test_hash_ignores_output_dir():
    a = RunConfig(out="x")
    b = RunConfig(out="y")
    assert a.hash() == b.hash()
    assert a.hash() != RunConfig(steps=31).hash()
    assert len(a.hash()) == 16


def test_replace_skips_none():
    cfg = RunConfig().replace(steps=7, seed=None)
    assert cfg.steps == 7 and cfg.seed == 0


def test_output_dir_precedence(monkeypatch, tmp_path):
    monkeypatch.delenv(OUT_ENV, raising=False)
    assert str(RunConfig().out_dir()) == "gietrenorm-out"
    monkeypatch.setenv(OUT_ENV, str(tmp_path))
    assert RunConfig().out_dir() == tmp_path
    assert str(RunConfig(out="here").out_dir()) == "here"


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**4), st.integers(-10**6, 10**6), st.sampled_from(["double", "extended"]),
       st.sampled_from(["elementary", "zorich", "good-returns"]))
def test_roundtrip_through_json(steps, seed, precision, acc):
    cfg = RunConfig(steps=steps, seed=seed, precision=precision, acceleration=acc)
    back = RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert back == cfg and back.hash() == cfg.hash()
