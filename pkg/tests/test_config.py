"""Config merging: defaults, file layer, --set overrides, flag precedence."""

import json

import pytest

from metriclab.config import DEFAULTS, load_run_config, parse_override
from metriclab.errors import ConfigError, IoError


def test_defaults_load_standalone():
    cfg = load_run_config()
    assert cfg.seed == 0
    assert cfg.train.base == "softmax"
    assert cfg.train.P == 8 and cfg.train.Q == 8
    assert cfg.dsam.m_neg == pytest.approx(0.9)
    assert cfg.synthetic_spec.n_classes == 8
    assert cfg.queries_per_class == 20


def test_defaults_dict_untouched_by_loading():
    before = json.dumps(DEFAULTS, sort_keys=True)
    load_run_config(overrides=["train.epochs=3", "dsam.gamma=2.0"])
    assert json.dumps(DEFAULTS, sort_keys=True) == before


def test_parse_override_types():
    assert parse_override("train.epochs=3") == {"train": {"epochs": 3}}
    assert parse_override("dsam.lam=0.5") == {"dsam": {"lam": 0.5}}
    assert parse_override("train.base=softmax") == {"train": {"base": "softmax"}}
    assert parse_override("train.use_dsam=true") == {"train": {"use_dsam": True}}
    assert parse_override("train.hidden=[64,32]") == {"train": {"hidden": [64, 32]}}
    assert parse_override("seed=9") == {"seed": 9}


@pytest.mark.parametrize("bad", ["no_equals", ".x=1", "a..b=1", "=3"])
def test_parse_override_malformed(bad):
    with pytest.raises(ConfigError):
        parse_override(bad)


def test_file_layer_overrides_defaults(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"train": {"epochs": 5, "base": "angular-margin"}}))
    cfg = load_run_config(path=p)
    assert cfg.train.epochs == 5
    assert cfg.train.base == "angular-margin"
    assert cfg.train.P == 8  # untouched default survives


def test_set_overrides_beat_file(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"train": {"epochs": 5}}))
    cfg = load_run_config(path=p, overrides=["train.epochs=2"])
    assert cfg.train.epochs == 2


def test_flags_beat_everything(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"seed": 5, "out_dir": "from_file"}))
    cfg = load_run_config(
        path=p, overrides=["seed=6"], seed=7, out_dir="from_flag"
    )
    assert cfg.seed == 7
    assert cfg.out_dir == "from_flag"


def test_seed_threads_into_spec_and_train():
    cfg = load_run_config(seed=13)
    assert cfg.synthetic_spec.seed == 13
    assert cfg.train.seed == 13


def test_unknown_key_rejected(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"train": {"learning_rate": 0.1}}))
    with pytest.raises(ConfigError):
        load_run_config(path=p)
    with pytest.raises(ConfigError):
        load_run_config(overrides=["optimizer.name=adam"])


def test_invalid_value_surfaces_as_config_error():
    with pytest.raises(ConfigError):
        load_run_config(overrides=["train.lr=0"])
    with pytest.raises(ConfigError):
        load_run_config(overrides=["dsam.m_neg=0"])
    with pytest.raises(ConfigError):
        load_run_config(overrides=["train.base=adam"])


def test_missing_config_file(tmp_path):
    with pytest.raises(IoError):
        load_run_config(path=tmp_path / "absent.json")


def test_non_object_config_rejected(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text("[1, 2, 3]")
    with pytest.raises(ConfigError):
        load_run_config(path=p)


def test_invalid_json_config_rejected(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text("{broken")
    with pytest.raises(ConfigError):
        load_run_config(path=p)


def test_run_config_dump_roundtrip(tmp_path):
    cfg = load_run_config(overrides=["train.epochs=4"])
    out = tmp_path / "resolved.json"
    cfg.dump_json(out)
    cfg2 = load_run_config(path=out)
    assert cfg2.raw == cfg.raw
