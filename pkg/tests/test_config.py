import pytest
import yaml

from contactseq import config as cm
from contactseq.stages import ConfigError


def test_defaults_are_valid_and_hash_stable():
    a, b = cm.RunConfig(), cm.RunConfig()
    assert a.hash() == b.hash()
    assert a.with_overrides({"ppo.seed": 1}).hash() != a.hash()


def test_round_trip_through_yaml(tmp_path):
    cfg = cm.RunConfig().with_overrides({"reward.w_curi": 5.0, "env.options": {"tolerance": 0.3}, "seeds": [7, 8]})
    cm.dump_config(cfg, tmp_path / "c.yaml")
    again = cm.load_config(tmp_path / "c.yaml")
    assert again == cfg
    assert again.seeds == (7, 8)


def test_unknown_key_rejected(tmp_path):
    (tmp_path / "c.yaml").write_text("ppo:\n  learning_rate: 1\n")
    with pytest.raises(ConfigError):
        cm.load_config(tmp_path / "c.yaml")
    with pytest.raises(ConfigError):
        cm.RunConfig().with_overrides({"ppo.lr_typo": 1})


def test_open_sections_accept_new_keys():
    cfg = cm.RunConfig().with_overrides({"reward.reg_weights.action_rate": -2.5, "env.options.tolerance": 0.3})
    assert cfg.reward.reg_weights == {"action_rate": -2.5}
    assert cfg.env.options == {"tolerance": 0.3}


@pytest.mark.parametrize("key,value", [("mode", "half"), ("env.name", "walker"), ("curiosity.method", 4), ("ppo.gamma", 0)])
def test_invalid_values_rejected(key, value):
    with pytest.raises(ConfigError):
        cm.RunConfig().with_overrides({key: value})


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError):
        cm.load_config(tmp_path / "nope.yaml")
    (tmp_path / "bad.yaml").write_text("a: [1, 2\n")
    with pytest.raises(ConfigError):
        cm.load_config(tmp_path / "bad.yaml")


def test_relative_plan_file_resolves_against_config(tmp_path):
    (tmp_path / "sub").mkdir()
    (tmp_path / "sub" / "c.yaml").write_text(yaml.safe_dump({"env": {"plan_file": "plan.yaml"}}))
    cfg = cm.load_config(tmp_path / "sub" / "c.yaml")
    assert cfg.env.plan_file == str((tmp_path / "sub" / "plan.yaml").resolve())


@pytest.mark.parametrize(
    "text,expected",
    [("a.b=3", ("a.b", 3)), ("x=0.5", ("x", 0.5)), ("m=zero-one", ("m", "zero-one")), ("l=[1, 2]", ("l", [1, 2]))],
)
def test_parse_override(text, expected):
    assert cm.parse_override(text) == expected


def test_parse_override_needs_equals():
    with pytest.raises(ConfigError):
        cm.parse_override("novalue")


def test_shipped_configs_load():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "configs"
    files = sorted(root.glob("*.yaml"))
    assert files
    for f in files:
        cm.load_config(f)
