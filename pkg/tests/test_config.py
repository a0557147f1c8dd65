"""Config schema validation, default merging, and resolved-config round-trips."""

import pytest
import yaml

from gsm_degroot.config import (
    CONFIG_VERSION,
    DEFAULTS,
    ConfigError,
    dump_config,
    load_config,
    validate_config,
)


def write_yaml(tmp_path, payload, name="run.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(payload) if isinstance(payload, dict) else payload)
    return path


def test_empty_config_resolves_to_defaults(tmp_path):
    config = load_config(write_yaml(tmp_path, "{}\n"))
    assert config == DEFAULTS
    assert config is not DEFAULTS  # caller owns a private copy
    assert config["version"] == CONFIG_VERSION


def test_partial_override_keeps_sibling_defaults(tmp_path):
    config = load_config(write_yaml(tmp_path, {"graph": {"n": 30}, "seed": 9}))
    assert config["graph"]["n"] == 30
    assert config["graph"]["family"] == DEFAULTS["graph"]["family"]
    assert config["seed"] == 9
    assert config["params"] == DEFAULTS["params"]


def test_mutating_a_resolved_config_leaves_defaults_alone(tmp_path):
    config = load_config(write_yaml(tmp_path, {"graph": {"n": 30}}))
    config["graph"]["cluster_ratios"][0] = 0.0
    assert DEFAULTS["graph"]["cluster_ratios"] == [0.7, 0.3]


def test_schema_violation_names_the_field_path(tmp_path):
    with pytest.raises(ConfigError, match="config field params.lambda"):
        load_config(write_yaml(tmp_path, {"params": {"lambda": -1.0}}))


def test_nested_schema_violation_path(tmp_path):
    payload = {"fit": {"surrogate": {"n": 1}}}
    with pytest.raises(ConfigError, match="config field fit.surrogate.n"):
        load_config(write_yaml(tmp_path, payload))


def test_unknown_key_rejected(tmp_path):
    with pytest.raises(ConfigError, match="bogus"):
        load_config(write_yaml(tmp_path, {"bogus": 1}))


def test_unknown_surrogate_mode_rejected(tmp_path):
    with pytest.raises(ConfigError, match="fit.mode"):
        load_config(write_yaml(tmp_path, {"fit": {"mode": "average"}}))


def test_invalid_yaml_rejected(tmp_path):
    with pytest.raises(ConfigError, match="not valid yaml"):
        load_config(write_yaml(tmp_path, "graph: [unclosed\n"))


def test_non_mapping_root_rejected(tmp_path):
    with pytest.raises(ConfigError, match="root must be a mapping"):
        load_config(write_yaml(tmp_path, "- 1\n- 2\n"))


def test_validate_accepts_resolved_defaults():
    validate_config(DEFAULTS)


def test_sweep_axis_shape_is_checked(tmp_path):
    payload = {"sweep": {"axes": [{"name": "gamma", "lo": 0.0, "hi": 1.0}]}}
    with pytest.raises(ConfigError, match="sweep.axes.0"):
        load_config(write_yaml(tmp_path, payload))


def test_resolved_config_roundtrips(tmp_path):
    config = load_config(write_yaml(tmp_path, {"graph": {"n": 30}, "horizon": 50}))
    out = tmp_path / "resolved.yaml"
    dump_config(config, out)
    assert load_config(out) == config


def test_dump_is_deterministic(tmp_path):
    config = load_config(write_yaml(tmp_path, {"seed": 3}))
    first = tmp_path / "a.yaml"
    second = tmp_path / "b.yaml"
    dump_config(config, first)
    dump_config(config, second)
    assert first.read_bytes() == second.read_bytes()
