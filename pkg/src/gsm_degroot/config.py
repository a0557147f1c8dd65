"""Run configuration: versioned schema, defaults, loading, resolution.

A run config is one YAML document validated against SCHEMA. Unset keys take
the defaults below; command-line flags override the seed. The resolved
config (defaults merged in) is written next to every command's outputs so
any run can be reproduced from its own artifacts.
"""

from __future__ import annotations

import copy

import jsonschema
import yaml

CONFIG_VERSION = 1


class ConfigError(ValueError):
    """Missing, malformed, or schema-violating configuration."""


DEFAULTS = {
    "version": CONFIG_VERSION,
    "seed": 0,
    "graph": {
        "family": "barabasi-albert",
        "n": 100,
        "m": 3,
        "k": 6,
        "rewire_prob": 0.1,
        "edge_prob": 0.1,
        "cluster_ratios": [0.7, 0.3],
        "intra_prob": 0.5,
        "inter_prob": 0.1,
        "ensure_self_loops": False,
        "weight_rounds": 10,
    },
    "population": {
        "positive_fraction": 0.5,
        "cluster_positive_fractions": None,
        "stubborn_fraction": 0.0,
        "susceptibility": 1.0,
    },
    "params": {
        "lambda": 1.0,
        "gamma": 0.0,
        "mu": 0.0,
        "sigma": 1.0,
    },
    "horizon": 300,
    "simulate": {
        "mode": "stochastic",
        "write_agents": False,
    },
    "sweep": {
        "axes": [],
        "replicates": 5,
        "statistics": ["D_max", "D_max_inf"],
    },
    "fit": {
        "data": None,
        "label": None,
        "preprocess": {"window": None, "smooth": 1, "fill": "zero"},
        "space": {
            "mu": [-500.0, 500.0, 6],
            "gamma": [0.0, 50.0, 6],
            "r": [0.0, 0.5, 6],
        },
        "pinned": {},
        "with_stubbornness": False,
        "p_max": 0.5,
        "surrogate": {
            "n": 100,
            "cluster_ratios": [0.7, 0.3],
            "cluster_positive_fractions": [0.3, 0.7],
            "intra_prob": 0.5,
            "lambda": 0.01,
            "sigma": 1.0,
        },
        "replicates": 5,
        "mode": "stochastic",
        "noise_weight": 1.0,
        "restarts": 5,
        "anneal_iters": 2000,
        "initial_temp": 10.0,
        "cooling": 0.95,
        "neighborhood_volume": 0.001,
    },
    "identify": {
        "grid": None,
        "q_min": 1e-4,
        "q_max": 1e-2,
        "points": 9,
        "bootstrap": 10,
    },
}

_AXIS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "lo", "hi", "cells"],
    "properties": {
        "name": {"enum": ["mu", "gamma", "r", "beta", "alpha", "network-size", "family-param"]},
        "lo": {"type": "number"},
        "hi": {"type": "number"},
        "cells": {"type": "integer", "minimum": 1},
    },
}

_SPACE_AXIS = {
    "type": "array",
    "minItems": 3,
    "maxItems": 3,
    "prefixItems": [{"type": "number"}, {"type": "number"}, {"type": "integer", "minimum": 2}],
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["version"],
    "properties": {
        "version": {"const": CONFIG_VERSION},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "graph": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "family": {"enum": ["barabasi-albert", "sbm", "watts-strogatz", "erdos-renyi"]},
                "n": {"type": "integer", "minimum": 2},
                "m": {"type": "integer", "minimum": 1},
                "k": {"type": "integer", "minimum": 2},
                "rewire_prob": {"type": "number", "minimum": 0, "maximum": 1},
                "edge_prob": {"type": "number", "minimum": 0, "maximum": 1},
                "cluster_ratios": {
                    "type": "array", "minItems": 2, "maxItems": 2,
                    "items": {"type": "number", "exclusiveMinimum": 0},
                },
                "intra_prob": {"type": "number", "minimum": 0, "maximum": 1},
                "inter_prob": {"type": "number", "minimum": 0, "maximum": 1},
                "ensure_self_loops": {"type": "boolean"},
                "weight_rounds": {"type": "integer", "minimum": 0, "maximum": 40},
            },
        },
        "population": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "positive_fraction": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
                "cluster_positive_fractions": {
                    "type": ["array", "null"], "minItems": 2, "maxItems": 2,
                    "items": {"type": "number", "minimum": 0, "maximum": 1},
                },
                "stubborn_fraction": {"type": "number", "minimum": 0, "maximum": 1},
                "susceptibility": {"type": "number", "minimum": 0, "maximum": 1},
            },
        },
        "params": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lambda": {"type": "number", "exclusiveMinimum": 0},
                "gamma": {"type": "number", "minimum": 0},
                "mu": {"type": "number"},
                "sigma": {"type": "number", "minimum": 0},
            },
        },
        "horizon": {"type": "integer", "minimum": 1},
        "simulate": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["stochastic", "expected"]},
                "write_agents": {"type": "boolean"},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "axes": {"type": "array", "maxItems": 2, "items": _AXIS_SCHEMA},
                "replicates": {"type": "integer", "minimum": 1},
                "statistics": {
                    "type": "array", "minItems": 1,
                    "items": {"enum": ["D_max", "D_max_inf", "X_min_final", "X_max_final", "event_fraction_curve"]},
                },
            },
        },
        "fit": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "data": {"type": ["string", "null"]},
                "label": {"type": ["string", "null"]},
                "preprocess": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "window": {
                            "type": ["array", "null"], "minItems": 2, "maxItems": 2,
                            "items": {"type": ["integer", "string"]},
                        },
                        "smooth": {"type": "integer", "minimum": 1},
                        "fill": {"enum": ["zero", "previous"]},
                    },
                },
                "space": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "mu": _SPACE_AXIS, "gamma": _SPACE_AXIS, "r": _SPACE_AXIS, "p": _SPACE_AXIS,
                    },
                },
                "pinned": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "mu": {"type": "number"}, "gamma": {"type": "number"},
                        "r": {"type": "number"}, "p": {"type": "number"},
                    },
                },
                "with_stubbornness": {"type": "boolean"},
                "p_max": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.5},
                "surrogate": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "n": {"type": "integer", "minimum": 2},
                        "cluster_ratios": {
                            "type": "array", "minItems": 2, "maxItems": 2,
                            "items": {"type": "number", "exclusiveMinimum": 0},
                        },
                        "cluster_positive_fractions": {
                            "type": "array", "minItems": 2, "maxItems": 2,
                            "items": {"type": "number", "minimum": 0, "maximum": 1},
                        },
                        "intra_prob": {"type": "number", "minimum": 0, "maximum": 1},
                        "lambda": {"type": "number", "exclusiveMinimum": 0},
                        "sigma": {"type": "number", "minimum": 0},
                    },
                },
                "replicates": {"type": "integer", "minimum": 1},
                "mode": {"enum": ["stochastic", "expected"]},
                "noise_weight": {"type": "number", "minimum": 0},
                "restarts": {"type": "integer", "minimum": 1},
                "anneal_iters": {"type": "integer", "minimum": 0},
                "initial_temp": {"type": "number", "exclusiveMinimum": 0},
                "cooling": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "neighborhood_volume": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            },
        },
        "identify": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "grid": {"type": ["string", "null"]},
                "q_min": {"type": "number", "exclusiveMinimum": 0},
                "q_max": {"type": "number", "exclusiveMinimum": 0},
                "points": {"type": "integer", "minimum": 1},
                "bootstrap": {"type": "integer", "minimum": 1},
            },
        },
    },
}


def _merge(base, override):
    if isinstance(base, dict) and isinstance(override, dict):
        merged = copy.deepcopy(base)
        for key, value in override.items():
            merged[key] = _merge(base.get(key), value) if key in base else copy.deepcopy(value)
        return merged
    return copy.deepcopy(override)


def load_config(path) -> dict:
    """Read a YAML config, merge in the defaults, and validate the result.

    Validation runs on the resolved document so partial configs never have
    to repeat required fields; unknown keys survive the merge and are still
    rejected by the schema.
    """
    with open(path) as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"not valid yaml: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    merged = _merge(DEFAULTS, raw)
    validate_config(merged)
    return merged


def validate_config(raw: dict) -> None:
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = ".".join(str(part) for part in exc.absolute_path) or "<root>"
        raise ConfigError(f"config field {where}: {exc.message}") from exc


def dump_config(config: dict, path) -> None:
    """Write the resolved config deterministically (sorted keys)."""
    with open(path, "w") as fh:
        yaml.safe_dump(config, fh, sort_keys=True, default_flow_style=False)
