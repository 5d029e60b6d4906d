"""Versioned JSON experiment configuration, its schema and the named presets."""

import copy
import json

import jsonschema

from ..hyperopt import ConfigurationError

__all__ = ["SCHEMA_VERSION", "CONFIG_SCHEMA", "PRESETS", "validate_config", "load_config", "preset"]

SCHEMA_VERSION = 1

_SEARCH = {
    "type": "object",
    "properties": {
        "restarts": {"type": "integer", "minimum": 0},
        "max_evals": {"type": "integer", "minimum": 1},
        "penalty": {"type": "number", "minimum": 0},
        "method": {"enum": ["nelder-mead", "fd-gradient"]},
        "n_jobs": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
}

_MODEL = {
    "type": "object",
    "required": ["label", "kind", "family"],
    "properties": {
        "label": {"type": "string", "minLength": 1},
        "kind": {"enum": ["gp", "string", "experts", "ard", "alrd"]},
        "family": {"type": "string"},
        "n_components": {"type": "integer", "minimum": 1},
        "n_strings": {"oneOf": [{"type": "integer", "minimum": 1},
                                {"type": "array", "items": {"type": "integer", "minimum": 1}}]},
        "boundaries": {"type": "array"},
        "noise": {"enum": ["homoskedastic", "per_string"]},
        "noise_init": {"type": "number", "exclusiveMinimum": 0},
        "lengthscale_frac": {"type": "number", "exclusiveMinimum": 0},
        "init": {"enum": ["default", "periodogram"]},
        "warm_start": {"type": "string"},
        "penalty": {"type": "number", "minimum": 0},
        "search": _SEARCH,
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema", "name", "dataset", "models"],
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "dataset": {
            "type": "object",
            "required": ["source"],
            "properties": {
                "source": {"enum": ["synthetic", "motorcycle", "csv"]},
                "function": {"enum": ["f0", "f1", "f2", "f3"]},
                "step": {"type": "number", "exclusiveMinimum": 0},
                "mesh": {"type": "number", "exclusiveMinimum": 0},
                "noise_std": {"type": "number", "minimum": 0},
                "path": {"type": "string"},
                "path_env": {"type": "string"},
                "csv_schema": {"enum": ["xy", "latlon_anomaly"]},
                "domain": {"type": "array"},
            },
            "additionalProperties": False,
        },
        "split": {
            "type": "object",
            "properties": {
                "policy": {"enum": ["preset", "random_holdout", "none"]},
                "n_test": {"type": "integer", "minimum": 0},
                "max_train": {"type": "integer", "minimum": 2},
            },
            "additionalProperties": False,
        },
        "models": {"type": "array", "minItems": 1, "items": _MODEL},
        "search": _SEARCH,
        "compare": {"type": "array", "items": {"type": "array", "items": {"type": "string"},
                                               "minItems": 2, "maxItems": 2}},
        "replications": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "n_jobs": {"type": "integer", "minimum": 1},
        "plot": {
            "type": "object",
            "properties": {
                "grid": {"type": "integer", "minimum": 0},
                "gradient_grid": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


def validate_config(cfg):
    """Schema-check ``cfg`` and the cross-references the schema cannot express."""
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigurationError(f"invalid config at {where}: {exc.message}") from None
    labels = [m["label"] for m in cfg["models"]]
    if len(set(labels)) != len(labels):
        raise ConfigurationError("model labels must be unique")
    for i, m in enumerate(cfg["models"]):
        if "warm_start" in m and m["warm_start"] not in labels[:i]:
            raise ConfigurationError(f"model {m['label']!r}: warm_start must name an earlier model")
        if m["kind"] in ("string", "experts", "alrd") and "n_strings" not in m and "boundaries" not in m:
            raise ConfigurationError(f"model {m['label']!r} needs n_strings or boundaries")
    for a, b in cfg.get("compare", []):
        if a not in labels or b not in labels:
            raise ConfigurationError(f"compare pair ({a!r}, {b!r}) names an unknown model")
    ds = cfg["dataset"]
    if ds["source"] == "synthetic" and "function" not in ds:
        raise ConfigurationError("synthetic datasets need a function name")
    if ds["source"] == "csv" and "path" not in ds and "path_env" not in ds:
        raise ConfigurationError("csv datasets need path or path_env")
    return cfg


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: not valid JSON ({exc})") from None
    return validate_config(cfg)


def _synthetic(fn, models):
    return {
        "schema": SCHEMA_VERSION,
        "name": fn,
        "dataset": {"source": "synthetic", "function": fn, "step": 1 / 300, "noise_std": 1e-2,
                    "domain": [0.0, 1.0]},
        "split": {"policy": "preset"},
        "models": models,
        "search": {"restarts": 2, "max_evals": 2000},
        "replications": 5,
        "seed": 0,
        "plot": {"grid": 601},
    }


_1D_VANILLA = [
    {"label": "SE", "kind": "gp", "family": "se", "noise_init": 1e-3},
    {"label": "RQ", "kind": "gp", "family": "rq", "noise_init": 1e-3},
    {"label": "Matern 3/2", "kind": "gp", "family": "matern32", "noise_init": 1e-3},
    {"label": "SM", "kind": "gp", "family": "sm", "n_components": 2, "init": "periodogram",
     "noise_init": 1e-3},
]
_1D_STRING = [
    {"label": "String Periodic", "kind": "string", "family": "periodic", "boundaries": [0.0, 0.5, 1.0],
     "init": "periodogram", "noise_init": 1e-3},
    {"label": "String SM", "kind": "string", "family": "sm", "n_components": 1,
     "boundaries": [0.0, 0.5, 1.0], "init": "periodogram", "noise_init": 1e-3},
]


def _motorcycle():
    models = [{"label": "Vanilla GP", "kind": "gp", "family": "matern32",
               "search": {"restarts": 2, "max_evals": 600}}]
    for n in (4, 6):
        models.append({"label": f"String GP ({n})", "kind": "string", "family": "matern32",
                       "n_strings": n, "noise": "per_string", "warm_start": "Vanilla GP",
                       "search": {"restarts": 0}})
    for n in (4, 6):
        models.append({"label": f"Mix ({n})", "kind": "experts", "family": "matern32",
                       "n_strings": n, "warm_start": "Vanilla GP"})
    for n in (4, 6):
        models.append({"label": f"Regul. Mix ({n})", "kind": "experts", "family": "matern32",
                       "n_strings": n, "warm_start": "Vanilla GP", "penalty": 1.0})
    return {
        "schema": SCHEMA_VERSION,
        "name": "motorcycle",
        "dataset": {"source": "motorcycle", "domain": [0.0, 60.0]},
        "split": {"policy": "random_holdout", "n_test": 5},
        "models": models,
        "search": {"restarts": 2, "max_evals": 2000},
        "compare": [["String GP (6)", "Vanilla GP"], ["String GP (4)", "Vanilla GP"]],
        "replications": 50,
        "seed": 0,
        "plot": {"grid": 241},
    }


def _two_d(fn):
    return {
        "schema": SCHEMA_VERSION,
        "name": fn,
        "dataset": {"source": "synthetic", "function": fn, "mesh": 1 / 60, "noise_std": 1e-2,
                    "domain": [[0.0, 1.0], [0.0, 1.0]]},
        "split": {"policy": "preset", "max_train": 400},
        "models": [
            {"label": "ARD SE", "kind": "ard", "family": "se", "noise_init": 1e-3},
            {"label": "ALRD SE", "kind": "alrd", "family": "se", "boundaries": [0.0, 0.5, 1.0],
             "noise_init": 1e-3, "warm_start": "ARD SE", "search": {"restarts": 0}},
        ],
        "search": {"restarts": 2, "max_evals": 1500},
        "replications": 1,
        "seed": 0,
        "plot": {"grid": 0, "gradient_grid": 31},
    }


def _temperature():
    return {
        "schema": SCHEMA_VERSION,
        "name": "temperature",
        "dataset": {"source": "csv", "path_env": "STRINGGP_TEMPERATURE_CSV",
                    "csv_schema": "latlon_anomaly"},
        "split": {"policy": "random_holdout", "n_test": 50},
        "models": [
            {"label": "ARD RQ", "kind": "ard", "family": "rq"},
            {"label": "ALRD RQ", "kind": "alrd", "family": "rq", "n_strings": [2, 2],
             "warm_start": "ARD RQ", "search": {"restarts": 0}},
        ],
        "search": {"restarts": 2, "max_evals": 2000},
        "compare": [["ALRD RQ", "ARD RQ"]],
        "replications": 50,
        "seed": 0,
        "plot": {"grid": 0, "gradient_grid": 40},
    }


PRESETS = {
    "f0": lambda: _synthetic("f0", _1D_VANILLA + _1D_STRING),
    "f1": lambda: _synthetic("f1", _1D_VANILLA + _1D_STRING),
    "f2": lambda: _two_d("f2"),
    "f3": lambda: _two_d("f3"),
    "motorcycle": _motorcycle,
    "temperature": _temperature,
}


def preset(name):
    if name not in PRESETS:
        raise ConfigurationError(f"unknown experiment {name!r}; presets are {sorted(PRESETS)}")
    return validate_config(copy.deepcopy(PRESETS[name]()))
