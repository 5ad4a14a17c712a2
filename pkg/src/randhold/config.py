"""YAML experiment documents.

A document mirrors :meth:`ExperimentConfig.to_dict`::

    model: linear
    system: S1
    dist: {kind: exponential, rate: 1.0}
    regime: {kind: R2, c: 1.0}
    n_values: [256, 512, 1024]
    replications: 200
    metrics: [clt]

Unknown keys are rejected and every error names the offending key.
"""

from __future__ import annotations

import math

import yaml

from .errors import ConfigError, ParameterError
from .experiments import ExperimentConfig, Regime
from .renewal import distribution_from_dict

_REQUIRED = ("model", "system", "dist", "regime", "n_values", "replications")
_OPTIONAL = ("horizon", "mesh_pitch", "substeps", "seed", "metrics", "forcing_sign", "expected_slopes")
_REGIME_KEYS = {"kind", "delta", "c", "exponent"}


def _number(key, value, integer=False):
    if isinstance(value, bool):
        raise ConfigError(key, f"expected a number, got {value!r}")
    if integer:
        if not isinstance(value, int):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return value
    if not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {value!r}")
    return float(value)


def _mapping(key, value):
    if not isinstance(value, dict):
        raise ConfigError(key, f"expected a mapping, got {type(value).__name__}")
    return value


def _regime(doc):
    doc = _mapping("regime", doc)
    extra = set(doc) - _REGIME_KEYS
    if extra:
        raise ConfigError(f"regime.{sorted(extra)[0]}", "unknown key")
    if "kind" not in doc:
        raise ConfigError("regime.kind", "required")
    kw = {k: _number(f"regime.{k}", v) for k, v in doc.items() if k != "kind"}
    return Regime(kind=doc["kind"], **kw)


def _system(value):
    if isinstance(value, str):
        return value
    doc = _mapping("system", value)
    out = {}
    for k, v in doc.items():
        if k not in ("A", "B", "K", "x0"):
            raise ConfigError(f"system.{k}", "unknown key")
        if not isinstance(v, list):
            raise ConfigError(f"system.{k}", "expected a list")
        out[k] = v
    return out


def config_from_dict(doc):
    """Validate a plain mapping and build an :class:`ExperimentConfig`."""
    doc = _mapping("<root>", doc)
    for key in doc:
        if key not in _REQUIRED and key not in _OPTIONAL:
            raise ConfigError(key, "unknown key")
    for key in _REQUIRED:
        if key not in doc:
            raise ConfigError(key, "required")
    try:
        dist = distribution_from_dict(_mapping("dist", doc["dist"]))
    except ParameterError as exc:
        raise ConfigError("dist", str(exc)) from None
    n_values = doc["n_values"]
    if not isinstance(n_values, list):
        raise ConfigError("n_values", "expected a list")
    kw = {
        "model": doc["model"],
        "system": _system(doc["system"]),
        "dist": dist,
        "regime": _regime(doc["regime"]),
        "n_values": tuple(_number("n_values", n, integer=True) for n in n_values),
        "replications": _number("replications", doc["replications"], integer=True),
    }
    for key in ("horizon", "mesh_pitch", "forcing_sign"):
        if key in doc:
            kw[key] = _number(key, doc[key])
    for key in ("substeps", "seed"):
        if key in doc:
            kw[key] = _number(key, doc[key], integer=True)
    if "metrics" in doc:
        if not isinstance(doc["metrics"], list) or not all(isinstance(m, str) for m in doc["metrics"]):
            raise ConfigError("metrics", "expected a list of strings")
        kw["metrics"] = tuple(doc["metrics"])
    if "expected_slopes" in doc:
        slopes = {}
        for m, b in _mapping("expected_slopes", doc["expected_slopes"]).items():
            if not isinstance(b, list) or len(b) != 2:
                raise ConfigError(f"expected_slopes.{m}", "expected [low, high]")
            slopes[m] = tuple(_number(f"expected_slopes.{m}", v) for v in b)
        kw["expected_slopes"] = slopes
    for key in ("horizon", "mesh_pitch"):
        if key in kw and not math.isfinite(kw[key]):
            raise ConfigError(key, "must be finite")
    return ExperimentConfig(**kw)


def parse_config(path):
    """Read and validate a YAML experiment document."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return loads_config(text)


def loads_config(text):
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<document>", f"not valid YAML: {exc}") from None
    return config_from_dict(doc)


def dump_config(cfg):
    """YAML text that :func:`loads_config` maps back to an equal config."""
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
