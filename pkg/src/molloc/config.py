"""TOML scenario files.

Physical quantities are SI with the unit in the key name. Unknown keys are
errors. ``overrides`` are ``section.key=value`` strings whose value is parsed
as a TOML literal (bare words fall back to strings).
"""
from __future__ import annotations

import copy
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .channel import ChannelParams
from .estimators import GdOptions
from .geometry import AnchorSet
from .harness import ScenarioConfig

SCHEMA = {
    "seed": None,
    "trials": None,
    "estimator": None,
    "failure_policy": None,
    "resample_cap": None,
    "workers": None,
    "geometry": {"anchors_m": None, "source_m": None},
    "channel": {
        "molecules": None,
        "diffusion_m2_per_s": None,
        "sampling_period_s": None,
        "sampling_volume_m3": None,
        "peak_model": None,
        "noise_free": None,
    },
    "sweep": {"molecules": None},
    "gradient_descent": {
        "step_size_m2": None,
        "max_iters": None,
        "grad_tol_per_m": None,
        "init": None,
        "step_rule": None,
        "max_halvings": None,
    },
}

REQUIRED = [("geometry", "anchors_m"), ("geometry", "source_m"), ("seed",)]


class ConfigError(ValueError):
    pass


def _check_keys(doc: dict, schema: dict, prefix: str = "") -> None:
    for key, val in doc.items():
        name = prefix + key
        if key not in schema:
            raise ConfigError(f"unknown config key {name!r}")
        sub = schema[key]
        if isinstance(sub, dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{name!r} must be a section")
            _check_keys(val, sub, name + ".")
        elif isinstance(val, dict):
            raise ConfigError(f"{name!r} must be a value, not a section")


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(doc: dict, overrides) -> dict:
    doc = copy.deepcopy(doc)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        path, text = item.split("=", 1)
        keys = path.strip().split(".")
        schema, node = SCHEMA, doc
        for k in keys[:-1]:
            if not isinstance(schema.get(k), dict):
                raise ConfigError(f"unknown config key {path!r}")
            schema = schema[k]
            node = node.setdefault(k, {})
        if keys[-1] not in schema or isinstance(schema[keys[-1]], dict):
            raise ConfigError(f"unknown config key {path!r}")
        node[keys[-1]] = _parse_value(text.strip())
    return doc


def read_document(path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def scenario_from_document(doc: dict) -> ScenarioConfig:
    _check_keys(doc, SCHEMA)
    for req in REQUIRED:
        node = doc
        for k in req:
            if k not in node:
                raise ConfigError(f"missing required key {'.'.join(req)!r}")
            node = node[k]
    geo = doc["geometry"]
    ch = doc.get("channel", {})
    gd = doc.get("gradient_descent", {})
    try:
        channel = ChannelParams(
            Q=float(ch.get("molecules", ChannelParams.Q)),
            D=float(ch.get("diffusion_m2_per_s", ChannelParams.D)),
            T_s=float(ch.get("sampling_period_s", ChannelParams.T_s)),
            V_s=float(ch.get("sampling_volume_m3", ChannelParams.V_s)),
            peak_model=ch.get("peak_model", "derived"),
            noise_free=bool(ch.get("noise_free", False)),
        )
        opts = GdOptions(
            mu=gd.get("step_size_m2"),
            max_iters=int(gd.get("max_iters", GdOptions.max_iters)),
            grad_tol=gd.get("grad_tol_per_m"),
            init=gd.get("init", "centroid"),
            step_rule=gd.get("step_rule", GdOptions.step_rule),
            max_halvings=int(gd.get("max_halvings", GdOptions.max_halvings)),
        )
        return ScenarioConfig(
            anchors=AnchorSet(geo["anchors_m"]),
            source=geo["source_m"],
            channel=channel,
            seed=doc["seed"],
            trials=int(doc.get("trials", 1000)),
            estimator=doc.get("estimator", "triangulation"),
            gd_options=opts,
            sweep=tuple(doc.get("sweep", {}).get("molecules", ())),
            failure_policy=doc.get("failure_policy", "resample"),
            resample_cap=int(doc.get("resample_cap", 100)),
            workers=int(doc.get("workers", 1)),
        )
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, overrides=()) -> ScenarioConfig:
    return scenario_from_document(apply_overrides(read_document(path), overrides))
