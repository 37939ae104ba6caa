"""Run configuration files (JSON).

Unknown keys are rejected at every level: a misspelled parameter must fail
loudly rather than silently fall back to a default.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .model import ModelSpec, model_from_dict, model_to_dict
from .presets import build_preset

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass
class SimulateParams:
    K: int = 100
    trajectories: int = 1
    naive: bool = False


@dataclass
class LimitParams:
    T: float = 1.0
    dt: float = 1e-3
    paths: int = 1
    t: float = 1.0


@dataclass
class VerifyParams:
    n: int = 200
    t: float = 1.0
    trajectories: int = 1000
    k_max: int = 500
    growth_trajectories: int = 200
    level: float = 0.01


@dataclass
class ClassifyParams:
    tolerance_band: float = 1e-9


@dataclass
class RunConfig:
    model: ModelSpec
    model_source: dict
    master_seed: int | None = None
    simulate: SimulateParams = field(default_factory=SimulateParams)
    limit: LimitParams = field(default_factory=LimitParams)
    verify: VerifyParams = field(default_factory=VerifyParams)
    classify: ClassifyParams = field(default_factory=ClassifyParams)

    def to_dict(self) -> dict:
        out = {"schema_version": SCHEMA_VERSION, "model": self.model_source}
        if self.master_seed is not None:
            out["master_seed"] = self.master_seed
        for name in ("simulate", "limit", "verify", "classify"):
            out[name] = asdict(getattr(self, name))
        return out


_POSITIVE = {"K": 0, "trajectories": 1, "paths": 1, "n": 1, "k_max": 10, "growth_trajectories": 1}


def _section(cls, raw, name: str):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"'{name}' must be an object")
    known = {f.name: f for f in fields(cls)}
    unknown = set(raw) - set(known)
    if unknown:
        raise ConfigError(f"unknown keys in '{name}': {sorted(unknown)}")
    vals = {}
    for key, value in raw.items():
        default = getattr(cls(), key)
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"'{name}.{key}' must be true or false")
        elif isinstance(default, int):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"'{name}.{key}' must be an integer")
            if value < _POSITIVE.get(key, 0):
                raise ConfigError(f"'{name}.{key}' must be at least {_POSITIVE.get(key, 0)}")
        else:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"'{name}.{key}' must be a number")
            if value <= 0:
                raise ConfigError(f"'{name}.{key}' must be positive")
            value = float(value)
        vals[key] = value
    return cls(**vals)


def build_model(raw) -> ModelSpec:
    if not isinstance(raw, dict):
        raise ConfigError("'model' must be an object")
    try:
        if "preset" in raw:
            unknown = set(raw) - {"preset", "params"}
            if unknown:
                raise ConfigError(f"unknown keys in 'model': {sorted(unknown)}")
            return build_preset(raw["preset"], raw.get("params"))
        return model_from_dict(raw)
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"invalid model: {exc}") from None


def parse_config(data) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    allowed = {"schema_version", "model", "master_seed", "simulate", "limit", "verify", "classify"}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}")
    if "model" not in data:
        raise ConfigError("missing 'model'")
    seed = data.get("master_seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64):
        raise ConfigError("master_seed must be an unsigned 64-bit integer")
    return RunConfig(
        model=build_model(data["model"]),
        model_source=data["model"],
        master_seed=seed,
        simulate=_section(SimulateParams, data.get("simulate"), "simulate"),
        limit=_section(LimitParams, data.get("limit"), "limit"),
        verify=_section(VerifyParams, data.get("verify"), "verify"),
        classify=_section(ClassifyParams, data.get("classify"), "classify"),
    )


def load_config(path) -> RunConfig:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_config(data)


def preset_config(name: str, master_seed: int = 0) -> dict:
    """A complete config for a preset, with the model spelled out in full."""
    model = build_preset(name)
    return RunConfig(model, model_to_dict(model), master_seed).to_dict()
