"""JSON experiment configs mapped onto the package dataclasses.

A config file is a JSON object with a ``schema_version`` and one section per
dataclass. Unknown or ill-typed keys raise :class:`ConfigError` naming the key.

Training schema (version 1)::

    {
      "schema_version": 1,
      "output_dir": "runs/comp_s0",        # optional, CLI flag wins
      "train": {...TrainConfig fields...},  # required
      "env": {...EnvConfig fields...},      # optional
      "extractor": {...FeatureExtractorConfig fields...}  # optional
    }
"""
from __future__ import annotations

import json
from dataclasses import asdict, fields, is_dataclass
from pathlib import Path
from typing import Any

from .nn import FeatureExtractorConfig
from .ppo import TrainConfig
from .swimmer import EnvConfig

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"config key '{key}': {message}")
        self.key = key


def _coerce(key: str, value: Any, default: Any):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(key, f"expected boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"expected integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(key, f"expected string, got {value!r}")
        return value
    return value


def dataclass_from_dict(cls, data: dict, section: str):
    if not isinstance(data, dict):
        raise ConfigError(section, "expected an object")
    proto = cls()
    known = {f.name for f in fields(cls)}
    for k in data:
        if k not in known:
            raise ConfigError(f"{section}.{k}", "unknown key")
    kwargs = {k: _coerce(f"{section}.{k}", v, getattr(proto, k)) for k, v in data.items()}
    return cls(**kwargs)


def load_json(path) -> dict:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected a JSON object")
    return data


def check_version(data: dict) -> None:
    if "schema_version" not in data:
        raise ConfigError("schema_version", "missing required key")
    if data["schema_version"] != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {data['schema_version']!r}")


def parse_train_config(data: dict) -> tuple[TrainConfig, EnvConfig, FeatureExtractorConfig, str | None]:
    check_version(data)
    allowed = {"schema_version", "output_dir", "train", "env", "extractor"}
    for k in data:
        if k not in allowed:
            raise ConfigError(k, "unknown key")
    if "train" not in data:
        raise ConfigError("train", "missing required key")
    train = dataclass_from_dict(TrainConfig, data["train"], "train")
    env = dataclass_from_dict(EnvConfig, data.get("env", {}), "env")
    extractor = dataclass_from_dict(FeatureExtractorConfig, data.get("extractor", {}), "extractor")
    for name, obj in (("train", train), ("env", env)):
        try:
            obj.validate()
        except ValueError as exc:
            raise ConfigError(name, str(exc)) from exc
    out = data.get("output_dir")
    if out is not None and not isinstance(out, str):
        raise ConfigError("output_dir", "expected string")
    return train, env, extractor, out


def train_config_document(train: TrainConfig, env: EnvConfig, extractor: FeatureExtractorConfig,
                          output_dir: str | None = None) -> dict:
    doc = {"schema_version": SCHEMA_VERSION}
    if output_dir is not None:
        doc["output_dir"] = str(output_dir)
    doc["train"] = asdict(train)
    doc["env"] = asdict(env)
    doc["extractor"] = asdict(extractor)
    return doc


def write_json(path, data: dict) -> None:
    def default(o):
        if is_dataclass(o):
            return asdict(o)
        if isinstance(o, Path):
            return str(o)
        raise TypeError(type(o))

    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True, default=default) + "\n")
