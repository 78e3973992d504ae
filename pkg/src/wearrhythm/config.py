"""Run configuration: one JSON document covering every stage, with dotted overrides."""

from __future__ import annotations

import dataclasses
import json
import typing
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .errors import ConfigInvalid
from .evaluation import EvalConfig
from .network import NetworkConfig
from .pipeline import FeatureConfig
from .synth import CohortSpec
from .training import TrainConfig


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    features: FeatureConfig = field(default_factory=FeatureConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    synth: CohortSpec = field(default_factory=CohortSpec)
    data_dir: str | None = None
    out_dir: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def provenance(self) -> dict:
        return {"tool": "wearrhythm", "version": __version__, "seed": self.seed,
                "config": self.to_dict()}


def build_dataclass(cls, data, path: str):
    """Instantiate dataclass ``cls`` from a dict, rejecting unknown keys."""
    if dataclasses.is_dataclass(data):
        return data
    if not isinstance(data, dict):
        raise ConfigInvalid(f"{path or 'config'}: expected an object, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigInvalid(f"{path or 'config'}: unknown key(s) {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        hint = hints[name]
        sub = f"{path}.{name}" if path else name
        if dataclasses.is_dataclass(hint):
            kwargs[name] = build_dataclass(hint, value, sub)
        elif isinstance(value, list):
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(f"{path or 'config'}: {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    return build_dataclass(RunConfig, data, "")


def load_config(path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigInvalid(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(data)


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: RunConfig, overrides) -> RunConfig:
    """Apply ``key.sub=value`` strings; values are parsed as JSON when possible."""
    data = cfg.to_dict()
    for item in overrides or ():
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigInvalid(f"override {item!r} is not key=value")
        parts = key.strip().split(".")
        node = data
        for p in parts[:-1]:
            if not isinstance(node.get(p), dict):
                raise ConfigInvalid(f"unknown config key {key!r}")
            node = node[p]
        if parts[-1] not in node:
            raise ConfigInvalid(f"unknown config key {key!r}")
        node[parts[-1]] = _parse_value(raw)
    return config_from_dict(data)
