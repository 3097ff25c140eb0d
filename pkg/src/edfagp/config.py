"""Experiment configuration: nested dataclasses loaded from a single JSON file."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .active_learning import METHODS, AlConfig
from .domain import ChannelGrid, ConfigurationError, make_grid
from .edfa_sim import SimulatorConfig
from .gpr import GprConfig
from .nn_baseline import MlpConfig

OUTPUT_DIR_ENV = "EDFAGP_OUTPUT_DIR"


class ConfigError(ValueError):
    """Invalid experiment configuration; ``errors`` holds one message per offending field."""

    def __init__(self, errors: list[str]):
        super().__init__("invalid configuration:\n  " + "\n  ".join(errors))
        self.errors = errors


@dataclass(frozen=True)
class GridConfig:
    n_total: int = 80
    spacing_ghz: float = 50.0
    pattern: str | list = "odd"

    def build(self) -> ChannelGrid:
        return make_grid(self.n_total, self.spacing_ghz, self.pattern)


@dataclass(frozen=True)
class PriorConfig:
    #: Average the target-minus-calibration gap over occupied channels only.
    occupied_only: bool = False


@dataclass(frozen=True)
class EvalConfig:
    test_size: int = 1002
    test_seed: int = 1
    bin_width_db: float = 0.05

    def __post_init__(self):
        if self.test_size < 1:
            raise ValueError("test_size must be >= 1")
        if not self.bin_width_db > 0:
            raise ValueError("bin_width_db must be > 0")


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    simulator: SimulatorConfig = field(default_factory=SimulatorConfig)
    prior: PriorConfig = field(default_factory=PriorConfig)
    gpr: GprConfig = field(default_factory=GprConfig)
    nn: MlpConfig = field(default_factory=MlpConfig)
    al: AlConfig = field(default_factory=AlConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    methods: tuple[str, ...] = METHODS
    rounds: int = 3
    output_dir: str = "results"

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        errors = []
        if not self.methods:
            errors.append("methods: must be non-empty")
        for m in self.methods:
            if m not in METHODS:
                errors.append(f"methods: unknown method {m!r} (choose from {', '.join(METHODS)})")
        if len(set(self.methods)) != len(self.methods):
            errors.append("methods: duplicate entries")
        if self.rounds < 1:
            errors.append("rounds: must be >= 1")
        if errors:
            raise ConfigError(errors)

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


_SECTIONS = {
    "grid": GridConfig,
    "simulator": SimulatorConfig,
    "prior": PriorConfig,
    "gpr": GprConfig,
    "nn": MlpConfig,
    "al": AlConfig,
    "eval": EvalConfig,
}


def _plain(v):
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if hasattr(v, "item"):
        return v.item()
    return v


def _coerce(name, value, default, errors):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            errors.append(f"{name}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            errors.append(f"{name}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            errors.append(f"{name}: expected a number, got {value!r}")
            return value
        return float(value)
    if isinstance(default, tuple) or (default is None and isinstance(value, list)):
        if not isinstance(value, list):
            errors.append(f"{name}: expected a list, got {value!r}")
            return value
        return tuple(value)
    return value


def _build_section(name, cls, raw, errors):
    if not isinstance(raw, dict):
        errors.append(f"{name}: expected an object")
        return cls()
    defaults = cls()
    kwargs = {}
    known = {f.name for f in dataclasses.fields(cls)}
    for key, value in raw.items():
        if key not in known:
            errors.append(f"{name}.{key}: unknown field")
            continue
        kwargs[key] = _coerce(f"{name}.{key}", value, getattr(defaults, key), errors)
    try:
        obj = cls(**kwargs)
        if isinstance(obj, GridConfig):
            obj.build()
        return obj
    except (ValueError, TypeError, ConfigurationError) as exc:
        errors.append(f"{name}: {exc}")
        return defaults


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError(["top level: expected a JSON object"])
    errors: list[str] = []
    kwargs = {}
    top = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for key, value in raw.items():
        if key not in top:
            errors.append(f"{key}: unknown field")
        elif key in _SECTIONS:
            kwargs[key] = _build_section(key, _SECTIONS[key], value, errors)
        elif key == "methods":
            if isinstance(value, str):
                value = [v for v in value.split(",") if v]
            if not isinstance(value, list):
                errors.append("methods: expected a list of method names")
            kwargs[key] = value
        elif key == "rounds":
            kwargs[key] = _coerce("rounds", value, 1, errors)
        else:
            if not isinstance(value, str):
                errors.append(f"{key}: expected a string")
            kwargs[key] = value
    if errors:
        raise ConfigError(errors)
    try:
        return ExperimentConfig(**kwargs)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError([str(exc)]) from None


def load_config(path, **overrides) -> ExperimentConfig:
    """Read a JSON config; ``overrides`` replace top-level keys. ``$EDFAGP_OUTPUT_DIR`` wins over the file."""
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError([f"config file not found: {path}"]) from None
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config is not valid JSON: {exc}"]) from None
    if not isinstance(raw, dict):
        raise ConfigError(["top level: expected a JSON object"])
    raw.update({k: v for k, v in overrides.items() if v is not None})
    env = os.environ.get(OUTPUT_DIR_ENV)
    if env:
        raw["output_dir"] = env
    return config_from_dict(raw)


def default_config_dict() -> dict:
    return ExperimentConfig().to_dict()
