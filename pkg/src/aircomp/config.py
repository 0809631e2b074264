"""Run configuration: YAML parsing, validation and serialization.

Powers and gains may be given in dB units (``noise_dbm``, ``ref_gain_db``);
they are converted to linear units when parsed and serialized back in linear
units, so parse -> serialize -> parse is the identity.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .network import NetworkScenario, PathLoss, db_to_linear, dbm_to_watts

CONFIG_VERSION = 1
MODES = ("centralized", "distributed", "baselines", "pareto", "validate")


class ConfigError(ValueError):
    """Invalid or incomplete configuration; the message names the offending key."""


@dataclass(frozen=True)
class ScenarioConfig:
    ap_positions: tuple[tuple[float, float], ...] = ((0.0, 0.0), (0.0, 40.0))
    devices_per_cell: tuple[int, ...] = (20, 20)
    cell_radius: float = 20.0
    power_budget_w: float = 1.0
    noise_w: float = 1e-15
    ref_gain: float = 1e-6
    ref_distance: float = 10.0
    exponent: float = 3.0

    def build(self, power_budget: float | None = None, devices_per_cell: int | None = None) -> NetworkScenario:
        counts = self.devices_per_cell if devices_per_cell is None else (devices_per_cell,) * len(self.ap_positions)
        return NetworkScenario(ap_positions=np.array(self.ap_positions, dtype=float), devices_per_cell=counts,
                               cell_radius=self.cell_radius,
                               power_budgets=self.power_budget_w if power_budget is None else power_budget,
                               noise_power=self.noise_w,
                               pathloss=PathLoss(self.ref_gain, self.ref_distance, self.exponent))


@dataclass(frozen=True)
class CentralizedConfig:
    profiles: tuple[tuple[float, ...], ...] = ()
    num_profiles: int = 9
    bisect_tol: float = 1e-4


@dataclass(frozen=True)
class DistributedConfig:
    alpha: float = 1.0
    step_fraction: float = 0.1
    det_tol: float = 1e-3
    tol: float = 1e-9
    max_rounds: int = 2000
    solver_tol: float = 1e-10


@dataclass(frozen=True)
class BaselinesConfig:
    power_sweep_w: tuple[float, ...] = (0.001, 0.01, 0.1, 1.0, 10.0)
    device_sweep: tuple[int, ...] = ()
    true_interference_eta: bool = True


@dataclass(frozen=True)
class ValidateConfig:
    trials: int = 100_000


@dataclass(frozen=True)
class RunConfig:
    mode: str = "pareto"
    seed: int = 0
    realizations: int = 100
    output: str = "results"
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    centralized: CentralizedConfig = field(default_factory=CentralizedConfig)
    distributed: DistributedConfig = field(default_factory=DistributedConfig)
    baselines: BaselinesConfig = field(default_factory=BaselinesConfig)
    validate: ValidateConfig = field(default_factory=ValidateConfig)

    def with_overrides(self, mode: str | None = None, seed: int | None = None,
                       output: str | None = None) -> "RunConfig":
        changes = {k: v for k, v in (("mode", mode), ("seed", seed), ("output", output)) if v is not None}
        config = dataclasses.replace(self, **changes)
        _check(config)
        return config


# dB-valued aliases accepted on input, with their linear target key and converter
_DB_KEYS = {"noise_dbm": ("noise_w", dbm_to_watts), "ref_gain_db": ("ref_gain", db_to_linear)}
_SECTIONS = {"scenario": ScenarioConfig, "centralized": CentralizedConfig, "distributed": DistributedConfig,
             "baselines": BaselinesConfig, "validate": ValidateConfig}


def _section(name: str, cls, raw) -> object:
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: expected a mapping")
    raw = dict(raw)
    for db_key, (key, convert) in _DB_KEYS.items():
        if db_key in raw and name == "scenario":
            if key in raw:
                raise ConfigError(f"{name}.{db_key}: give either {db_key} or {key}, not both")
            raw[key] = convert(_number(f"{name}.{db_key}", raw.pop(db_key)))
    known = {f.name: f for f in dataclasses.fields(cls)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"{name}.{key}: unknown key")
    values = {}
    for key, value in raw.items():
        values[key] = _coerce(f"{name}.{key}", known[key].type, value)
    return cls(**values)


def _number(key: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    return float(value)


def _integer(key: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    return value


def _coerce(key: str, annotation: str, value):
    if annotation == "float":
        return _number(key, value)
    if annotation == "int":
        return _integer(key, value)
    if annotation == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true or false")
        return value
    if annotation == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string")
        return value
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"{key}: expected a list")
    if annotation == "tuple[float, ...]":
        return tuple(_number(key, v) for v in value)
    if annotation == "tuple[int, ...]":
        return tuple(_integer(key, v) for v in value)
    # lists of rows: AP coordinates or MSE profiles
    rows = []
    for row in value:
        if not isinstance(row, (list, tuple)):
            raise ConfigError(f"{key}: expected a list of lists")
        rows.append(tuple(_number(key, v) for v in row))
    return tuple(rows)


def _check(config: RunConfig) -> None:
    if config.mode not in MODES:
        raise ConfigError(f"mode: must be one of {', '.join(MODES)}, got {config.mode!r}")
    if config.realizations < 1:
        raise ConfigError("realizations: must be >= 1")
    if config.seed < 0:
        raise ConfigError("seed: must be nonnegative")
    sc = config.scenario
    if any(len(p) != 2 for p in sc.ap_positions):
        raise ConfigError("scenario.ap_positions: each AP needs two coordinates")
    if len(sc.devices_per_cell) != len(sc.ap_positions):
        raise ConfigError("scenario.devices_per_cell: one count per AP required")
    for key in ("cell_radius", "power_budget_w", "noise_w", "ref_gain", "ref_distance", "exponent"):
        if not getattr(sc, key) > 0:
            raise ConfigError(f"scenario.{key}: must be positive")
    num_cells = len(sc.ap_positions)
    for i, beta in enumerate(config.centralized.profiles):
        if len(beta) != num_cells:
            raise ConfigError(f"centralized.profiles[{i}]: needs {num_cells} entries")
        if any(b <= 0 for b in beta) or abs(sum(beta) - 1.0) > 1e-9:
            raise ConfigError(f"centralized.profiles[{i}]: entries must be positive and sum to 1")
    if config.centralized.bisect_tol <= 0:
        raise ConfigError("centralized.bisect_tol: must be positive")
    if config.mode == "centralized" and not config.centralized.profiles:
        raise ConfigError("centralized.profiles: required in centralized mode")
    if config.mode == "pareto" and not config.centralized.profiles:
        if num_cells != 2:
            raise ConfigError("centralized.profiles: required in pareto mode with more than two cells")
        if config.centralized.num_profiles < 1:
            raise ConfigError("centralized.num_profiles: must be >= 1")
    dist = config.distributed
    for key in ("det_tol", "tol", "solver_tol", "step_fraction"):
        if not getattr(dist, key) > 0:
            raise ConfigError(f"distributed.{key}: must be positive")
    if dist.alpha < 0:
        raise ConfigError("distributed.alpha: must be nonnegative")
    if dist.max_rounds < 1:
        raise ConfigError("distributed.max_rounds: must be >= 1")
    base = config.baselines
    if config.mode == "baselines" and not (base.power_sweep_w or base.device_sweep):
        raise ConfigError("baselines.power_sweep_w: a power or device sweep is required in baselines mode")
    if any(p <= 0 for p in base.power_sweep_w):
        raise ConfigError("baselines.power_sweep_w: powers must be positive")
    if any(k < 1 for k in base.device_sweep):
        raise ConfigError("baselines.device_sweep: counts must be >= 1")
    if config.validate.trials < 2:
        raise ConfigError("validate.trials: must be >= 2")


def config_from_dict(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected a mapping")
    raw = dict(raw)
    version = raw.pop("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"version: unsupported config version {version!r}")
    known = {f.name: f for f in dataclasses.fields(RunConfig)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"{key}: unknown key")
    values = {}
    for key, value in raw.items():
        if key in _SECTIONS:
            values[key] = _section(key, _SECTIONS[key], value)
        else:
            values[key] = _coerce(key, known[key].type, value)
    config = RunConfig(**values)
    _check(config)
    return config


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
    return config_from_dict(raw if raw is not None else {})


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


def config_to_dict(config: RunConfig) -> dict:
    out = {"version": CONFIG_VERSION}
    for f in dataclasses.fields(config):
        value = getattr(config, f.name)
        if dataclasses.is_dataclass(value):
            out[f.name] = {g.name: _plain(getattr(value, g.name)) for g in dataclasses.fields(value)}
        else:
            out[f.name] = value
    return out


def serialize_config(config: RunConfig) -> str:
    return yaml.safe_dump(config_to_dict(config), sort_keys=False)
