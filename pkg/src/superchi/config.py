"""Flat, typed run configuration loaded from TOML plus ``key=value`` overrides."""

from __future__ import annotations

import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .model import DampingRates, ModelError
from .oracle import DEFAULT_AMPLITUDES, MAX_ATOMS

MODES = ("sweep", "transient", "verify")
STANDARD_RATES = ((0.0, 0.1), (0.05, 0.05), (0.1, 0.0))


class ConfigError(ModelError):
    pass


@dataclass
class RunConfig:
    mode: str = "sweep"
    n_atoms: int = 5
    gamma_r: float = 1.0
    gamma_d: float = 0.0
    gamma_n: float = 0.1
    field_amplitude: float = 1.0
    # sweep
    detuning_min: float = -20.0
    detuning_max: float = 20.0
    detuning_count: int = 2001
    detuning_spacing: str = "linear"
    # transient
    detuning: float = 5.0
    t_end: float = 1000.0
    t_min: float = 0.01
    t_count: int = 400
    t_spacing: str = "log"
    rtol: float = 1e-10
    atol: float = 1e-14
    # verify
    oracle_max_atoms: int = MAX_ATOMS
    oracle_amplitudes: list[float] = field(default_factory=lambda: list(DEFAULT_AMPLITUDES))
    oracle_chi1_tol: float = 1e-6
    oracle_chi3_tol: float = 1e-3
    plugback_tol: float = 1e-10
    plugback_samples: int = 200
    verify_rates: str = "config"
    verify_detunings: list[float] = field(
        default_factory=lambda: [0.0, 1.0, -1.0, 5.0, -5.0, 20.0, -20.0])
    seed: int = 42
    # output
    output: str = "-"
    format: str = "csv"
    jobs: int = 1

    @property
    def rates(self) -> DampingRates:
        return DampingRates(self.gamma_r, self.gamma_d, self.gamma_n)

    def validate(self) -> RunConfig:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}")
        if self.n_atoms < 1:
            raise ConfigError("n_atoms must be >= 1")
        self.rates  # raises on bad rates
        if self.mode == "sweep":
            if self.detuning_count < 2:
                raise ConfigError("detuning_count must be >= 2")
            if not self.detuning_min < self.detuning_max:
                raise ConfigError("detuning_min must be < detuning_max")
            if self.detuning_spacing not in ("linear", "log"):
                raise ConfigError("detuning_spacing must be linear or log")
            if self.detuning_spacing == "log" and self.detuning_min <= 0:
                raise ConfigError("log detuning grid needs detuning_min > 0")
        if self.mode == "transient":
            if not self.t_end > 0:
                raise ConfigError("t_end must be > 0")
            if self.t_count < 2:
                raise ConfigError("t_count must be >= 2")
            if self.t_spacing not in ("linear", "log"):
                raise ConfigError("t_spacing must be linear or log")
            if self.t_spacing == "log" and not 0 < self.t_min < self.t_end:
                raise ConfigError("log time grid needs 0 < t_min < t_end")
            if self.field_amplitude == 0:
                raise ConfigError("field_amplitude must be nonzero")
        for name in ("rtol", "atol", "oracle_chi1_tol", "oracle_chi3_tol", "plugback_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if self.mode == "verify":
            if self.oracle_max_atoms > MAX_ATOMS:
                raise ConfigError(f"oracle_max_atoms cannot exceed {MAX_ATOMS}")
            if self.n_atoms > self.oracle_max_atoms:
                raise ConfigError(
                    f"n_atoms = {self.n_atoms} exceeds the oracle size limit "
                    f"{self.oracle_max_atoms}")
            if self.verify_rates not in ("config", "standard"):
                raise ConfigError("verify_rates must be config or standard")
            if len(self.oracle_amplitudes) < 3 or min(self.oracle_amplitudes) <= 0:
                raise ConfigError("oracle_amplitudes needs >= 3 positive values")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        return self

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, value: Any) -> Any:
    if name not in _FIELDS:
        raise ConfigError(f"unknown config key {name!r}")
    default = getattr(RunConfig(), name)
    try:
        if isinstance(default, bool):
            return bool(value)
        if isinstance(default, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, list):
            return [float(v) for v in value]
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {name}: {value!r}") from None


def _parse_override(item: str) -> tuple[str, Any]:
    key, sep, raw = item.partition("=")
    if not sep:
        raise ConfigError(f"override must look like key=value, got {item!r}")
    key = key.strip()
    try:
        value = tomllib.loads(f"v = {raw.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()  # bare strings such as format=json
    return key, value


def load_config(path: str | Path | None = None, overrides: list[str] | None = None,
                mode: str | None = None) -> RunConfig:
    values: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                values.update(tomllib.load(fh))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    for item in overrides or []:
        key, value = _parse_override(item)
        values[key] = value
    if mode is not None:
        values["mode"] = mode
    cfg = RunConfig(**{k: _coerce(k, v) for k, v in values.items()})
    return cfg.validate()


def config_header(cfg: RunConfig) -> str:
    return json.dumps(cfg.to_dict(), sort_keys=True)
