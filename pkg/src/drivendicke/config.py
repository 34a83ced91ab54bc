"""Run configuration: TOML in, TOML out, with dotted-key overrides.

A configuration file has one table per section::

    [model]
    g = 0.5
    T = 0.07

    [spectrum]
    omega_min = 0.0
    omega_max = 2.5
    n_points = 1001

Unknown sections or keys are rejected with the offending name in the message.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .errors import ConfigError
from .model import ModelParams


def _grid(lo: float, hi: float, n: int, name: str) -> np.ndarray:
    if n < 1:
        raise ConfigError(f"{name}: number of points must be >= 1, got {n}")
    if n > 1 and not hi > lo:
        raise ConfigError(f"{name}: grid must be strictly increasing ({lo} .. {hi})")
    return np.linspace(lo, hi, n) if n > 1 else np.array([float(lo)])


@dataclass(frozen=True)
class SpectrumSpec:
    omega_min: float = 0.0
    omega_max: float = 2.5
    n_points: int = 1001

    def grid(self) -> np.ndarray:
        return _grid(self.omega_min, self.omega_max, self.n_points, "spectrum")


@dataclass(frozen=True)
class G2Spec:
    """``n_tau = 0`` requests only the zero-delay value."""

    tau_max: float = 0.0
    n_tau: int = 0

    def grid(self) -> np.ndarray:
        if self.tau_max < 0:
            raise ConfigError("g2.tau_max must be >= 0")
        return _grid(0.0, self.tau_max, self.n_tau, "g2")


@dataclass(frozen=True)
class SweepSpec:
    observable: str = "g2"
    T_min: float = 0.02
    T_max: float = 0.4
    T_steps: int = 12
    g_min: float = 0.05
    g_max: float = 1.0
    g_steps: int = 12
    budget: int = 400

    def __post_init__(self):
        if self.observable not in ("g2", "eof", "flux"):
            raise ConfigError(f"sweep.observable must be g2, eof or flux, got {self.observable!r}")
        if self.T_steps * self.g_steps > self.budget:
            raise ConfigError(f"sweep has {self.T_steps * self.g_steps} points, "
                              f"above the budget of {self.budget}")

    def grids(self) -> tuple[np.ndarray, np.ndarray]:
        return (_grid(self.T_min, self.T_max, self.T_steps, "sweep.T"),
                _grid(self.g_min, self.g_max, self.g_steps, "sweep.g"))


@dataclass(frozen=True)
class QuasiSpec:
    g_min: float = 0.0
    g_max: float = 1.0
    g_steps: int = 21
    n_levels: int = 12
    tolerance: float = 1e-2

    def grid(self) -> np.ndarray:
        return _grid(self.g_min, self.g_max, self.g_steps, "quasienergies.g")


@dataclass(frozen=True)
class OutputSpec:
    path: str = ""
    format: str = "csv"

    def __post_init__(self):
        if self.format not in ("csv", "json"):
            raise ConfigError(f"output.format must be csv or json, got {self.format!r}")


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams = field(default_factory=ModelParams)
    spectrum: SpectrumSpec = field(default_factory=SpectrumSpec)
    g2: G2Spec = field(default_factory=G2Spec)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    quasienergies: QuasiSpec = field(default_factory=QuasiSpec)
    output: OutputSpec = field(default_factory=OutputSpec)

    def to_dict(self) -> dict:
        return {f.name: dataclasses.asdict(getattr(self, f.name)) for f in fields(self)}


_SECTIONS = {f.name: f.default_factory for f in fields(RunConfig)}


def _coerce(section: str, key: str, value, target_type):
    where = f"{section}.{key}"
    if target_type in (float, "float"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if target_type in (int, "int"):
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if target_type in (bool, "bool"):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true or false, got {value!r}")
        return value
    if target_type in (str, "str"):
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    return value


def _build_section(name: str, values: dict):
    cls = type(_SECTIONS[name]())
    known = {f.name: f.type for f in fields(cls)}
    kwargs = {}
    for key, value in values.items():
        if key not in known:
            raise ConfigError(f"unknown key {name}.{key}")
        kwargs[key] = _coerce(name, key, value, known[key])
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        raise ConfigError(f"[{name}] {exc}") from None


def from_dict(data: dict) -> RunConfig:
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    parts = {}
    for name, value in data.items():
        if not isinstance(value, dict):
            raise ConfigError(f"section [{name}] must be a table")
        parts[name] = _build_section(name, value)
    return RunConfig(**parts)


def loads(text: str) -> RunConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from None
    return from_dict(data)


def load(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return loads(text)


def dumps(config: RunConfig) -> str:
    return tomli_w.dumps(config.to_dict())


def _parse_value(text: str):
    try:
        return tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        return text


def apply_overrides(config: RunConfig, overrides) -> RunConfig:
    """Apply ``section.key=value`` strings; values use TOML syntax, bare words are strings."""
    data = config.to_dict()
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        key, text = item.split("=", 1)
        parts = key.strip().split(".")
        if len(parts) != 2:
            raise ConfigError(f"override key {key!r} must be section.key")
        section, name = parts
        if section not in data:
            raise ConfigError(f"unknown section {section!r} in override")
        if name not in data[section]:
            raise ConfigError(f"unknown key {section}.{name} in override")
        data[section][name] = _parse_value(text.strip())
    return from_dict(data)
