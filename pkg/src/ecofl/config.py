"""Scenario files: TOML with unit-suffixed values.

Top-level keys map onto :class:`ScenarioConfig` fields; ``[fl]`` and
``[rotor]`` tables map onto :class:`FLHyperparams` and :class:`RotorModel`.
Numbers are taken in SI units. Strings carry an explicit unit::

    p_ue_max = "31.8 dBm"
    sigma_z2 = "-80 dBm"
    W = "20 MHz"
    Q = "8.065 Mb"

Unknown keys and units that do not fit the field are errors.
"""
from __future__ import annotations

import dataclasses
import re
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .scenario import FLHyperparams, RotorModel, ScenarioConfig, dbm_to_watt

_POWER = {"W": 1.0, "mW": 1e-3, "dBm": None, "dBW": None}
_FREQ = {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9}
_BITS = {"b": 1.0, "kb": 1e3, "Mb": 1e6, "Gb": 1e9}
_TIME = {"s": 1.0, "ms": 1e-3}
_LENGTH = {"m": 1.0, "km": 1e3}

FIELD_UNITS = {
    "sigma_z2": _POWER, "p_ue_max": _POWER, "p_uav_max": _POWER,
    "W": _FREQ, "f_c": _FREQ, "f_cpu": _FREQ,
    "Q": _BITS, "D_th": _BITS,
    "T": _TIME, "t_cm": _TIME, "t_agg": _TIME, "t_bc": _TIME,
    "uav_altitude": _LENGTH,
}

_QTY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z]+)\s*$")


class ConfigError(ValueError):
    """Malformed or unknown configuration entry."""


def parse_quantity(text: str, units: dict, key: str = "value") -> float:
    """``"31.8 dBm"`` -> watts, ``"20 MHz"`` -> hertz, ``"8 Mb"`` -> bits."""
    m = _QTY.match(text)
    if not m:
        raise ConfigError(f"{key}: cannot parse quantity {text!r}")
    value, unit = float(m.group(1)), m.group(2)
    if unit not in units:
        raise ConfigError(f"{key}: unit {unit!r} not allowed (expected one of {sorted(units)})")
    if unit == "dBm":
        return dbm_to_watt(value)
    if unit == "dBW":
        return 10.0 ** (value / 10.0)
    return value * units[unit]


def _convert(key, value):
    if isinstance(value, str):
        if key not in FIELD_UNITS:
            raise ConfigError(f"{key}: unit strings are not accepted for this field")
        return parse_quantity(value, FIELD_UNITS[key], key)
    if isinstance(value, list):
        return [_convert(key, v) for v in value]
    return value


def _build(cls, table: dict, where: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(table) - names)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {unknown}")
    return {k: _convert(k, v) for k, v in table.items()}


def scenario_from_dict(data: dict) -> ScenarioConfig:
    data = dict(data)
    fl = data.pop("fl", None)
    rotor = data.pop("rotor", None)
    kwargs = _build(ScenarioConfig, data, "scenario")
    for name in ("fl", "rotor"):
        if name in kwargs:
            raise ConfigError(f"{name} must be a table")
    if fl is not None:
        kwargs["fl"] = FLHyperparams(**_build(FLHyperparams, fl, "[fl]"))
    if rotor is not None:
        kwargs["rotor"] = RotorModel(**_build(RotorModel, rotor, "[rotor]"))
    for key in ("area", "q_ini", "q_fin"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    try:
        return ScenarioConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_scenario(path) -> ScenarioConfig:
    with open(Path(path), "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return scenario_from_dict(data)


def scenario_to_toml(cfg: ScenarioConfig) -> str:
    """Plain-SI TOML text that loads back to ``cfg``."""
    lines = []
    nested = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if dataclasses.is_dataclass(v):
            nested.append((f.name, v))
            continue
        lines.append(f"{f.name} = {_toml_value(v)}")
    for name, obj in nested:
        lines.append("")
        lines.append(f"[{name}]")
        for f in dataclasses.fields(obj):
            lines.append(f"{f.name} = {_toml_value(getattr(obj, f.name))}")
    return "\n".join(lines) + "\n"


def _toml_value(v) -> str:
    if hasattr(v, "tolist"):
        v = v.tolist()
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    return repr(float(v))
