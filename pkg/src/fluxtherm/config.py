"""Flat key = value scenario configuration.

One `key = value` per line, '#' comments, a `scenario` key naming the
command. Every command declares its parameter schema; unknown keys are
rejected with the list of valid keys so typos cannot silently fall back to
defaults.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable


class ConfigError(ValueError):
    """Bad scenario configuration; the CLI maps this to exit code 2."""


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError as exc:
        raise ConfigError(f"expected a number, got {text!r}") from exc
    if not math.isfinite(value):
        raise ConfigError(f"numeric parameters must be finite, got {text!r}")
    return value


def _parse_int(text: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"expected an integer, got {text!r}") from exc


def _parse_floats(text: str) -> list[float]:
    values = [_parse_float(part) for part in text.split(",") if part.strip() != ""]
    if not values:
        raise ConfigError(f"expected a comma-separated number list, got {text!r}")
    return values


def _parse_str(text: str) -> str:
    return text.strip()


_REQUIRED = object()


@dataclass(frozen=True)
class Param:
    parse: Callable[[str], object]
    default: object = _REQUIRED

    @property
    def required(self) -> bool:
        return self.default is _REQUIRED


# Parameter schemas per scenario. Float lists are comma-separated.
SCHEMAS: dict[str, dict[str, Param]] = {
    "sg": {
        "variant": Param(_parse_str),
        "p_m": Param(_parse_float, 0.35),
        "unitary_angle": Param(_parse_float, math.pi / 5),
        "pump_q": Param(_parse_float, 1.0),
        "n_steps": Param(_parse_int, 25),
        "beta": Param(_parse_float, 1.0),
        "hypothesis_tol": Param(_parse_float, 1e-3),
        "asymptotic_tol": Param(_parse_float, 1e-10),
        "max_iter": Param(_parse_int, 100_000),
    },
    "nv-pulses": {
        "h_choice": Param(_parse_str),
        "p_m": Param(_parse_float, 0.35),
        "pump_q": Param(_parse_float, 0.5),
        "omega_tau": Param(_parse_float, None),
        "omega": Param(_parse_float, 1.0),
        "delta": Param(_parse_float, None),
        "gamma_b": Param(_parse_float, None),
        "tau": Param(_parse_float, 1.0),
        "n_steps": Param(_parse_int, 40),
        "beta": Param(_parse_float, 1.0),
        "hypothesis_tol": Param(_parse_float, 1e-3),
        "asymptotic_tol": Param(_parse_float, 1e-10),
        "max_iter": Param(_parse_int, 100_000),
    },
    "field-sweep": {
        "beta": Param(_parse_float),
        "delta": Param(_parse_float),
        "b_min": Param(_parse_float, None),
        "b_max": Param(_parse_float, None),
        "b_points": Param(_parse_int, None),
        "b_values": Param(_parse_floats, None),
        "eta_max": Param(_parse_float, None),
        "tol": Param(_parse_float, 1e-12),
    },
    "solve-eta": {
        "energies": Param(_parse_floats),
        "p_inf": Param(_parse_floats),
        "p_init": Param(_parse_floats, None),
        "beta": Param(_parse_float, None),
        "eta_max": Param(_parse_float, None),
        "tol": Param(_parse_float, 1e-12),
    },
    "verify": {
        "seed": Param(_parse_int, None),
        "inject_dbc_violation": Param(_parse_bool, False),
    },
}


@dataclass
class ScenarioConfig:
    scenario: str
    parameters: dict = field(default_factory=dict)
    output_dir: Path = Path("fluxtherm-out")
    formats: tuple[str, ...] = ("csv", "json")
    plot: bool = True

    def __getitem__(self, key: str):
        return self.parameters[key]

    def require(self, key: str, why: str):
        if self.parameters.get(key) is None:
            raise ConfigError(f"missing key '{key}': {why}")
        return self.parameters[key]


def read_key_values(path: Path) -> dict[str, str]:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = stripped.split("=", 1)
        key = key.strip()
        if key in raw:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        raw[key] = value.strip()
    return raw


def build_config(scenario: str, raw: dict[str, str], output_dir: Path,
                 formats: tuple[str, ...], plot: bool) -> ScenarioConfig:
    if scenario not in SCHEMAS:
        raise ConfigError(f"unknown scenario {scenario!r}; valid: {sorted(SCHEMAS)}")
    schema = SCHEMAS[scenario]

    declared = raw.get("scenario")
    if declared is not None and declared != scenario:
        raise ConfigError(
            f"config declares scenario {declared!r} but the command is {scenario!r}")

    unknown = sorted(k for k in raw if k != "scenario" and k not in schema)
    if unknown:
        raise ConfigError(
            f"unknown keys {unknown} for scenario {scenario!r}; "
            f"valid keys: {sorted(schema)}")

    params: dict[str, object] = {}
    for key, spec in schema.items():
        if key in raw:
            params[key] = spec.parse(raw[key])
        elif spec.required:
            raise ConfigError(f"missing required key '{key}' for scenario {scenario!r}")
        else:
            params[key] = spec.default
    return ScenarioConfig(scenario=scenario, parameters=params,
                          output_dir=Path(output_dir), formats=formats, plot=plot)


def load_config(scenario: str, config_path: Path | None, output_dir: Path,
                formats: tuple[str, ...], plot: bool) -> ScenarioConfig:
    raw = read_key_values(config_path) if config_path else {}
    return build_config(scenario, raw, output_dir, formats, plot)
