"""
Run configuration: flat key=value files.

    # e23 = (0, 1, 0.6, 0, 0), controlled
    a=-0.45
    b=1
    ...
    controlled=true

Keys: a, b, c1, c2, c3, q, k, m, h, N, epsilon, controlled, out, perturbation.
"""
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from core_types import ConfigError, Equilibrium, IntegratorConfig, ParamSet

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_FILE = "run.cfg"
THREADS_ENV = "FRACTODA_THREADS"

KEY_ORDER = ("a", "b", "c1", "c2", "c3", "q", "k", "m", "h", "N", "epsilon", "controlled", "out", "perturbation")
REQUIRED_KEYS = ("a", "b", "c1", "c2", "c3", "q")
DEFAULTS = {"k": 0.0, "m": 0.0, "h": 0.01, "N": 100, "epsilon": 0.01, "controlled": True}


@dataclass(frozen=True)
class RunConfig:
    params: ParamSet
    equilibrium: Equilibrium
    integrator: IntegratorConfig
    controlled: bool = True
    out: Optional[str] = None

    def with_overrides(self, **overrides):
        """
        Copy with selected keys replaced; None values are ignored so that
        unset CLI flags leave file values alone.
        """
        values = to_dict(self)
        values.update({key: value for key, value in overrides.items() if value is not None})
        return from_dict(values)


def format_number(value) -> str:
    """Shortest round-trip positional text: 0.61 -> '0.61', 5.0 -> '5'."""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return np.format_float_positional(float(value), trim="-")


def _parse_float(key, text):
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"Key '{key}' expects a number, got '{text}'.") from None
    if not math.isfinite(value):
        raise ConfigError(f"Key '{key}' must be finite, got '{text}'.")
    return value


def _parse_int(key, text):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"Key '{key}' expects an integer, got '{text}'.") from None


def _parse_bool(key, text):
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ConfigError(f"Key '{key}' expects true/false, got '{text}'.")


def _parse_vector(key, text):
    parts = [part for part in text.replace(" ", "").split(",") if part]
    if len(parts) != 5:
        raise ConfigError(f"Key '{key}' expects 5 comma-separated numbers, got '{text}'.")
    return tuple(_parse_float(key, part) for part in parts)


def parse_value(key, text):
    if key == "N":
        return _parse_int(key, text)
    if key == "controlled":
        return _parse_bool(key, text)
    if key == "out":
        return text
    if key == "perturbation":
        return _parse_vector(key, text)
    return _parse_float(key, text)


def parse_config_text(text: str) -> dict:
    """
    Parse key=value lines into a dict of typed values.

    Raises:
        ConfigError: On malformed lines or values.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"Line {lineno}: expected key=value, got '{line}'.")
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in KEY_ORDER:
            logger.warning("Ignoring unknown config key '%s' on line %d.", key, lineno)
            continue
        values[key] = parse_value(key, value)
    return values


def from_dict(values: dict) -> RunConfig:
    missing = [key for key in REQUIRED_KEYS if key not in values]
    if missing:
        raise ConfigError(f"Missing required config keys: {', '.join(missing)}")
    merged = {**DEFAULTS, **values}
    params = ParamSet(*(float(merged[key]) for key in REQUIRED_KEYS))
    integrator = IntegratorConfig(
        h=float(merged["h"]),
        N=merged["N"],
        epsilon=float(merged["epsilon"]),
        perturbation=merged.get("perturbation"),
    )
    return RunConfig(
        params=params,
        equilibrium=Equilibrium(float(merged["k"]), float(merged["m"])),
        integrator=integrator,
        controlled=bool(merged["controlled"]),
        out=merged.get("out"),
    )


def to_dict(cfg: RunConfig) -> dict:
    p, integ = cfg.params, cfg.integrator
    values = {
        "a": p.a, "b": p.b, "c1": p.c1, "c2": p.c2, "c3": p.c3, "q": p.q,
        "k": cfg.equilibrium.k, "m": cfg.equilibrium.m,
        "h": integ.h, "N": integ.N, "epsilon": integ.epsilon,
        "controlled": cfg.controlled,
    }
    if cfg.out is not None:
        values["out"] = cfg.out
    if integ.perturbation is not None:
        values["perturbation"] = integ.perturbation
    return values


def format_config(cfg: RunConfig) -> str:
    values = to_dict(cfg)
    lines = []
    for key in KEY_ORDER:
        if key not in values:
            continue
        value = values[key]
        if key == "controlled":
            text = "true" if value else "false"
        elif key == "out":
            text = str(value)
        elif key == "perturbation":
            text = ",".join(format_number(v) for v in value)
        else:
            text = format_number(value)
        lines.append(f"{key}={text}")
    return "\n".join(lines) + "\n"


def load_config(file_path=DEFAULT_CONFIG_FILE) -> RunConfig:
    """
    Load a run configuration from a key=value file.

    Args:
        file_path (str | Path): Path to the config file.

    Returns:
        RunConfig: Parsed configuration with defaults filled in.

    Raises:
        ConfigError: If the file is missing or malformed.
    """
    try:
        with open(file_path, "r") as f:
            text = f.read()
    except FileNotFoundError:
        raise ConfigError(f"Config file {file_path} not found.") from None
    return from_dict(parse_config_text(text))


def save_config(cfg: RunConfig, file_path=DEFAULT_CONFIG_FILE):
    Path(file_path).write_text(format_config(cfg), newline="\n")


def sweep_threads() -> int:
    """Worker cap for sweeps: FRACTODA_THREADS if valid, else the CPU count."""
    default = os.cpu_count() or 1
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return default
    try:
        threads = int(raw)
    except ValueError:
        threads = 0
    if threads < 1:
        logger.warning("Ignoring invalid %s=%r; using %d workers.", THREADS_ENV, raw, default)
        return default
    return threads
