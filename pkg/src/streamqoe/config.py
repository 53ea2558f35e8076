"""``key = value`` experiment files."""
from __future__ import annotations

import dataclasses
from pathlib import Path

from .experiments import ExperimentConfig


class ConfigError(ValueError):
    """Malformed or unknown entry in an experiment file."""


def _as_file_size(text: str):
    return "auto" if text.strip().lower() == "auto" else float(text)


def _as_policies(text: str) -> tuple:
    return tuple(p.strip() for p in text.split(",") if p.strip())


_PARSERS = {
    "r0": float,
    "rc": float,
    "eps": float,
    "d_min": float,
    "d_max": float,
    "d_step": float,
    "policies": _as_policies,
    "trials": int,
    "master_seed": int,
    "file_size": _as_file_size,
    "truncation_tol": float,
    "output": str,
}
assert set(_PARSERS) == {f.name for f in dataclasses.fields(ExperimentConfig)}


def parse_value(key: str, text: str):
    if key not in _PARSERS:
        raise ConfigError(f"unknown key '{key}' (known: {', '.join(sorted(_PARSERS))})")
    try:
        return _PARSERS[key](text.strip())
    except ValueError as err:
        raise ConfigError(f"bad value for '{key}': {text.strip()!r} ({err})") from None


def read_entries(path) -> dict:
    """Parse a file into raw typed values without applying defaults."""
    entries = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in entries:
            raise ConfigError(f"{path}:{lineno}: duplicate key '{key}'")
        entries[key] = parse_value(key, value)
    return entries


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Defaults, then the file (if given), then non-``None`` overrides."""
    values = read_entries(path) if path is not None else {}
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _PARSERS:
            raise ConfigError(f"unknown key '{key}'")
        values[key] = value
    try:
        return ExperimentConfig(**values)
    except ValueError as err:
        raise ConfigError(str(err)) from None
