"""Declarative experiment configs: versioned key-value text files.

Format: one ``key = value`` per line, ``#`` comments, blank lines ignored.
Example::

    schema = 1
    task = verify-identities
    seed = 7
    dim = 5
    order = 3
    window = -2, 2
    output = out

Unknown keys and type mismatches raise :class:`ConfigError` naming the key.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError

SCHEMA_VERSION = 1

TASKS = ("remainder", "ssf", "verify-identities", "verify-bounds", "bump", "constants")


def _parse_int(key, raw):
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected integer, got {raw!r}") from exc


def _parse_float(key, raw):
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected number, got {raw!r}") from exc


def _parse_pair(key, raw):
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"{key}: expected two comma-separated numbers, got {raw!r}")
    return (_parse_float(key, parts[0]), _parse_float(key, parts[1]))


def _parse_list(key, raw):
    return tuple(p.strip() for p in raw.split(",") if p.strip())


_FIELDS = {
    "schema": _parse_int,
    "task": lambda k, v: v,
    "seed": _parse_int,
    "dim": _parse_int,
    "order": _parse_int,
    "algebra": lambda k, v: v,
    "window": _parse_pair,
    "eps": _parse_float,
    "a": _parse_float,
    "b": _parse_float,
    "grid_size": _parse_int,
    "samples": _parse_int,
    "instances": _parse_int,
    "fixtures": _parse_int,
    "depth": _parse_int,
    "output": lambda k, v: v,
    "store": lambda k, v: v,
    "workers": _parse_int,
    "plots": _parse_list,
    "dump_elements": lambda k, v: v.lower() in ("1", "true", "yes"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    task: str
    seed: int = 1
    dim: int = 5
    order: int = 2
    algebra: str | None = None
    window: tuple[float, float] = (-2.0, 2.0)
    eps: float = 0.5
    a: float | None = None
    b: float | None = None
    grid_size: int = 257
    samples: int = 200
    instances: int = 40
    fixtures: int = 10
    depth: int = 6
    output: str | None = None
    store: str | None = None
    workers: int = 1
    plots: tuple[str, ...] | None = None
    dump_elements: bool = False
    raw: dict = field(default_factory=dict)


def parse_config(text: str) -> ExperimentConfig:
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in _FIELDS:
            raise ConfigError(f"unknown key {key!r} (line {lineno})")
        if key in values:
            raise ConfigError(f"duplicate key {key!r} (line {lineno})")
        values[key] = _FIELDS[key](key, raw)
    if values.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"schema: expected {SCHEMA_VERSION}, got {values.get('schema')!r}")
    task = values.get("task")
    if task not in TASKS:
        raise ConfigError(f"task: expected one of {TASKS}, got {task!r}")
    if task == "bump":
        for req in ("a", "b", "eps"):
            if req not in values:
                raise ConfigError(f"{req}: required for the bump task")
    kwargs = {k: v for k, v in values.items() if k != "schema"}
    return ExperimentConfig(raw=dict(values), **kwargs)


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
