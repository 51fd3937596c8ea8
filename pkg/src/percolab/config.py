"""Strict experiment configuration files.

A configuration is a TOML file with a few top-level keys and one section
named after the command::

    command = "sweep"
    name = "alpha-half"
    seed = 7
    workers = 1

    [sweep]
    alpha = 0.5
    deltas = [0.015625, 0.0078125, 0.00390625]

Unknown keys or sections are rejected, and every default is filled in so the
resolved configuration written to the manifest is complete.
"""
from __future__ import annotations

import sys
from dataclasses import MISSING, asdict, dataclass, field, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    """Invalid, unreadable or inconsistent configuration."""


@dataclass
class XprobConfig:
    ns: list = field(default_factory=lambda: [16, 32, 64])
    ps: list = field(default_factory=lambda: [0.5])
    replicas: int = 1000
    color: str = "w"


@dataclass
class CorrlenConfig:
    ps: list = field(default_factory=lambda: [0.6, 0.58, 0.55, 0.53, 0.52])
    epsilon: float = 0.1
    n_max: int = 512
    replicas: int = 256
    max_replicas: int = 16384
    fit: bool = False


@dataclass
class PplusConfig:
    ns: list = field(default_factory=lambda: [8, 16, 32])
    epsilons: list = field(default_factory=lambda: [0.1])
    replicas: int = 256
    rel_width: float = 0.1
    max_replicas: int = 16384


@dataclass
class LoopsConfig:
    p: float = 0.5
    L: int = 64
    delta: float = 1.0
    configs: int = 1
    mode: str = "plane"


@dataclass
class EventsConfig:
    events: list = field(default_factory=lambda: ["H^w(16)"])
    p: float = 0.5
    L: int = 64
    delta: float = 1.0
    replicas: int = 1000


@dataclass
class SweepConfig:
    alpha: float = 0.75
    # ``lambda`` in the file; a Python keyword, so stored under another name
    lam: float = 1.0
    deltas: list = field(default_factory=lambda: [1 / 64, 1 / 128, 1 / 256])
    epsilon: float = 0.1
    window: float = 1.0
    replicas: int = 2000
    thresholds: list = field(default_factory=lambda: [0.3, 3.0])
    band: list = field(default_factory=list)
    fk: list = field(default_factory=lambda: [0, 1])
    cdf_points: int = 16
    max_truncation: float = 0.2
    probe_replicas: int = 256
    probe_max_replicas: int = 8192
    band_rel_width: float = 0.5
    band_max_replicas: int = 16384


@dataclass
class MetricConfig:
    dump: str = ""
    h: float = 0.01
    max_loops: int = 0
    min_vertices: int = 0


SECTIONS = {
    "xprob": XprobConfig,
    "corrlen": CorrlenConfig,
    "pplus": PplusConfig,
    "loops": LoopsConfig,
    "events": EventsConfig,
    "sweep": SweepConfig,
    "metric": MetricConfig,
}
TOP_KEYS = ("command", "name", "seed", "workers")
_ALIASES = {"sweep": {"lambda": "lam"}}


@dataclass
class RunConfig:
    command: str
    name: str
    seed: int | None
    workers: int
    params: object
    base_dir: Path = Path(".")

    def resolved(self) -> dict:
        params = asdict(self.params)
        if self.command == "sweep":
            params["lambda"] = params.pop("lam")
        return {"command": self.command, "name": self.name, "seed": self.seed,
                "workers": self.workers, self.command: params}


def _coerce(section: str, key: str, value, default):
    where = f"[{section}] {key}"
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        return value
    return value


def _default(f):
    if f.default is not MISSING:
        return f.default
    return f.default_factory()


def build_params(command: str, table: dict | None):
    if command not in SECTIONS:
        raise ConfigError(f"unknown command {command!r}; choose from {sorted(SECTIONS)}")
    cls = SECTIONS[command]
    table = dict(table or {})
    alias = _ALIASES.get(command, {})
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in table.items():
        name = alias.get(key, key)
        if name not in known or (name in alias.values() and key == name):
            raise ConfigError(f"unknown key {key!r} in [{command}]")
        kwargs[name] = _coerce(command, key, value, _default(known[name]))
    return cls(**kwargs)


def parse_config(data: dict, command: str | None = None, base_dir: Path = Path(".")) -> RunConfig:
    """Validate a parsed TOML tree; ``command`` (from the CLI) must agree
    with the file's ``command`` key when both are present."""
    data = dict(data)
    for key in data:
        if key not in TOP_KEYS and key not in SECTIONS:
            raise ConfigError(f"unknown top-level key or section {key!r}")
    file_cmd = data.get("command")
    if file_cmd is not None and not isinstance(file_cmd, str):
        raise ConfigError("command must be a string")
    if command and file_cmd and command != file_cmd:
        raise ConfigError(f"config is for {file_cmd!r}, not {command!r}")
    cmd = command or file_cmd
    if cmd is None:
        raise ConfigError("no command given (set `command` in the config or use a subcommand)")
    if cmd not in SECTIONS:
        raise ConfigError(f"unknown command {cmd!r}; choose from {sorted(SECTIONS)}")
    extra = [s for s in SECTIONS if s in data and s != cmd]
    if extra:
        raise ConfigError(f"section(s) {extra} do not belong to command {cmd!r}")
    seed = data.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or seed < 0):
        raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")
    workers = data.get("workers", 1)
    if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
        raise ConfigError(f"workers must be a positive integer, got {workers!r}")
    name = data.get("name", cmd)
    if not isinstance(name, str):
        raise ConfigError("name must be a string")
    section = data.get(cmd, {})
    if not isinstance(section, dict):
        raise ConfigError(f"[{cmd}] must be a table")
    return RunConfig(cmd, name, seed, workers, build_params(cmd, section), base_dir)


def load_config(path, command: str | None = None) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data, command, path.resolve().parent)
