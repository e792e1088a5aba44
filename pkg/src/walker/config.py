"""Scenario configuration files.

A scenario is a TOML document with top-level ``n_steps`` and ``seed`` and the
tables ``[model]``, ``[gait]``, ``[gains]``, ``[terrain]``, ``[sim]`` and
``[output]``. Every table and key is optional; missing values take the
library defaults. Validation errors carry the line of the offending key.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import tomli
import tomli_w

from .gait_synthesis import GaitParams
from .rigid_body import RobotModel
from .simulator import SimOptions
from .task_space_controller import ControllerGains
from .terrain import Terrain, TerrainMode, explicit, flat, random_stones, stairs

# stones generated beyond n_steps so the last step still has a two-step preview
TERRAIN_MARGIN = 2


class ConfigError(ValueError):
    """Invalid scenario; ``line`` is 1-based when the location is known."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.message = message
        self.line = line
        self.source = source
        super().__init__(str(self))

    def __str__(self):
        where = self.source or "<config>"
        if self.line is not None:
            where += f":{self.line}"
        return f"{where}: {self.message}"


@dataclass(frozen=True)
class TerrainSpec:
    mode: TerrainMode = TerrainMode.FLAT
    l_des: float = 0.7
    h_des: float = 0.0
    stones: tuple[tuple[float, float], ...] = ()
    distance_range: tuple[float, float] = (0.2, 0.7)
    height_range: tuple[float, float] = (-0.25, 0.25)

    def __post_init__(self):
        object.__setattr__(self, "mode", TerrainMode(self.mode))
        object.__setattr__(self, "stones", tuple(tuple(map(float, s)) for s in self.stones))
        object.__setattr__(self, "distance_range", tuple(map(float, self.distance_range)))
        object.__setattr__(self, "height_range", tuple(map(float, self.height_range)))
        if self.mode is TerrainMode.EXPLICIT and not self.stones:
            raise ValueError("explicit terrain needs a non-empty 'stones' list")
        if any(len(s) != 2 for s in self.stones):
            raise ValueError("each stone must be a [distance, height] pair")
        lo, hi = self.distance_range
        if not 0 < lo <= hi:
            raise ValueError("distance_range must satisfy 0 < lo <= hi")
        if self.height_range[0] > self.height_range[1]:
            raise ValueError("height_range must satisfy lo <= hi")

    def build(self, n_steps: int, seed: int) -> Terrain:
        n = n_steps + TERRAIN_MARGIN
        if self.mode is TerrainMode.FLAT:
            return flat(self.l_des, n)
        if self.mode is TerrainMode.STAIRS:
            return stairs(self.l_des, self.h_des, n)
        if self.mode is TerrainMode.RANDOM:
            return random_stones(n, seed, self.distance_range, self.height_range)
        return explicit(self.stones)

    def to_dict(self) -> dict:
        d = {"mode": self.mode.value, "l_des": self.l_des, "h_des": self.h_des,
             "distance_range": list(self.distance_range),
             "height_range": list(self.height_range)}
        if self.stones:
            d["stones"] = [list(s) for s in self.stones]
        return d


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "logs"
    trajectory: str = "trajectory.csv"
    steps: str = "steps.csv"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class ScenarioConfig:
    model: RobotModel = field(default_factory=RobotModel)
    gait: GaitParams = field(default_factory=GaitParams)
    gains: ControllerGains = field(default_factory=ControllerGains)
    terrain: TerrainSpec = field(default_factory=TerrainSpec)
    sim: SimOptions = field(default_factory=SimOptions)
    output: OutputSpec = field(default_factory=OutputSpec)
    n_steps: int = 50
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.n_steps, bool) or not isinstance(self.n_steps, int) or self.n_steps < 1:
            raise ValueError("n_steps must be a positive integer")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        if self.terrain.mode is TerrainMode.EXPLICIT and len(self.terrain.stones) < self.n_steps:
            raise ValueError(f"explicit terrain has {len(self.terrain.stones)} stones "
                             f"but n_steps is {self.n_steps}")

    def build_terrain(self) -> Terrain:
        return self.terrain.build(self.n_steps, self.seed)

    def with_overrides(self, *, n_steps: int | None = None, seed: int | None = None,
                       terrain: str | None = None) -> ScenarioConfig:
        """Copy with command-line overrides applied (re-validated)."""
        changes: dict[str, Any] = {}
        if n_steps is not None:
            changes["n_steps"] = n_steps
        if seed is not None:
            changes["seed"] = seed
        if terrain is not None:
            changes["terrain"] = dataclasses.replace(self.terrain, mode=TerrainMode(terrain))
        try:
            return dataclasses.replace(self, **changes)
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def to_dict(self) -> dict:
        gait = dataclasses.asdict(self.gait)
        gait["energy_band"] = list(self.gait.energy_band)
        return {
            "n_steps": self.n_steps,
            "seed": self.seed,
            "model": self.model.to_dict(),
            "gait": gait,
            "gains": self.gains.to_dict(),
            "terrain": self.terrain.to_dict(),
            "sim": dataclasses.asdict(self.sim),
            "output": self.output.to_dict(),
        }

    def __eq__(self, other):
        if not isinstance(other, ScenarioConfig):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = None


_SECTIONS = {
    "model": RobotModel,
    "gait": GaitParams,
    "gains": ControllerGains,
    "terrain": TerrainSpec,
    "sim": SimOptions,
    "output": OutputSpec,
}
_TOP_LEVEL = {"n_steps", "seed"}


def _key_line(text: str, section: str | None, key: str | None) -> int | None:
    """Line of ``key`` inside ``[section]`` (or of the section header itself)."""
    current = None
    header_line = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        m = re.match(r"^\[\s*([A-Za-z0-9_.-]+)\s*\]$", line)
        if m:
            current = m.group(1)
            if current == section:
                header_line = i
            continue
        if key is not None and current == section and re.match(rf"^{re.escape(key)}\s*=", line):
            return i
    return header_line


def _check_type(value, expected, where: str):
    if expected is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if expected is float and not isinstance(value, float):
        raise TypeError(f"{where} must be a number, got {value!r}")
    if expected is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise TypeError(f"{where} must be an integer, got {value!r}")
    return value


def _field_types(cls) -> dict[str, Any]:
    # annotations are strings under postponed evaluation
    out = {}
    for f in dataclasses.fields(cls):
        if not f.init:
            continue
        t = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
        out[f.name] = float if t in ("float", "float | None") else None
    return out


def _build_section(name: str, table: dict, text: str, source: str | None):
    cls = _SECTIONS[name]
    fields = _field_types(cls)
    kwargs = {}
    for key, value in table.items():
        line = _key_line(text, name, key)
        if key not in fields:
            raise ConfigError(f"unknown key '{key}' in [{name}]", line, source)
        try:
            kwargs[key] = _check_type(value, fields[key], f"{name}.{key}") if fields[key] else value
        except TypeError as e:
            raise ConfigError(str(e), line, source) from e
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as e:
        # point at the key named in the message when there is one
        line = None
        for key in table:
            if key in str(e):
                line = _key_line(text, name, key)
                break
        if line is None:
            line = _key_line(text, name, None)
        raise ConfigError(f"[{name}] {e}", line, source) from e


def loads(text: str, source: str | None = None) -> ScenarioConfig:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as e:
        raise ConfigError(f"syntax error: {e.msg}", e.lineno, source) from e
    kwargs: dict[str, Any] = {}
    for key, value in doc.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"'{key}' must be a table", _key_line(text, None, key), source)
            kwargs[key] = _build_section(key, value, text, source)
        elif key in _TOP_LEVEL:
            line = _key_line(text, None, key)
            try:
                kwargs[key] = _check_type(value, int, key)
            except TypeError as e:
                raise ConfigError(str(e), line, source) from e
        else:
            # either a bare key or a [table] header
            line = _key_line(text, None, key) or _key_line(text, key, None)
            raise ConfigError(f"unknown top-level key '{key}'", line, source)
    try:
        return ScenarioConfig(**kwargs)
    except ValueError as e:
        msg = str(e)
        if "explicit terrain" in msg:
            line = _key_line(text, "terrain", "stones")
        elif "n_steps" in msg:
            line = _key_line(text, None, "n_steps")
        elif "seed" in msg:
            line = _key_line(text, None, "seed")
        else:
            line = None
        raise ConfigError(msg, line, source) from e


def load(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e.strerror}", None, str(path)) from e
    return loads(text, str(path))


def _drop_none(d):
    if isinstance(d, dict):
        return {k: _drop_none(v) for k, v in d.items() if v is not None}
    return d


def dumps(config: ScenarioConfig) -> str:
    return tomli_w.dumps(_drop_none(config.to_dict()))


def dump(config: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(dumps(config))
