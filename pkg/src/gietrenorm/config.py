"""Run configuration shared by the command line and the scripts."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

OUT_ENV = "GIETRENORM_OUT"
ACCELERATIONS = ("elementary", "zorich", "good-returns")
PRECISIONS = ("double", "extended")


@dataclass
class Thresholds:
    """Tunable cut-offs of the diagnostics."""

    v_factor: float = 10.0
    escape: float = 50.0
    residual: float = 0.1
    min_growth: float = 1e3
    mesh_floor: float = 1e-3
    floor_budget: int = 10**6
    C_max: float = 1e3
    persistence: int = 3
    window: int = 120
    lyapunov_min_steps: int = 500

    @classmethod
    def from_dict(cls, data: dict) -> "Thresholds":
        return _build(cls, data, "thresholds")


@dataclass
class RunConfig:
    """Everything a command needs; ``out`` does not enter the hash."""

    map: dict = field(default_factory=lambda: {"fixture": "golden"})
    steps: int = 30
    acceleration: str = "zorich"
    seed: int = 0
    precision: str = "double"
    dps: int = 60
    out: str | None = None
    thresholds: Thresholds = field(default_factory=Thresholds)

    def __post_init__(self):
        if isinstance(self.thresholds, dict):
            self.thresholds = Thresholds.from_dict(self.thresholds)
        self.validate()

    def validate(self) -> None:
        if not isinstance(self.map, dict):
            raise ConfigError("map must be a JSON object")
        if not isinstance(self.steps, int) or self.steps < 0:
            raise ConfigError(f"steps must be a non-negative integer, got {self.steps!r}")
        if self.acceleration not in ACCELERATIONS:
            raise ConfigError(f"acceleration must be one of {ACCELERATIONS}")
        if self.precision not in PRECISIONS:
            raise ConfigError(f"precision must be one of {PRECISIONS}")
        if not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        if not isinstance(self.dps, int) or self.dps < 20:
            raise ConfigError("dps must be an integer >= 20")
        if not isinstance(self.thresholds, Thresholds):
            raise ConfigError("thresholds must be a JSON object")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        return _build(cls, data, "config")

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})

    def hash(self) -> str:
        data = self.to_dict()
        data.pop("out")
        blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def out_dir(self) -> Path:
        return Path(self.out or os.environ.get(OUT_ENV) or "gietrenorm-out")


def _build(cls, data, what: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{what} must be a JSON object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown {what} keys: {', '.join(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"bad {what}: {exc}") from exc
