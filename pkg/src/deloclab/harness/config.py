"""Flat ``key = value`` experiment configuration.

The first non-comment line must be ``schema = 1``. Values are typed by the
field table below; lists are comma separated. Unknown keys are errors.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

__all__ = ["ConfigError", "ExperimentConfig", "EXPERIMENTS", "parse_config", "load_config", "SCHEMA"]

SCHEMA = 1

EXPERIMENTS = (
    "deloc-sup",
    "deloc-iso",
    "gumbel",
    "emf-duality",
    "emf-stationarity",
    "levelrep-tail",
    "reg-audit",
    "dbm-stationarity",
    "decimation",
)

ENSEMBLES = ("goe", "gue", "bernoulli", "matched")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, msg: str):
        super().__init__(f"{field_name}: {msg}")
        self.field = field_name


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    ensemble: str = "goe"
    N: tuple = (100,)
    replicas: int = 10
    seed: int = 0
    workers: int = 1
    out: str = "results"
    format: str = "csv"
    # experiment parameters
    m4: float = 3.0
    t: float = 0.3
    t2: float = 0.5
    n_particles: int = 1
    delta: float = 0.1
    eps: float = 0.02
    delta1: float = 0.1
    a: float = 1.0
    ks: tuple = (1, 2, 3)
    energy: float = 0.0
    index: int = 0  # 0 means the middle index
    n_steps: int = 10
    batch: int = 250
    configs: int = 10
    intervals: tuple = (-0.3, 0.2)
    threshold: float = 2.5
    extra: dict = field(default_factory=dict)

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError("experiment", f"unknown experiment {self.experiment!r}")
        if self.ensemble not in ENSEMBLES:
            raise ConfigError("ensemble", f"unknown ensemble {self.ensemble!r}")
        if self.replicas < 1:
            raise ConfigError("replicas", "must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers", "must be >= 1")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed", "must be an unsigned 64-bit integer")
        if not self.N or any(n < 1 for n in self.N):
            raise ConfigError("N", "must be a non-empty list of positive integers")
        if self.format not in ("csv", "json"):
            raise ConfigError("format", "must be csv or json")
        if self.m4 < 1:
            raise ConfigError("m4", "must be >= 1")
        if self.t < 0 or self.t2 < 0:
            raise ConfigError("t", "times must be >= 0")
        if self.n_particles < 0:
            raise ConfigError("n_particles", "must be >= 0")
        if self.n_steps < 1:
            raise ConfigError("n_steps", "must be >= 1")
        if len(self.intervals) % 2:
            raise ConfigError("intervals", "needs an even number of endpoints")
        if self.experiment == "gumbel" and min(self.N) < 3:
            raise ConfigError("N", "gumbel statistic needs N >= 3")
        if self.experiment == "levelrep-tail" and self.replicas < 100:
            raise ConfigError("replicas", "levelrep-tail needs >= 100 replicas")
        if self.experiment == "emf-duality" and self.batch < 2:
            raise ConfigError("batch", "must be >= 2")
        return self

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw).validate()

    def echo(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}
_INT_LISTS = {"N", "ks"}
_FLOAT_LISTS = {"intervals"}


def _coerce(key: str, raw: str):
    t = _TYPES[key]
    try:
        if key in _INT_LISTS:
            return tuple(int(x) for x in raw.split(",") if x.strip())
        if key in _FLOAT_LISTS:
            return tuple(float(x) for x in raw.split(",") if x.strip())
        if t in ("int", int):
            return int(raw)
        if t in ("float", float):
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(key, f"cannot parse {raw!r} ({exc})") from None


def parse_config(text: str, **overrides) -> ExperimentConfig:
    vals: dict = {}
    schema_seen = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, raw = (p.strip() for p in s.split("=", 1))
        if not schema_seen:
            if key != "schema":
                raise ConfigError("schema", "first entry must be 'schema = 1'")
            if raw != str(SCHEMA):
                raise ConfigError("schema", f"unsupported schema version {raw!r}")
            schema_seen = True
            continue
        if key in ("schema", "extra") or key not in _TYPES:
            raise ConfigError(key, "unknown key")
        vals[key] = _coerce(key, raw)
    if not schema_seen:
        raise ConfigError("schema", "missing 'schema = 1' line")
    for k, v in overrides.items():
        if v is not None:
            vals[k] = v
    if "experiment" not in vals:
        raise ConfigError("experiment", "required")
    return ExperimentConfig(**vals).validate()


def load_config(path, **overrides) -> ExperimentConfig:
    return parse_config(Path(path).read_text(), **overrides)
