"""Experiment configuration in flat ``section.key = value`` text form.

Blank lines and ``#`` comments are ignored; unknown keys are an error. The
environment variable ``FSAMLAB_SEED`` overrides ``run.seed`` when a config is
loaded from disk.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigError
from .models import ModelSpec
from .optim import OptimHyper
from .sam import SamConfig

SEED_ENV = "FSAMLAB_SEED"


@dataclass(frozen=True)
class RunSection:
    name: str = "run"
    seed: int = 0
    steps: int = 2000
    batch_size: int = 32
    eval_every: int = 100
    output_dir: Optional[str] = None
    probe_dirs: int = 0
    probe_rho: float = 1e-2


@dataclass(frozen=True)
class ModelSection:
    kind: str = "mlp"
    layers: tuple = (2, 16, 2)
    activation: str = "tanh"
    loss: str = "cross_entropy"
    init: str = "uniform"

    @property
    def spec(self) -> ModelSpec:
        return ModelSpec(self.kind, self.layers, self.activation, self.loss)


@dataclass(frozen=True)
class DataSection:
    kind: str = "two_gaussians"
    n: int = 500
    noise: float = 0.1
    seed: int = 0
    n_eval: int = 500
    train_csv: Optional[str] = None
    eval_csv: Optional[str] = None
    subsample_rate: float = 1.0


@dataclass(frozen=True)
class SamSection:
    enabled: bool = False
    rho: float = 1e-2

    @property
    def core(self) -> SamConfig:
        return SamConfig(self.rho)


@dataclass(frozen=True)
class FsamSection:
    enabled: bool = False
    sparse_ratio: float = 0.9
    interval: int = 100
    n_fisher: Optional[int] = None


@dataclass(frozen=True)
class LandscapeSection:
    grid_n: int = 25
    range: float = 1.0
    n_alphas: int = 41
    n_eval: int = 256
    seed: int = 0


SECTIONS = {
    "run": RunSection,
    "model": ModelSection,
    "data": DataSection,
    "optim": OptimHyper,
    "sam": SamSection,
    "fsam": FsamSection,
    "landscape": LandscapeSection,
}


def _parse_value(raw: str, type_name: str, key: str):
    raw = raw.strip()
    optional = type_name.startswith("Optional[")
    base = type_name[len("Optional["):-1] if optional else type_name
    if optional and raw.lower() in ("", "none"):
        return None
    try:
        if base == "bool":
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if base == "int":
            return int(raw)
        if base == "float":
            return float(raw)
        if base == "tuple":
            return tuple(int(v) for v in raw.split(","))
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class ExperimentConfig:
    run: RunSection = field(default_factory=RunSection)
    model: ModelSection = field(default_factory=ModelSection)
    data: DataSection = field(default_factory=DataSection)
    optim: OptimHyper = field(default_factory=OptimHyper)
    sam: SamSection = field(default_factory=SamSection)
    fsam: FsamSection = field(default_factory=FsamSection)
    landscape: LandscapeSection = field(default_factory=LandscapeSection)

    @property
    def mode(self) -> str:
        if self.fsam.enabled:
            return "fsam"
        return "sam" if self.sam.enabled else "base"

    def validate(self) -> "ExperimentConfig":
        r = self.run
        if r.steps < 1 or r.batch_size < 1 or r.eval_every < 1:
            raise ConfigError("run.steps, run.batch_size and run.eval_every must be >= 1")
        self.model.spec  # raises on a bad model section
        if self.model.init not in ("uniform", "zeros"):
            raise ConfigError(f"unknown model.init {self.model.init!r}")
        if not 0 < self.data.subsample_rate <= 1:
            raise ConfigError("data.subsample_rate must be in (0, 1]")
        if self.data.train_csv is None and self.data.n < 2:
            raise ConfigError("data.n must be >= 2")
        if not 0 <= self.fsam.sparse_ratio <= 1:
            raise ConfigError("fsam.sparse_ratio must be in [0, 1]")
        if self.fsam.interval < 1:
            raise ConfigError("fsam.interval must be >= 1")
        if self.fsam.n_fisher is not None and self.fsam.n_fisher < 1:
            raise ConfigError("fsam.n_fisher must be >= 1")
        if self.landscape.grid_n < 2:
            raise ConfigError("landscape.grid_n must be >= 2")
        return self

    def override(self, values: dict) -> "ExperimentConfig":
        """Copy with dotted keys replaced, e.g. ``{"sam.rho": 0.0}``."""
        grouped: dict = {}
        for key, value in values.items():
            section, name = _split_key(key)
            if isinstance(value, str):
                value = _parse_value(value, _field_type(section, name), key)
            grouped.setdefault(section, {})[name] = value
        try:
            parts = {s: dataclasses.replace(getattr(self, s), **kw) for s, kw in grouped.items()}
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        return dataclasses.replace(self, **parts)

    def to_dict(self) -> dict:
        out = {}
        for section in SECTIONS:
            obj = getattr(self, section)
            for f in dataclasses.fields(obj):
                out[f"{section}.{f.name}"] = getattr(obj, f.name)
        return out

    def to_text(self) -> str:
        return "".join(f"{k} = {_format_value(v)}\n" for k, v in self.to_dict().items())

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        values = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'section.key = value'")
            key, raw = (p.strip() for p in line.split("=", 1))
            values[key] = raw
        return cls().override(values).validate()


def _split_key(key: str):
    section, _, name = key.partition(".")
    if section not in SECTIONS or name not in {f.name for f in dataclasses.fields(SECTIONS[section])}:
        raise ConfigError(f"unknown config key {key!r}")
    return section, name


def _field_type(section: str, name: str) -> str:
    for f in dataclasses.fields(SECTIONS[section]):
        if f.name == name:
            return f.type if isinstance(f.type, str) else f.type.__name__
    raise ConfigError(f"unknown config key {section}.{name}")


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        cfg = ExperimentConfig.from_text(fh.read())
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        cfg = cfg.override({"run.seed": env})
    return cfg
