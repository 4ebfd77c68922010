"""Experiment configuration: nested dataclasses loaded from a YAML file.

Unknown keys are rejected so that typos fail loudly. Every default either
follows the training protocol this package reproduces (Adam at 1e-3,
plateau halving after 10 epochs, dropout 0.2, input reversal, K=10,
lambda=0.5, gamma=0.5, MLP dropout 0.5) or is a documented choice.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .augment import AugmentConfig
from .datasets import BoundarySpec, SinusoidSpec
from .optim import TrainConfig


class ConfigError(ValueError):
    pass


VARIANTS = {
    "baseline": None,
    "noise": AugmentConfig(operator="noise"),
    "random-interpolation": AugmentConfig(operator="interpolate", policy="random"),
    "interpolation": AugmentConfig(operator="interpolate"),
    "extrapolation": AugmentConfig(operator="extrapolate"),
    "input-extrapolation": AugmentConfig(operator="extrapolate"),
}


@dataclass
class DataConfig:
    kind: str = "sinusoids"            # sinusoids | boundary | csv
    sinusoids: SinusoidSpec = field(default_factory=SinusoidSpec)
    boundary: BoundarySpec = field(default_factory=BoundarySpec)
    train_path: str | None = None
    test_path: str | None = None
    test_count: int = 200              # generated test samples (per class for boundary data)
    local_center: bool = False
    global_norm: bool = True


@dataclass
class AutoencoderConfig:
    hidden: int = 32
    dropout: float = 0.2
    context_dropout: bool = True


@dataclass
class ClassifierConfig:
    width: int = 256
    dropout: float = 0.5
    # fixed rate: epoch-based halving would give small datasets (short epochs)
    # a faster decay than augmented ones under the same update budget
    train: TrainConfig = field(default_factory=lambda: TrainConfig(updates=8000, plateau=False))


@dataclass
class SweepConfig:
    pair: tuple[int, int] = (0, 1)
    operator: str = "interpolate"
    lambdas: list[float] = field(default_factory=lambda: [round(0.1 * i, 10) for i in range(11)])
    noise_draws: int = 10


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    seed: int = 0
    out_dir: str = "runs"
    threads: int = 1
    data: DataConfig = field(default_factory=DataConfig)
    autoencoder: AutoencoderConfig = field(default_factory=AutoencoderConfig)
    sa_train: TrainConfig = field(default_factory=TrainConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    variants: list[str] = field(default_factory=lambda: ["baseline", "extrapolation"])
    runs: int = 10
    folds: int | None = None
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def validate(self):
        if self.data.kind not in ("sinusoids", "boundary", "csv"):
            raise ConfigError(f"data.kind must be sinusoids, boundary or csv, got {self.data.kind!r}")
        if self.data.kind == "csv":
            for p in (self.data.train_path, self.data.test_path):
                if p is not None and not Path(p).exists():
                    raise ConfigError(f"data path does not exist: {p}")
            if self.data.train_path is None:
                raise ConfigError("data.train_path is required for csv data")
        for v in self.variants:
            if v not in VARIANTS:
                raise ConfigError(f"unknown variant {v!r}; choose from {sorted(VARIANTS)}")
        if self.runs < 2 and self.folds is None:
            raise ConfigError("runs must be >= 2")
        if self.folds is not None and self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if self.autoencoder.hidden < 1 or self.classifier.width < 1:
            raise ConfigError("layer widths must be >= 1")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        try:
            self.data.sinusoids.validate()
            self.data.boundary.validate()
            self.augment.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def fingerprint(self) -> str:
        """Hash of every setting that can change results (not where they go or how many workers)."""
        d = self.to_dict()
        d.pop("out_dir")
        d.pop("threads")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


def _build(cls, raw, where: str):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"{where or 'config'} must be a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(raw) - set(fields)
    if unknown:
        raise ConfigError(f"unknown keys in {where or 'config'}: {sorted(unknown)}")
    kwargs = {}
    defaults = cls()
    for name, value in raw.items():
        current = getattr(defaults, name)
        if dataclasses.is_dataclass(current):
            kwargs[name] = _build(type(current), value, f"{where}.{name}".lstrip("."))
        elif isinstance(current, tuple) and isinstance(value, list):
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where or 'config'}: {exc}") from exc


def config_from_dict(raw: dict) -> ExperimentConfig:
    cfg = _build(ExperimentConfig, _resolve_constants(raw), "")
    if isinstance(cfg.data.sinusoids.phase, tuple):
        cfg.data.sinusoids.phase = tuple(float(v) for v in cfg.data.sinusoids.phase)
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    return config_from_dict(raw)


def _resolve_constants(x):
    # lets YAML write the phase range as [0, 2pi]
    if isinstance(x, dict):
        return {k: _resolve_constants(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_resolve_constants(v) for v in x]
    if isinstance(x, str) and x.replace(" ", "") in ("2pi", "2*pi"):
        return 2 * math.pi
    return x


def config_to_yaml(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def dump_config(cfg: ExperimentConfig, path):
    Path(path).write_text(config_to_yaml(cfg))
