"""Synthetic generators, preprocessing and the CSV sequence format.

CSV layout: a header row ``seq_id,t,label,f0,...,f{d-1}`` and one row per
timestep. Rows may appear in any order; a sequence's timesteps must be
exactly ``0..T-1``. The label cell may be empty for unlabeled data. Floats
are written with 17 significant digits so that reading back is bit-exact.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .tensor import InsufficientDataError, ParameterError, RandomStream

log = logging.getLogger(__name__)


class CsvParseError(ValueError):
    def __init__(self, path, line, msg):
        super().__init__(f"{path}:{line}: {msg}")
        self.path = path
        self.line = line


@dataclass
class SequenceSample:
    values: np.ndarray          # (T, F)
    label: int | str | None = None
    id: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ParameterError(f"sequence values must be (T>=1, F>=1), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ParameterError("sequence contains non-finite values")
        self.values = v

    def __len__(self):
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def with_values(self, values) -> "SequenceSample":
        return SequenceSample(values, self.label, self.id, dict(self.meta))


# ---------------------------------------------------------------------------
# generators


def _check_range(name, rng_):
    lo, hi = rng_
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise ParameterError(f"{name} range must satisfy lo <= hi, got {rng_}")


@dataclass
class SinusoidSpec:
    amplitude: tuple[float, float] = (0.5, 2.0)
    frequency: tuple[float, float] = (0.02, 0.1)   # cycles per step
    phase: tuple[float, float] = (0.0, 2 * math.pi)
    length: int = 100
    count: int = 1000

    def validate(self):
        _check_range("amplitude", self.amplitude)
        _check_range("frequency", self.frequency)
        _check_range("phase", self.phase)
        if self.length < 2:
            raise ParameterError("sinusoid length must be >= 2")
        if self.count < 1:
            raise ParameterError("sinusoid count must be >= 1")


def sinusoid(amplitude: float, frequency: float, phase: float, length: int) -> np.ndarray:
    t = np.arange(length, dtype=np.float64)
    return amplitude * np.sin(2 * np.pi * frequency * t + phase)


def gen_sinusoids(spec: SinusoidSpec, stream: RandomStream) -> list[SequenceSample]:
    """``A sin(2 pi f t + phi)`` on ``t = 0..length-1`` with uniform ``(A, f, phi)``."""
    spec.validate()
    rng = stream.rng
    A = rng.uniform(*spec.amplitude, size=spec.count)
    f = rng.uniform(*spec.frequency, size=spec.count)
    phi = rng.uniform(*spec.phase, size=spec.count)
    return [
        SequenceSample(sinusoid(A[i], f[i], phi[i], spec.length), None, i,
                       {"amplitude": float(A[i]), "frequency": float(f[i]), "phase": float(phi[i])})
        for i in range(spec.count)
    ]


BOUNDARY_KINDS = ("linear", "circles", "spirals")


@dataclass
class BoundarySpec:
    kind: str = "spirals"
    samples_per_class: int = 200
    noise_std: float = 0.05

    def validate(self):
        if self.kind not in BOUNDARY_KINDS:
            raise ParameterError(f"kind must be one of {BOUNDARY_KINDS}, got {self.kind!r}")
        if self.samples_per_class < 1:
            raise ParameterError("samples_per_class must be >= 1")
        if not self.noise_std >= 0:
            raise ParameterError("noise_std must be >= 0")


LINEAR_NORMAL = np.array([1.0, 1.0]) / math.sqrt(2.0)
LINEAR_MARGIN = 0.05
CIRCLE_RADII = ((0.0, 1.0), (1.1, 2.0))
SPIRAL_TURNS = 1.75


def gen_boundary_dataset(spec: BoundarySpec, stream: RandomStream) -> tuple[np.ndarray, np.ndarray]:
    """Two-class 2-D point sets with a linear, annular or spiral boundary.

    Returns ``(X, y)`` with ``X`` of shape ``(2n, 2)`` and integer labels;
    class 0 occupies the first ``n`` rows. Noise is added after the
    class geometry is fixed, so ``noise_std=0`` gives exactly separable sets.
    """
    spec.validate()
    rng = stream.rng
    n = spec.samples_per_class
    if spec.kind == "linear":
        along = np.array([-LINEAR_NORMAL[1], LINEAR_NORMAL[0]])
        pts = []
        for sign in (-1.0, 1.0):
            t = rng.normal(0.0, 1.0, n)
            d = sign * (LINEAR_MARGIN + np.abs(rng.normal(0.0, 0.5, n)))
            pts.append(t[:, None] * along + d[:, None] * LINEAR_NORMAL)
        X = np.concatenate(pts)
    elif spec.kind == "circles":
        pts = []
        for lo, hi in CIRCLE_RADII:
            # uniform over the annulus area
            r = np.sqrt(rng.uniform(lo * lo, hi * hi, n))
            a = rng.uniform(0.0, 2 * np.pi, n)
            pts.append(np.column_stack([r * np.cos(a), r * np.sin(a)]))
        X = np.concatenate(pts)
    else:
        theta = np.sqrt(rng.uniform(0.0, 1.0, n)) * SPIRAL_TURNS * 2 * np.pi + 0.5
        r = theta / (SPIRAL_TURNS * 2 * np.pi)
        arm = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
        X = np.concatenate([arm, -arm])
    y = np.repeat([0, 1], n)
    if spec.noise_std > 0:
        X = X + rng.normal(0.0, spec.noise_std, X.shape)
    return X, y


def points_to_samples(X, y=None) -> list[SequenceSample]:
    """Static points as length-1 sequences, so they share the sequence pipeline."""
    X = np.asarray(X, dtype=np.float64)
    labels = [None] * len(X) if y is None else [int(v) for v in y]
    return [SequenceSample(X[i][None, :], labels[i], i) for i in range(len(X))]


# ---------------------------------------------------------------------------
# preprocessing


def _is_centred(v: np.ndarray) -> np.ndarray:
    # a column mean at the level of summation round-off counts as zero
    tol = len(v) * np.finfo(np.float64).eps * np.abs(v).mean(axis=0)
    return np.abs(v.mean(axis=0)) <= tol


def normalize_local(sample: SequenceSample) -> SequenceSample:
    """Subtract each feature's mean over the sample's own timesteps.

    Columns whose mean is already round-off are left alone, which makes the
    operation exactly idempotent.
    """
    v = sample.values.copy()
    for _ in range(8):
        todo = ~_is_centred(v)
        if not np.any(todo):
            break
        v[:, todo] -= v[:, todo].mean(axis=0)
    return sample.with_values(v)


@dataclass
class GlobalNorm:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, samples: Sequence[SequenceSample]) -> list[SequenceSample]:
        return [s.with_values((s.values - self.mean) / self.std) for s in samples]

    def invert(self, values: np.ndarray) -> np.ndarray:
        return values * self.std + self.mean


def fit_global_norm(samples: Sequence[SequenceSample]) -> GlobalNorm:
    if len(samples) < 2:
        raise InsufficientDataError("global normalisation needs at least 2 samples")
    pooled = np.concatenate([s.values for s in samples])
    mean = pooled.mean(axis=0)
    std = pooled.std(axis=0)
    zero = std == 0
    if np.any(zero):
        log.warning("features %s have zero variance; left centred only", np.flatnonzero(zero).tolist())
        std = np.where(zero, 1.0, std)
    return GlobalNorm(mean, std)


def normalize_global(samples: Sequence[SequenceSample]) -> tuple[list[SequenceSample], GlobalNorm]:
    """Pooled per-feature standardisation; the returned transform is reusable on test data."""
    norm = fit_global_norm(samples)
    return norm.apply(samples), norm


def reverse_sequence(sample: SequenceSample) -> SequenceSample:
    return sample.with_values(sample.values[::-1].copy())


# ---------------------------------------------------------------------------
# CSV


@dataclass
class CsvSchema:
    id_col: str = "seq_id"
    time_col: str = "t"
    label_col: str | None = "label"
    feature_prefix: str = "f"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _parse_label(s: str):
    if s == "":
        return None
    try:
        return int(s)
    except ValueError:
        return s


def write_csv_sequences(samples: Sequence[SequenceSample], path, schema: CsvSchema = CsvSchema()):
    if not samples:
        raise InsufficientDataError("nothing to write")
    d = samples[0].n_features
    header = [schema.id_col, schema.time_col]
    if schema.label_col is not None:
        header.append(schema.label_col)
    header += [f"{schema.feature_prefix}{j}" for j in range(d)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for s in samples:
            if s.n_features != d:
                raise ParameterError("all samples must share the feature dimension")
            label = "" if s.label is None else str(s.label)
            for t, row in enumerate(s.values):
                lead = [s.id, t] + ([label] if schema.label_col is not None else [])
                w.writerow(lead + [_fmt(v) for v in row])


def load_csv_sequences(path, schema: CsvSchema = CsvSchema()) -> list[SequenceSample]:
    """Read the CSV sequence format; samples come back sorted by ``seq_id``."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError(path, 1, "empty file (header row required)") from None
        cols = {name: j for j, name in enumerate(header)}
        for need in (schema.id_col, schema.time_col):
            if need not in cols:
                raise CsvParseError(path, 1, f"missing column {need!r}")
        if schema.label_col is not None and schema.label_col not in cols:
            raise CsvParseError(path, 1, f"unknown label column {schema.label_col!r}")
        feat = []
        while f"{schema.feature_prefix}{len(feat)}" in cols:
            feat.append(cols[f"{schema.feature_prefix}{len(feat)}"])
        if not feat:
            raise CsvParseError(path, 1, f"no feature columns {schema.feature_prefix}0..")
        rows: dict[int, list] = {}
        labels: dict[int, object] = {}
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise CsvParseError(path, lineno, f"expected {len(header)} fields, got {len(rec)}")
            try:
                sid = int(rec[cols[schema.id_col]])
                t = int(rec[cols[schema.time_col]])
                vals = [float(rec[j]) for j in feat]
            except ValueError as exc:
                raise CsvParseError(path, lineno, str(exc)) from None
            if not all(math.isfinite(v) for v in vals):
                raise CsvParseError(path, lineno, "non-finite feature value")
            label = _parse_label(rec[cols[schema.label_col]]) if schema.label_col is not None else None
            if sid in labels and labels[sid] != label:
                raise CsvParseError(path, lineno, f"sequence {sid} has conflicting labels")
            labels[sid] = label
            rows.setdefault(sid, []).append((t, lineno, vals))
    if not rows:
        raise CsvParseError(path, 2, "no data rows")
    samples = []
    for sid in sorted(rows):
        steps = sorted(rows[sid], key=lambda r: r[0])
        for expect, (t, lineno, _) in enumerate(steps):
            if t != expect:
                raise CsvParseError(path, lineno,
                                    f"sequence {sid}: timestep {t} where {expect} was expected")
        samples.append(SequenceSample(np.array([v for _, _, v in steps]), labels[sid], sid))
    return samples
