"""Numeric primitives shared by every other module.

Arrays are plain float64 numpy arrays. Randomness comes from
:class:`RandomStream`, a thin wrapper over numpy's PCG64 bit generator with
named, reproducible sub-streams.
"""

from __future__ import annotations

import zlib

import numpy as np

ALGORITHM_ID = "numpy.PCG64/SeedSequence"


class InsufficientDataError(ValueError):
    pass


class DimensionError(ValueError):
    pass


class ParameterError(ValueError):
    pass


class RandomStream:
    """Seeded random source with deterministic named sub-streams.

    Two streams built from the same seed and spawn path produce identical
    draws for identical call sequences. ``child("init")`` and
    ``child("dropout")`` are statistically independent and do not disturb
    the parent's own sequence.
    """

    algorithm_id = ALGORITHM_ID

    def __init__(self, seed: int, _path: tuple[int, ...] = ()):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._path = tuple(_path)
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self._path)
        self.rng = np.random.Generator(np.random.PCG64(seq))

    def child(self, name: str | int) -> "RandomStream":
        if isinstance(name, str):
            key = zlib.crc32(name.encode("utf-8"))
        else:
            key = int(name)
        return RandomStream(self.seed, self._path + (key,))

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, path={self._path})"


def as_stream(stream: RandomStream | int | None) -> RandomStream:
    if isinstance(stream, RandomStream):
        return stream
    return RandomStream(0 if stream is None else stream)


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


def per_element_std(contexts) -> np.ndarray:
    """Population standard deviation of each column (divide by N)."""
    a = as_matrix(contexts, "contexts")
    if a.shape[0] < 2:
        raise InsufficientDataError("per_element_std needs at least 2 rows")
    return a.std(axis=0, ddof=0)


def gaussian_sample(stream: RandomStream, n: int) -> np.ndarray:
    if n < 1:
        raise ParameterError("n must be >= 1")
    return stream.rng.standard_normal(n)


def euclidean_distance(a, b) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.size} vs {b.size}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def pairwise_sq_distances(queries: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, computed by direct differencing.

    The expanded ``|a|^2 - 2ab + |b|^2`` form is avoided on purpose: its
    cancellation error can reorder near-ties.
    """
    diff = queries[:, None, :] - points[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)
