"""Synthetic context vectors: noise, interpolation and extrapolation.

Given context vectors ``c_j`` and an in-class neighbour ``c_k``:

* noise          ``c' = c + gamma * sigma * N(0, 1)`` (per element)
* interpolation  ``c' = (c_k - c_j) * lam + c_j``,  ``lam`` in [0, 1]
* extrapolation  ``c' = (c_j - c_k) * lam + c_j``,  ``lam >= 0``

Neighbours are the K nearest same-label vectors under Euclidean distance,
ties broken by the lower index.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .tensor import (DimensionError, InsufficientDataError, ParameterError, RandomStream,
                     as_matrix, pairwise_sq_distances, per_element_std)

log = logging.getLogger(__name__)

OPERATORS = ("noise", "interpolate", "extrapolate")
POLICIES = ("nearest", "random")


class NoNeighborsError(ValueError):
    pass


# ---------------------------------------------------------------------------
# operators


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.shape} vs {b.shape}")
    return a, b


def add_noise(c, sigma, gamma: float, stream: RandomStream) -> np.ndarray:
    c, sigma = _pair(c, sigma)
    if gamma < 0:
        raise ParameterError("gamma must be >= 0")
    return c + gamma * sigma * stream.rng.standard_normal(c.shape)


def _affine(c_j, c_k, w: float) -> np.ndarray:
    # two-sided lerp: exact at w = 0 and w = 1 and for identical parents;
    # for w <= 0.5 it is bitwise (c_k - c_j) * w + c_j
    d = c_k - c_j
    if w <= 0.5:
        return c_j + w * d
    return c_k - (1.0 - w) * d


def interpolate(c_j, c_k, lam: float, check_range: bool = True) -> np.ndarray:
    c_j, c_k = _pair(c_j, c_k)
    if check_range and not 0.0 <= lam <= 1.0:
        raise ParameterError(f"interpolation lambda must lie in [0, 1], got {lam}")
    return _affine(c_j, c_k, lam)


def extrapolate(c_j, c_k, lam: float) -> np.ndarray:
    c_j, c_k = _pair(c_j, c_k)
    if lam < 0:
        raise ParameterError(f"extrapolation lambda must be >= 0, got {lam}")
    return _affine(c_j, c_k, -lam)


# ---------------------------------------------------------------------------
# neighbour search


def _class_members(labels, query: int) -> np.ndarray:
    labels = np.asarray(labels)
    members = np.flatnonzero(labels == labels[query])
    return members[members != query]


def knn_in_class(contexts, labels, query: int, k: int) -> np.ndarray:
    """Exact in-class K nearest neighbours of row ``query`` (brute force)."""
    X = as_matrix(contexts, "contexts")
    if k < 1:
        raise ParameterError("K must be >= 1")
    if len(labels) != len(X):
        raise DimensionError("contexts and labels are not aligned")
    others = _class_members(labels, query)
    if others.size == 0:
        raise NoNeighborsError(f"sample {query} is the only member of its class")
    d = pairwise_sq_distances(X[query][None], X[others])[0]
    order = np.lexsort((others, d))
    return others[order[:k]]


class CoarseIndex:
    """Exact in-class K-NN accelerated by a coarse k-means pre-filter.

    Each class is split into cells; a query visits cells in order of the
    triangle-inequality lower bound ``|q - centroid| - radius`` and stops once
    that bound exceeds the current K-th distance. Results match
    :func:`knn_in_class` exactly, ties included.
    """

    def __init__(self, contexts, labels, stream: RandomStream, n_cells: int | None = None,
                 iters: int = 8):
        self.X = as_matrix(contexts, "contexts")
        self.labels = np.asarray(labels)
        if len(self.labels) != len(self.X):
            raise DimensionError("contexts and labels are not aligned")
        self._cells: dict = {}
        for cls in np.unique(self.labels):
            members = np.flatnonzero(self.labels == cls)
            m = len(members)
            nc = n_cells or max(1, int(math.sqrt(m)))
            nc = min(nc, m)
            rng = stream.child(str(cls)).rng
            pts = self.X[members]
            cent = pts[rng.choice(m, nc, replace=False)]
            for _ in range(iters):
                assign = np.argmin(pairwise_sq_distances(pts, cent), axis=1)
                for c in range(nc):
                    sel = assign == c
                    if np.any(sel):
                        cent[c] = pts[sel].mean(axis=0)
            assign = np.argmin(pairwise_sq_distances(pts, cent), axis=1)
            cells = []
            for c in range(nc):
                idx = members[assign == c]
                if idx.size == 0:
                    continue
                radius = float(np.sqrt(pairwise_sq_distances(cent[c][None], self.X[idx]).max()))
                cells.append((cent[c].copy(), radius, idx))
            self._cells[cls] = cells

    def query(self, query: int, k: int) -> np.ndarray:
        if k < 1:
            raise ParameterError("K must be >= 1")
        q = self.X[query]
        cells = self._cells[self.labels[query]]
        cent = np.array([c for c, _, _ in cells])
        dc = np.sqrt(pairwise_sq_distances(q[None], cent)[0])
        bounds = np.array([dc[i] - r for i, (_, r, _) in enumerate(cells)])
        best_d = np.empty(0)
        best_i = np.empty(0, dtype=np.int64)
        for ci in np.argsort(bounds, kind="stable"):
            if len(best_d) >= k:
                kth = math.sqrt(best_d[k - 1])
                # slack keeps the bound conservative under rounding
                if bounds[ci] > kth + 1e-9 * (1.0 + kth):
                    break
            idx = cells[ci][2]
            idx = idx[idx != query]
            if idx.size == 0:
                continue
            d = pairwise_sq_distances(q[None], self.X[idx])[0]
            best_d = np.concatenate([best_d, d])
            best_i = np.concatenate([best_i, idx])
            order = np.lexsort((best_i, best_d))[:k]
            best_d, best_i = best_d[order], best_i[order]
        if best_i.size == 0:
            raise NoNeighborsError(f"sample {query} is the only member of its class")
        return best_i


# ---------------------------------------------------------------------------
# dataset expansion


@dataclass
class AugmentConfig:
    operator: str = "extrapolate"
    lam: float = 0.5
    gamma: float = 0.5
    k: int = 10
    policy: str = "nearest"
    random_lambda: bool = False
    search: str = "brute"

    def validate(self):
        if self.operator not in OPERATORS:
            raise ParameterError(f"operator must be one of {OPERATORS}")
        if self.policy not in POLICIES:
            raise ParameterError(f"policy must be one of {POLICIES}")
        if self.search not in ("brute", "coarse"):
            raise ParameterError("search must be 'brute' or 'coarse'")
        if self.lam < 0 or self.gamma < 0:
            raise ParameterError("lambda and gamma must be >= 0")
        if self.operator == "interpolate" and self.lam > 1:
            raise ParameterError("interpolation lambda must lie in [0, 1]")
        if self.k < 1:
            raise ParameterError("K must be >= 1")


@dataclass
class SyntheticContext:
    values: np.ndarray
    label: object
    sources: tuple            # (j, k) or (j, None) for noise
    target_length: int


def interpolated_length(len_j: int, len_k: int) -> int:
    return (int(len_j) + int(len_k)) // 2


def augment_dataset(contexts, labels, lengths, config: AugmentConfig, stream: RandomStream,
                    sigma=None) -> list[SyntheticContext]:
    """One synthetic context per (sample, neighbour) pair, or per sample for noise.

    ``sigma`` defaults to the population std of ``contexts``. Samples alone in
    their class are skipped with a warning. Each sample draws from its own
    sub-stream, so the output does not depend on processing order.
    """
    config.validate()
    X = as_matrix(contexts, "contexts")
    labels = np.asarray(labels)
    lengths = np.asarray(lengths, dtype=np.int64)
    if not len(X) == len(labels) == len(lengths):
        raise DimensionError("contexts, labels and lengths are not aligned")
    if len(X) == 0:
        raise InsufficientDataError("nothing to augment")
    out: list[SyntheticContext] = []

    if config.operator == "noise":
        sig = per_element_std(X) if sigma is None else np.asarray(sigma, dtype=np.float64)
        for j in range(len(X)):
            c = add_noise(X[j], sig, config.gamma, stream.child(j))
            out.append(SyntheticContext(c, labels[j].item(), (j, None), int(lengths[j])))
        return out

    index = CoarseIndex(X, labels, stream.child("index")) if config.search == "coarse" else None
    skipped = 0
    for j in range(len(X)):
        sub = stream.child(j)
        others = _class_members(labels, j)
        if others.size == 0:
            skipped += 1
            continue
        if config.policy == "random":
            nbrs = sub.rng.choice(others, min(config.k, others.size), replace=False)
        elif index is not None:
            nbrs = index.query(j, config.k)
        else:
            nbrs = knn_in_class(X, labels, j, config.k)
        for kk in nbrs:
            lam = config.lam
            if config.random_lambda:
                lam = float(sub.rng.uniform(0.0, 1.0))
            if config.operator == "interpolate":
                c = interpolate(X[j], X[kk], lam)
                n = interpolated_length(lengths[j], lengths[kk])
            else:
                c = extrapolate(X[j], X[kk], lam)
                n = int(lengths[j])
            out.append(SyntheticContext(c, labels[j].item(), (j, int(kk)), n))
    if skipped:
        log.warning("skipped %d samples that are alone in their class", skipped)
    return out


def stack_synthetics(items: Sequence[SyntheticContext]):
    """``(contexts, labels, lengths)`` arrays from a list of synthetics."""
    if not items:
        return np.empty((0, 0)), np.empty(0), np.empty(0, dtype=np.int64)
    X = np.stack([s.values for s in items])
    y = np.array([s.label for s in items])
    n = np.array([s.target_length for s in items], dtype=np.int64)
    return X, y, n


def write_context_csv(contexts, labels, path):
    X = as_matrix(contexts, "contexts")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "label"] + [f"c{i}" for i in range(X.shape[1])])
        for i, (row, lab) in enumerate(zip(X, labels)):
            w.writerow([i, "" if lab is None else lab] + [format(float(v), ".17g") for v in row])


def read_context_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    width = len(header) - 2
    X = np.array([[float(v) for v in r[2:]] for r in rows]).reshape(len(rows), width)
    labels = []
    for r in rows:
        try:
            labels.append(int(r[1]))
        except ValueError:
            labels.append(r[1] if r[1] != "" else None)
    return X, labels
