"""Measurements on trained models used by the experiment scripts and acceptance suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autoencoder as ae
from .analysis import SinusoidFit, fit_sinusoid
from .augment import extrapolate, interpolate, interpolated_length
from .datasets import SequenceSample
from .tensor import InsufficientDataError, RandomStream


def pick_pairs(samples: list[SequenceSample], n: int, stream: RandomStream,
               min_ratio: float = 1.5) -> list[tuple[int, int]]:
    """``n`` seeded index pairs ``(lo, hi)`` ordered by generated amplitude.

    Pairs whose amplitudes differ by less than ``min_ratio`` are redrawn, so
    each pair has a clear larger and smaller parent.
    """
    amps = np.array([s.meta["amplitude"] for s in samples])
    rng = stream.rng
    out = []
    for _ in range(1000 * n):
        if len(out) == n:
            break
        i, j = (int(v) for v in rng.choice(len(samples), 2, replace=False))
        lo, hi = (i, j) if amps[i] < amps[j] else (j, i)
        if amps[hi] >= min_ratio * amps[lo]:
            out.append((lo, hi))
    if len(out) < n:
        raise InsufficientDataError(f"could not find {n} pairs with amplitude ratio >= {min_ratio}")
    return out


@dataclass
class InterpolationSweep:
    lambdas: list[float]
    curves: list[np.ndarray]
    distances: list[float]      # L2 distance of each curve to the lam=0 curve
    fits: list[SinusoidFit]

    def monotone(self, slack: float = 0.05) -> bool:
        d = self.distances
        return all(b >= a * (1.0 - slack) for a, b in zip(d, d[1:]))

    def worst_residual(self) -> float:
        return max(f.rel_residual for f in self.fits)


def interpolation_sweep(model, seqs, pair, lambdas, reverse=True) -> InterpolationSweep:
    j, k = pair
    cj = ae.encode(model, seqs[j], reverse)
    ck = ae.encode(model, seqs[k], reverse)
    n = interpolated_length(len(seqs[j]), len(seqs[k]))
    curves = [ae.decode(model, interpolate(cj, ck, lam), n)[:, 0] for lam in lambdas]
    dist = [float(np.linalg.norm(c - curves[0])) for c in curves]
    return InterpolationSweep(list(lambdas), curves, dist, [fit_sinusoid(c) for c in curves])


@dataclass
class ExtrapolationCheck:
    pair: tuple[int, int]
    a_lo: float          # fitted amplitude of the smaller parent
    a_hi: float
    a_lo_child: float    # fitted amplitude of decode(extrapolate(c_lo, c_hi, lam))
    a_hi_child: float

    def passes(self, slack: float = 0.02) -> bool:
        return (self.a_hi_child >= self.a_hi * (1.0 - slack)
                and self.a_lo_child <= self.a_lo * (1.0 + slack))


def extrapolation_check(model, seqs, pair, lam: float = 0.5, reverse=True) -> ExtrapolationCheck:
    """Fitted amplitudes of two parents and of each parent pushed away from the other."""
    lo, hi = pair
    c_lo = ae.encode(model, seqs[lo], reverse)
    c_hi = ae.encode(model, seqs[hi], reverse)
    amp = lambda y: fit_sinusoid(np.asarray(y)[:, 0]).amplitude
    lo_child = ae.decode(model, extrapolate(c_lo, c_hi, lam), len(seqs[lo]))
    hi_child = ae.decode(model, extrapolate(c_hi, c_lo, lam), len(seqs[hi]))
    return ExtrapolationCheck(pair, amp(seqs[lo]), amp(seqs[hi]), amp(lo_child), amp(hi_child))


def direction_summary(results: dict) -> dict[str, float]:
    """Mean error of each variant from a ``cmd_classify`` result mapping."""
    return {v: r.mean for v, r in results.items()}
