"""Curve fitting used to read amplitude/frequency/phase off decoded sequences."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares


@dataclass
class SinusoidFit:
    amplitude: float
    frequency: float
    phase: float
    offset: float
    residual: float        # RMS of the fit error
    rel_residual: float    # |y - fit| / |y - mean(y)|

    def curve(self, length: int) -> np.ndarray:
        t = np.arange(length, dtype=np.float64)
        return self.amplitude * np.sin(2 * np.pi * self.frequency * t + self.phase) + self.offset


def _linear_fit(y, t, f, offset):
    cols = [np.sin(2 * np.pi * f * t), np.cos(2 * np.pi * f * t)]
    if offset:
        cols.append(np.ones_like(t))
    M = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(M, y, rcond=None)
    return coef, float(np.sum((M @ coef - y) ** 2))


def fit_sinusoid(y, offset: bool = True, f_min: float = 0.002, f_max: float = 0.5,
                 grid: int = 2000) -> SinusoidFit:
    """Least-squares fit of ``A sin(2 pi f t + phi) + b`` on ``t = 0..n-1``.

    A dense frequency grid (linear solve per frequency) picks the basin, then
    a nonlinear refinement polishes all parameters. The returned amplitude is
    non-negative.
    """
    y = np.asarray(y, dtype=np.float64).ravel()
    t = np.arange(len(y), dtype=np.float64)
    freqs = np.linspace(f_min, f_max, grid)
    sse = [_linear_fit(y, t, f, offset)[1] for f in freqs]
    f0 = freqs[int(np.argmin(sse))]
    coef, _ = _linear_fit(y, t, f0, offset)
    a, b = coef[0], coef[1]
    x0 = [np.hypot(a, b), f0, np.arctan2(b, a)] + ([coef[2]] if offset else [])

    def resid(p):
        out = p[0] * np.sin(2 * np.pi * p[1] * t + p[2]) - y
        return out + p[3] if offset else out

    sol = least_squares(resid, x0, xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
    A, f, phi = sol.x[:3]
    b0 = sol.x[3] if offset else 0.0
    if A < 0:
        A, phi = -A, phi + np.pi
    phi = float(np.mod(phi, 2 * np.pi))
    r = resid(sol.x)
    denom = np.linalg.norm(y - y.mean()) if offset else np.linalg.norm(y)
    rel = float(np.linalg.norm(r) / denom) if denom > 0 else float("inf")
    return SinusoidFit(float(A), float(f), phi, float(b0), float(np.sqrt(np.mean(r * r))), rel)
