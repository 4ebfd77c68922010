"""Minimal deterministic SVG line plots (one polyline per curve)."""

from __future__ import annotations

from typing import Sequence

import numpy as np

PALETTE = ["#1f77b4", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
           "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#ff7f0e"]


def _f(x: float) -> str:
    return f"{x:.3f}"


def line_plot(curves: Sequence[np.ndarray], labels: Sequence[str] | None = None,
              width: int = 640, height: int = 360, bold: Sequence[int] = (),
              title: str = "") -> str:
    """Render 1-D curves against their index. ``bold`` marks parent curves."""
    curves = [np.asarray(c, dtype=np.float64).ravel() for c in curves]
    if not curves:
        raise ValueError("nothing to plot")
    pad = 30
    n_max = max(len(c) for c in curves)
    lo = min(float(c.min()) for c in curves)
    hi = max(float(c.max()) for c in curves)
    if hi == lo:
        hi, lo = hi + 1.0, lo - 1.0
    sx = (width - 2 * pad) / max(1, n_max - 1)
    sy = (height - 2 * pad) / (hi - lo)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{pad}" y="{pad - 10}" font-size="12" font-family="sans-serif">{title}</text>')
    zero_y = height - pad - (0.0 - lo) * sy
    if lo <= 0.0 <= hi:
        out.append(f'<line x1="{pad}" y1="{_f(zero_y)}" x2="{width - pad}" y2="{_f(zero_y)}" '
                   'stroke="#cccccc" stroke-width="1"/>')
    for k, c in enumerate(curves):
        pts = " ".join(f"{_f(pad + i * sx)},{_f(height - pad - (v - lo) * sy)}" for i, v in enumerate(c))
        w = 2.5 if k in bold else 1.0
        op = 1.0 if k in bold else 0.6
        label = f' data-label="{labels[k]}"' if labels else ""
        out.append(f'<polyline fill="none" stroke="{PALETTE[k % len(PALETTE)]}" '
                   f'stroke-width="{w}" stroke-opacity="{op}"{label} points="{pts}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
