"""Minimal deterministic SVG scatter and line plots."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

W, H, PAD = 480, 360, 48


def _scale(values, lo_px, hi_px):
    v = np.asarray(values, dtype=float)
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        lo, hi = lo - 1.0, hi + 1.0
    return lo_px + (v - lo) / (hi - lo) * (hi_px - lo_px), lo, hi


def _frame(xlabel: str, ylabel: str, xr, yr) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="{PAD}" y="{PAD // 2}" width="{W - 1.5 * PAD:.1f}" height="{H - 1.5 * PAD:.1f}" '
        'fill="none" stroke="#444"/>',
        f'<text x="{W / 2:.1f}" y="{H - 8}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="12" y="{H / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 12 {H / 2:.1f})">{escape(ylabel)}</text>',
        f'<text x="{PAD}" y="{H - PAD + 14}" font-size="10">{xr[0]:.3g}</text>',
        f'<text x="{W - PAD / 2}" y="{H - PAD + 14}" font-size="10" text-anchor="end">{xr[1]:.3g}</text>',
        f'<text x="{PAD - 4}" y="{H - PAD}" font-size="10" text-anchor="end">{yr[0]:.3g}</text>',
        f'<text x="{PAD - 4}" y="{PAD // 2 + 10}" font-size="10" text-anchor="end">{yr[1]:.3g}</text>',
    ]


def _project(x, y):
    px, xlo, xhi = _scale(x, PAD + 10, W - PAD / 2 - 10)
    py, ylo, yhi = _scale(y, H - PAD - 10, PAD / 2 + 10)
    return px, py, (xlo, xhi), (ylo, yhi)


def scatter_svg(x, y, labels=None, xlabel: str = "MDS 1", ylabel: str = "MDS 2") -> str:
    px, py, xr, yr = _project(x, y)
    parts = _frame(xlabel, ylabel, xr, yr)
    for k, (a, b) in enumerate(zip(px, py)):
        parts.append(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="4" fill="#1f77b4"/>')
        if labels is not None:
            parts.append(f'<text x="{a + 6:.2f}" y="{b - 6:.2f}" font-size="12">{escape(str(labels[k]))}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def line_svg(x, y, xlabel: str = "x", ylabel: str = "y") -> str:
    px, py, xr, yr = _project(x, y)
    parts = _frame(xlabel, ylabel, xr, yr)
    path = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
    parts.append(f'<polyline points="{path}" fill="none" stroke="#d62728" stroke-width="1.5"/>')
    for a, b in zip(px, py):
        parts.append(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="3" fill="#d62728"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
