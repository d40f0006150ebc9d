"""Minimal static SVG plots of ROC curves."""

from __future__ import annotations

from typing import Optional, Sequence

from .inference import ConfidenceBand
from .roc import RocCurve

_COLOURS = ("#1f4e79", "#b03a2e", "#1e8449", "#7d3c98")


def _xy(p, r, size, pad):
    s = size - 2 * pad
    return [(pad + s * a, pad + s * (1 - b)) for a, b in zip(p, r)]


def _path(points):
    return " ".join(f"{x:.2f},{y:.2f}" for x, y in points)


def roc_svg(curves: Sequence[RocCurve], band: Optional[ConfidenceBand] = None,
            labels: Optional[Sequence[str]] = None, size=400, title: str = "") -> str:
    """SVG with the curves, the diagonal and an optional band polygon."""
    pad = 40
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">',
           f'<rect x="{pad}" y="{pad}" width="{size - 2 * pad}" height="{size - 2 * pad}" '
           'fill="white" stroke="black"/>']
    if band is not None:
        poly = _xy(band.p, band.upper, size, pad) + _xy(band.p[::-1], band.lower[::-1], size, pad)
        out.append(f'<polygon points="{_path(poly)}" fill="#cccccc" stroke="none"/>')
    out.append(f'<polyline points="{_path(_xy([0, 1], [0, 1], size, pad))}" fill="none" '
               'stroke="grey" stroke-dasharray="4,4"/>')
    for k, c in enumerate(curves):
        col = _COLOURS[k % len(_COLOURS)]
        out.append(f'<polyline points="{_path(_xy(c.p, c.r, size, pad))}" fill="none" '
                   f'stroke="{col}" stroke-width="1.5"/>')
        if labels:
            out.append(f'<text x="{pad + 8}" y="{pad + 16 + 14 * k}" font-size="11" '
                       f'fill="{col}">{labels[k]}</text>')
    out.append(f'<text x="{size / 2}" y="{size - 8}" font-size="12" text-anchor="middle">p</text>')
    out.append(f'<text x="12" y="{size / 2}" font-size="12" text-anchor="middle">R(p)</text>')
    if title:
        out.append(f'<text x="{size / 2}" y="24" font-size="13" text-anchor="middle">{title}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
