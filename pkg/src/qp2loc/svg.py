"""Minimal SVG output: heatmaps from ``rect`` cells and line plots from ``polyline``."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

# a few stops of a perceptually ordered blue-yellow ramp
_RAMP = np.array([
    [68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37],
], dtype=float)


def _color(x: float) -> str:
    if not math.isfinite(x):
        return "#ffffff"
    x = min(max(x, 0.0), 1.0) * (len(_RAMP) - 1)
    i = min(int(x), len(_RAMP) - 2)
    c = _RAMP[i] + (x - i) * (_RAMP[i + 1] - _RAMP[i])
    return "#%02x%02x%02x" % tuple(int(round(v)) for v in c)


def _doc(width, height, body, title):
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">\n')
    if title:
        head += f"<title>{escape(title)}</title>\n"
    return head + "\n".join(body) + "\n</svg>\n"


def heatmap(values, title: str = "", cell: int = 6) -> str:
    """Grid of colored cells; row 0 is drawn at the bottom.  Nonfinite cells stay white."""
    a = np.asarray(values, dtype=float)
    fin = a[np.isfinite(a)]
    lo, hi = (float(fin.min()), float(fin.max())) if fin.size else (0.0, 1.0)
    span = hi - lo if hi > lo else 1.0
    rows, cols = a.shape
    body = []
    for i in range(rows):
        y = (rows - 1 - i) * cell
        for j in range(cols):
            body.append(f'<rect x="{j * cell}" y="{y}" width="{cell}" height="{cell}" '
                        f'fill="{_color((a[i, j] - lo) / span)}"/>')
    return _doc(cols * cell, rows * cell, body, title)


def polyline(x, series: dict, title: str = "", width: int = 480, height: int = 320, pad: int = 32) -> str:
    """One polyline per named series over a shared ``x``; nonfinite points are skipped."""
    x = np.asarray(x, dtype=float)
    ys = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    allv = np.concatenate([y[np.isfinite(y)] for y in ys.values()] + [np.zeros(0)])
    ylo, yhi = (float(allv.min()), float(allv.max())) if allv.size else (0.0, 1.0)
    if yhi == ylo:
        ylo, yhi = ylo - 1.0, yhi + 1.0
    xlo, xhi = (float(x.min()), float(x.max())) if x.size else (0.0, 1.0)
    if xhi == xlo:
        xlo, xhi = xlo - 1.0, xhi + 1.0

    def px(u):
        return pad + (u - xlo) / (xhi - xlo) * (width - 2 * pad)

    def py(u):
        return height - pad - (u - ylo) / (yhi - ylo) * (height - 2 * pad)

    body = [f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
            f'fill="none" stroke="#888"/>']
    for k, (name, y) in enumerate(ys.items()):
        ok = np.isfinite(y) & np.isfinite(x)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[ok], y[ok]))
        color = _color(k / max(len(ys) - 1, 1) * 0.8)
        body.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5">'
                    f"<title>{escape(str(name))}</title></polyline>")
    return _doc(width, height, body, title)
