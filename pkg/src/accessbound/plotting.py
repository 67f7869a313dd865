"""Minimal deterministic SVG output (no plotting library needed).

Only what the CLI draws: categorical rasters and line/scatter charts.
Output depends only on the data, so repeated runs give identical bytes.
"""

from __future__ import annotations

import colorsys
from typing import Optional, Sequence
from xml.sax.saxutils import escape


def palette(n: int) -> list:
    """``n`` distinguishable hex colors (golden-ratio hue walk)."""
    out = []
    for i in range(n):
        h = (i * 0.618033988749895) % 1.0
        light = 0.45 + 0.15 * ((i // 7) % 2)
        r, g, b = colorsys.hls_to_rgb(h, light, 0.65)
        out.append("#%02x%02x%02x" % (round(r * 255), round(g * 255), round(b * 255)))
    return out


def _fmt(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".")


def raster_svg(grid, colors: dict, markers: Sequence = (), cell: int = 4,
               title: str = "") -> str:
    """Categorical raster; ``grid[row][col]`` is a key into ``colors``.

    Runs of equal labels along a row are merged into one rectangle.
    ``markers`` are ``(row, col, label)`` triples drawn as circles.
    """
    rows = len(grid)
    cols = len(grid[0]) if rows else 0
    top = 20 if title else 0
    w, h = cols * cell, rows * cell + top
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
             f'viewBox="0 0 {w} {h}" shape-rendering="crispEdges">']
    if title:
        parts.append(f'<text x="4" y="14" font-family="monospace" font-size="12">{escape(title)}</text>')
    for r in range(rows):
        c = 0
        row = grid[r]
        while c < cols:
            lab = row[c]
            c2 = c + 1
            while c2 < cols and row[c2] == lab:
                c2 += 1
            parts.append(f'<rect x="{c * cell}" y="{top + r * cell}" width="{(c2 - c) * cell}" '
                         f'height="{cell}" fill="{colors[lab]}"/>')
            c = c2
    for r, c, lab in markers:
        cx, cy = (c + 0.5) * cell, top + (r + 0.5) * cell
        parts.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{max(cell, 3)}" fill="none" '
                     f'stroke="black" stroke-width="1.5"/>')
        parts.append(f'<text x="{_fmt(cx + cell + 2)}" y="{_fmt(cy + 4)}" font-family="monospace" '
                     f'font-size="11">{escape(str(lab))}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def line_chart_svg(series: dict, xlabel: str = "", ylabel: str = "", title: str = "",
                   width: int = 480, height: int = 320, points: Optional[dict] = None) -> str:
    """Line chart; ``series`` maps a name to ``(xs, ys)``; ``points`` adds scatter-only series."""
    points = points or {}
    allx = [x for xs, _ in list(series.values()) + list(points.values()) for x in xs]
    ally = [y for _, ys in list(series.values()) + list(points.values()) for y in ys]
    if not allx:
        allx, ally = [0.0, 1.0], [0.0, 1.0]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    ml, mr, mt, mb = 56, 110, 28, 40
    pw, ph = width - ml - mr, height - mt - mb

    def px(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def py(y):
        return mt + ph - (y - y0) / (y1 - y0) * ph

    names = list(series) + [k for k in points if k not in series]
    cols = dict(zip(names, palette(len(names))))
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="monospace" font-size="11">',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>']
    if title:
        out.append(f'<text x="{ml}" y="16" font-size="12">{escape(title)}</text>')
    for i in range(5):
        xv = x0 + (x1 - x0) * i / 4
        yv = y0 + (y1 - y0) * i / 4
        out.append(f'<text x="{_fmt(px(xv))}" y="{mt + ph + 14}" text-anchor="middle">{_fmt(xv)}</text>')
        out.append(f'<text x="{ml - 4}" y="{_fmt(py(yv) + 4)}" text-anchor="end">{_fmt(yv)}</text>')
    out.append(f'<text x="{ml + pw / 2}" y="{height - 6}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="12" y="{mt + ph / 2}" transform="rotate(-90 12 {mt + ph / 2})" '
               f'text-anchor="middle">{escape(ylabel)}</text>')
    for name, (xs, ys) in series.items():
        pts = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(xs, ys))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{cols[name]}" stroke-width="1.5"/>')
    for name, (xs, ys) in points.items():
        for x, y in zip(xs, ys):
            out.append(f'<circle cx="{_fmt(px(x))}" cy="{_fmt(py(y))}" r="2.5" fill="{cols[name]}"/>')
    for i, name in enumerate(names):
        y = mt + 10 + 16 * i
        out.append(f'<rect x="{ml + pw + 8}" y="{y - 8}" width="10" height="10" fill="{cols[name]}"/>')
        out.append(f'<text x="{ml + pw + 22}" y="{y + 1}">{escape(str(name))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
