"""Minimal static SVG line plots (no plotting dependency)."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def line_plot(x, series: dict, title: str = "", logy: bool = False, width: int = 640, height: int = 400) -> str:
    """Render ``{label: y-values}`` against ``x`` as an SVG document string."""
    pad = 50
    xs = [float(v) for v in x]
    ys_all = []
    for ys in series.values():
        for v in ys:
            v = float(v)
            if math.isfinite(v) and (v > 0 or not logy):
                ys_all.append(math.log10(v) if logy else v)
    if not xs or not ys_all:
        raise ValueError("nothing to plot")
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys_all), max(ys_all)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1

    def px(v):
        return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

    def py(v):
        return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{pad}" y="{height - pad + 15}" font-size="10">{x0:g}</text>',
        f'<text x="{width - pad}" y="{height - pad + 15}" font-size="10" text-anchor="end">{x1:g}</text>',
        f'<text x="5" y="{height - pad}" font-size="10">{("1e%g" % y0) if logy else ("%.3g" % y0)}</text>',
        f'<text x="5" y="{pad}" font-size="10">{("1e%g" % y1) if logy else ("%.3g" % y1)}</text>',
    ]
    for n, (label, ys) in enumerate(series.items()):
        pts = []
        for xv, yv in zip(xs, ys):
            yv = float(yv)
            if not math.isfinite(yv) or (logy and yv <= 0):
                continue
            pts.append(f"{px(xv):.2f},{py(math.log10(yv) if logy else yv):.2f}")
        color = COLORS[n % len(COLORS)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{" ".join(pts)}"/>')
        out.append(f'<text x="{width - pad - 5}" y="{pad + 15 * (n + 1)}" font-size="11" fill="{color}" text-anchor="end">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
