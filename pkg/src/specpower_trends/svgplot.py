"""Bare-bones SVG scatter/line charts (axes, points, one colour per series)."""

from __future__ import annotations

import math
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

PALETTE = {"Intel": "#1f77b4", "AMD": "#d62728", "All": "#555555"}
FALLBACK = ("#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")

Point = tuple[float, float]


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.floor(lo / step) * step
    ticks = []
    t = start
    while t <= hi + step * 1e-9:
        ticks.append(round(t, 10))
        t += step
    return ticks


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def render(title: str, xlabel: str, ylabel: str, points: Mapping[str, Sequence[Point]] | None = None,
           lines: Mapping[str, Sequence[Point]] | None = None, width: int = 640, height: int = 400) -> str:
    points = points or {}
    lines = lines or {}
    xs = [p[0] for s in (*points.values(), *lines.values()) for p in s]
    ys = [p[1] for s in (*points.values(), *lines.values()) for p in s]
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    xticks = _nice_ticks(min(xs), max(xs))
    yticks = _nice_ticks(min(0.0, min(ys)), max(ys))
    x0, x1, y0, y1 = xticks[0], xticks[-1], yticks[0], yticks[-1]
    left, right, top, bottom = 70, 110, 40, 50
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + (x - x0) / ((x1 - x0) or 1) * pw

    def sy(y):
        return top + ph - (y - y0) / ((y1 - y0) or 1) * ph

    colours = {}
    for i, name in enumerate(dict.fromkeys([*points, *lines])):
        colours[name] = PALETTE.get(name, FALLBACK[i % len(FALLBACK)])

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>',
    ]
    for t in xticks:
        out.append(f'<line x1="{sx(t):.1f}" y1="{top + ph}" x2="{sx(t):.1f}" y2="{top + ph + 4}" stroke="#000"/>')
        out.append(f'<text x="{sx(t):.1f}" y="{top + ph + 16}" text-anchor="middle">{_fmt(t)}</text>')
    for t in yticks:
        out.append(f'<line x1="{left - 4}" y1="{sy(t):.1f}" x2="{left}" y2="{sy(t):.1f}" stroke="#000"/>')
        out.append(f'<text x="{left - 6}" y="{sy(t) + 4:.1f}" text-anchor="end">{_fmt(t)}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="15" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 15 {top + ph / 2:.1f})">{escape(ylabel)}</text>')

    for name, pts in points.items():
        for x, y in pts:
            out.append(f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="2.5" fill="{colours[name]}" fill-opacity="0.5"/>')
    for name, pts in lines.items():
        if pts:
            path = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in sorted(pts))
            out.append(f'<polyline points="{path}" fill="none" stroke="{colours[name]}" stroke-width="2"/>')

    for i, name in enumerate(colours):
        y = top + 12 + 16 * i
        out.append(f'<rect x="{left + pw + 10}" y="{y - 8}" width="10" height="10" fill="{colours[name]}"/>')
        out.append(f'<text x="{left + pw + 24}" y="{y + 1}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
