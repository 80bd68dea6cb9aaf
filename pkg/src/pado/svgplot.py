"""Minimal self-contained SVG charts (lines, markers, dashed references, stacked areas)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from html import escape
from typing import List, Optional, Sequence

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f")

W, H = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 78, 150, 36, 52


@dataclass
class Series:
    label: str
    x: Sequence[float]
    y: Sequence[float]
    style: str = "line"  # line | marker | dashed | area
    color: Optional[str] = None
    base: Optional[Sequence[float]] = None  # lower edge for area series


@dataclass
class Chart:
    title: str
    xlabel: str
    ylabel: str
    logx: bool = False
    logy: bool = False
    series: List[Series] = field(default_factory=list)

    def add(self, *args, **kwargs) -> "Chart":
        self.series.append(Series(*args, **kwargs))
        return self

    def render(self) -> str:
        return render(self)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.render())


def _fmt(v: float) -> str:
    if v == 0:
        return "0"
    a = abs(v)
    if a >= 1e4 or a < 1e-2:
        return f"{v:.1e}"
    return f"{v:.3g}"


def _ticks(lo: float, hi: float, log: bool, n: int = 5):
    if log:
        a, b = math.floor(lo), math.ceil(hi)
        step = max(1, (b - a) // n)
        return [float(e) for e in range(a, b + 1, step) if lo - 1e-9 <= e <= hi + 1e-9]
    span = hi - lo
    raw = span / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    out, v = [], start
    while v <= hi + 1e-9 * span:
        out.append(v)
        v += step
    return out


def _clean(values, log):
    out = []
    for v in values:
        v = float(v)
        if not math.isfinite(v) or (log and v <= 0):
            out.append(None)
        else:
            out.append(math.log10(v) if log else v)
    return out


def _bounds(vals):
    vals = [v for v in vals if v is not None]
    if not vals:
        return 0.0, 1.0
    lo, hi = min(vals), max(vals)
    if hi - lo < 1e-12 * max(1.0, abs(hi)):
        pad = 0.5 if hi == 0 else 0.05 * abs(hi)
        return lo - pad, hi + pad
    pad = 0.04 * (hi - lo)
    return lo - pad, hi + pad


def render(chart: Chart) -> str:
    xs, ys = [], []
    prepared = []
    for s in chart.series:
        x = _clean(s.x, chart.logx)
        y = _clean(s.y, chart.logy)
        b = _clean(s.base, chart.logy) if s.base is not None else None
        prepared.append((s, x, y, b))
        xs += x
        ys += y + (b or [])
    x0, x1 = _bounds(xs)
    y0, y1 = _bounds(ys)
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM

    def px(v):
        return LEFT + (v - x0) / (x1 - x0) * pw

    def py(v):
        return TOP + ph - (v - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" '
           f'font-family="sans-serif" font-size="11">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{LEFT + pw / 2:.1f}" y="20" text-anchor="middle" font-size="13">{escape(chart.title)}</text>',
           f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>']
    for t in _ticks(x0, x1, chart.logx):
        lab = _fmt(10 ** t if chart.logx else t)
        out.append(f'<line x1="{px(t):.1f}" y1="{TOP + ph}" x2="{px(t):.1f}" y2="{TOP + ph + 4}" stroke="#333"/>')
        out.append(f'<text x="{px(t):.1f}" y="{TOP + ph + 16}" text-anchor="middle">{lab}</text>')
    for t in _ticks(y0, y1, chart.logy):
        lab = _fmt(10 ** t if chart.logy else t)
        out.append(f'<line x1="{LEFT - 4}" y1="{py(t):.1f}" x2="{LEFT}" y2="{py(t):.1f}" stroke="#333"/>')
        out.append(f'<line x1="{LEFT}" y1="{py(t):.1f}" x2="{LEFT + pw}" y2="{py(t):.1f}" stroke="#eee"/>')
        out.append(f'<text x="{LEFT - 6}" y="{py(t) + 4:.1f}" text-anchor="end">{lab}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.1f}" y="{H - 12}" text-anchor="middle">{escape(chart.xlabel)}</text>')
    out.append(f'<text transform="translate(16,{TOP + ph / 2:.1f}) rotate(-90)" text-anchor="middle">'
               f'{escape(chart.ylabel)}</text>')

    for k, (s, x, y, b) in enumerate(prepared):
        color = s.color or PALETTE[k % len(PALETTE)]
        pts = [(px(a), py(c)) for a, c in zip(x, y) if a is not None and c is not None]
        if s.style == "area" and b is not None:
            lower = [(px(a), py(c)) for a, c in zip(x, b) if a is not None and c is not None]
            poly = pts + lower[::-1]
            if poly:
                d = " ".join(f"{a:.1f},{c:.1f}" for a, c in poly)
                out.append(f'<polygon points="{d}" fill="{color}" fill-opacity="0.55" stroke="none"/>')
        elif s.style == "marker":
            out += [f'<circle cx="{a:.1f}" cy="{c:.1f}" r="3.5" fill="{color}"/>' for a, c in pts]
        elif pts:
            d = " ".join(f"{a:.1f},{c:.1f}" for a, c in pts)
            dash = ' stroke-dasharray="6,4"' if s.style == "dashed" else ""
            out.append(f'<polyline points="{d}" fill="none" stroke="{color}" stroke-width="1.6"{dash}/>')
            if len(pts) <= 12:
                out += [f'<circle cx="{a:.1f}" cy="{c:.1f}" r="2.5" fill="{color}"/>' for a, c in pts]
        ly = TOP + 10 + 16 * k
        lx = LEFT + pw + 10
        dash = ' stroke-dasharray="6,4"' if s.style == "dashed" else ""
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 18}" y2="{ly}" stroke="{color}" stroke-width="3"{dash}/>')
        out.append(f'<text x="{lx + 24}" y="{ly + 4}">{escape(s.label)}</text>')
    out.append("</svg>\n")
    return "\n".join(out)
