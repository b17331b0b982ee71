"""Minimal deterministic SVG line and scatter panels."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    label: str = ""
    markers: bool = False


def _num(v: float) -> str:
    return f"{v:.2f}"


def _decade_ticks(lo: float, hi: float) -> list[float]:
    return [10.0**k for k in range(math.floor(lo), math.ceil(hi) + 1) if lo - 1e-9 <= k <= hi + 1e-9]


def _linear_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=mag * 10)
    first = math.ceil(lo / step) * step
    return [first + i * step for i in range(int((hi - first) / step + 1e-9) + 1)]


def _tick_label(v: float, log: bool) -> str:
    if log:
        return f"1e{int(round(math.log10(v)))}"
    return f"{v:g}"


def render_svg(
    series: Sequence[Series],
    xlabel: str = "t",
    ylabel: str = "F_t",
    title: str = "",
    logx: bool = True,
    logy: bool = True,
    width: int = 640,
    height: int = 440,
) -> str:
    """Render one panel.  Non-positive values are dropped on log axes."""
    left, right, top, bottom = 70, 150, 40, 55
    pw, ph = width - left - right, height - top - bottom

    cleaned = []
    for s in series:
        x, y = np.asarray(s.x, dtype=float), np.asarray(s.y, dtype=float)
        keep = np.isfinite(x) & np.isfinite(y)
        if logx:
            keep &= x > 0
        if logy:
            keep &= y > 0
        cleaned.append((s, x[keep], y[keep]))
    xs = np.concatenate([c[1] for c in cleaned]) if cleaned else np.array([1.0])
    ys = np.concatenate([c[2] for c in cleaned]) if cleaned else np.array([1.0])
    if xs.size == 0:
        xs, ys = np.array([1.0]), np.array([1.0])
    tx = np.log10 if logx else (lambda a: np.asarray(a, dtype=float))
    ty = np.log10 if logy else (lambda a: np.asarray(a, dtype=float))
    x0, x1 = float(np.min(tx(xs))), float(np.max(tx(xs)))
    y0, y1 = float(np.min(ty(ys))), float(np.max(ty(ys)))
    if x1 - x0 < 1e-12:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.03 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(v):
        return left + (tx(v) - x0) / (x1 - x0) * pw

    def py(v):
        return top + ph - (ty(v) - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    xticks = _decade_ticks(x0, x1) if logx else _linear_ticks(x0, x1)
    yticks = _decade_ticks(y0, y1) if logy else _linear_ticks(y0, y1)
    for v in xticks:
        x = float(px(v))
        out.append(f'<line x1="{_num(x)}" y1="{top + ph}" x2="{_num(x)}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{_num(x)}" y="{top + ph + 18}" text-anchor="middle">{_tick_label(v, logx)}</text>')
    for v in yticks:
        y = float(py(v))
        out.append(f'<line x1="{left - 5}" y1="{_num(y)}" x2="{left}" y2="{_num(y)}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{_num(y + 4)}" text-anchor="end">{_tick_label(v, logy)}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{top + ph / 2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {top + ph / 2})">{escape(ylabel)}</text>'
    )
    if title:
        out.append(f'<text x="{left + pw / 2}" y="{top - 14}" text-anchor="middle">{escape(title)}</text>')

    for k, (s, x, y) in enumerate(cleaned):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_num(float(a))},{_num(float(b))}" for a, b in zip(px(x), py(y)))
        if s.markers:
            for a, b in zip(px(x), py(y)):
                out.append(f'<circle cx="{_num(float(a))}" cy="{_num(float(b))}" r="3.5" fill="{color}"/>')
        elif pts:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        if s.label:
            ly = top + 14 + 18 * k
            lx = left + pw + 12
            out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
            out.append(f'<text x="{lx + 26}" y="{ly}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
