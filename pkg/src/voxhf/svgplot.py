"""Minimal self-contained SVG emission for the report figures.

Hand-rolled rather than a plotting library so outputs are byte-deterministic
(fixed float formatting, no timestamps or generated ids) and need no display
stack.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

PALETTE = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
    "#17becf", "#7f7f7f",
]
W, H = 560, 360
MARGIN = dict(left=62, right=16, top=34, bottom=46)


def _fmt(v: float) -> str:
    return f"{v:.4f}".rstrip("0").rstrip(".")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min(s * mag for s in (1, 2, 5, 10) if s * mag >= raw)
    start = math.ceil(lo / step) * step
    out = []
    t = start
    while t <= hi + 1e-12:
        out.append(round(t, 10))
        t += step
    return out


class Panel:
    """One cartesian panel with polyline series and optional point markers."""

    def __init__(self, title: str, xlabel: str, ylabel: str,
                 ylim: tuple[float, float] | None = None):
        self.title = title
        self.xlabel = xlabel
        self.ylabel = ylabel
        self.series: list[tuple[str, list[float], list[float], str]] = []
        self.ylim = ylim

    def add(self, label: str, xs, ys, color: str | None = None):
        pts = [(float(x), float(y)) for x, y in zip(xs, ys)
               if math.isfinite(x) and math.isfinite(y)]
        color = color or PALETTE[len(self.series) % len(PALETTE)]
        self.series.append((label, [p[0] for p in pts], [p[1] for p in pts], color))

    def _bounds(self):
        xs = [x for _, sx, _, _ in self.series for x in sx]
        ys = [y for _, _, sy, _ in self.series for y in sy]
        if not xs:
            xs, ys = [0.0, 1.0], [0.0, 1.0]
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(ys), max(ys)
        if self.ylim is not None:
            y0, y1 = self.ylim
        if x1 == x0:
            x1 = x0 + 1
        if y1 == y0:
            y1 = y0 + 1
        pad = 0.04 * (y1 - y0) if self.ylim is None else 0.0
        return x0, x1, y0 - pad, y1 + pad

    def render(self, ox: float, oy: float) -> list[str]:
        x0, x1, y0, y1 = self._bounds()
        px0, px1 = ox + MARGIN["left"], ox + W - MARGIN["right"]
        py0, py1 = oy + H - MARGIN["bottom"], oy + MARGIN["top"]

        def sx(x):
            return px0 + (x - x0) / (x1 - x0) * (px1 - px0)

        def sy(y):
            return py0 + (y - y0) / (y1 - y0) * (py1 - py0)

        parts = [
            f'<rect x="{_fmt(px0)}" y="{_fmt(py1)}" width="{_fmt(px1 - px0)}"'
            f' height="{_fmt(py0 - py1)}" fill="none" stroke="#333"/>',
            f'<text x="{_fmt((px0 + px1) / 2)}" y="{_fmt(oy + 18)}"'
            f' text-anchor="middle" font-size="13" font-weight="bold">'
            f"{self.title}</text>",
            f'<text x="{_fmt((px0 + px1) / 2)}" y="{_fmt(oy + H - 10)}"'
            f' text-anchor="middle" font-size="11">{self.xlabel}</text>',
            f'<text x="{_fmt(ox + 14)}" y="{_fmt((py0 + py1) / 2)}"'
            f' text-anchor="middle" font-size="11" transform="rotate(-90 '
            f'{_fmt(ox + 14)} {_fmt((py0 + py1) / 2)})">{self.ylabel}</text>',
        ]
        for t in _ticks(x0, x1):
            parts.append(
                f'<line x1="{_fmt(sx(t))}" y1="{_fmt(py0)}" x2="{_fmt(sx(t))}"'
                f' y2="{_fmt(py0 + 4)}" stroke="#333"/>'
                f'<text x="{_fmt(sx(t))}" y="{_fmt(py0 + 16)}"'
                f' text-anchor="middle" font-size="10">{_fmt(t)}</text>'
            )
        for t in _ticks(y0, y1):
            parts.append(
                f'<line x1="{_fmt(px0 - 4)}" y1="{_fmt(sy(t))}" x2="{_fmt(px0)}"'
                f' y2="{_fmt(sy(t))}" stroke="#333"/>'
                f'<text x="{_fmt(px0 - 7)}" y="{_fmt(sy(t) + 3)}"'
                f' text-anchor="end" font-size="10">{_fmt(t)}</text>'
            )
        for li, (label, xs, ys, color) in enumerate(self.series):
            if xs:
                pts = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}"
                               for x, y in zip(xs, ys))
                parts.append(
                    f'<polyline points="{pts}" fill="none" stroke="{color}"'
                    f' stroke-width="1.6"/>'
                )
                for x, y in zip(xs, ys):
                    parts.append(
                        f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="2.2"'
                        f' fill="{color}"/>'
                    )
            ly = py1 + 14 + 13 * li
            parts.append(
                f'<line x1="{_fmt(px1 - 120)}" y1="{_fmt(ly - 3)}"'
                f' x2="{_fmt(px1 - 100)}" y2="{_fmt(ly - 3)}"'
                f' stroke="{color}" stroke-width="2"/>'
                f'<text x="{_fmt(px1 - 95)}" y="{_fmt(ly)}" font-size="10">'
                f"{label}</text>"
            )
        return parts


def write_panels(path: str | Path, panels: list[Panel], columns: int = 2) -> None:
    rows = (len(panels) + columns - 1) // columns
    width = columns * W
    height = rows * H
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}"'
        f' height="{height}" viewBox="0 0 {width} {height}"'
        f' font-family="Helvetica,Arial,sans-serif">',
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    for i, panel in enumerate(panels):
        ox = (i % columns) * W
        oy = (i // columns) * H
        parts.extend(panel.render(ox, oy))
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts), encoding="utf-8")


def write_beeswarm(
    path: str | Path,
    labels: list[str],
    phi_rows: list,
    value_rows: list,
    title: str,
    xlabel: str,
) -> None:
    """Beeswarm-style attribution summary: one row per feature, one dot per
    sample at its attribution, colored by the sample's feature-value rank
    (blue low, red high). Deterministic layout, no randomness."""
    n = len(labels)
    row_h = 30
    left = 300
    width = 880
    height = 84 + n * row_h
    span = max(max((abs(v) for row in phi_rows for v in row), default=0.0), 1e-12)
    x0, x1 = left, width - 30
    xmid = (x0 + x1) / 2

    def sx(v):
        return xmid + v / span * (x1 - x0) / 2

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}"'
        f' height="{height}" viewBox="0 0 {width} {height}"'
        f' font-family="Helvetica,Arial,sans-serif">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{width / 2}" y="22" text-anchor="middle" font-size="14"'
        f' font-weight="bold">{title}</text>',
        f'<line x1="{_fmt(xmid)}" y1="40" x2="{_fmt(xmid)}"'
        f' y2="{height - 40}" stroke="#999" stroke-dasharray="3,3"/>',
        f'<text x="{_fmt(xmid)}" y="{height - 14}" text-anchor="middle"'
        f' font-size="11">{xlabel}</text>',
    ]
    for i, (label, phis, values) in enumerate(zip(labels, phi_rows, value_rows)):
        yc = 56 + i * row_h
        parts.append(
            f'<text x="{left - 8}" y="{_fmt(yc + 4)}" text-anchor="end"'
            f' font-size="10">{label}</text>'
        )
        vals = np.asarray(values, dtype=float)
        order = np.argsort(np.argsort(vals, kind="stable"), kind="stable")
        denom = max(len(vals) - 1, 1)
        for j, phi in enumerate(phis):
            t = order[j] / denom
            r = int(30 + 195 * t)
            b = int(225 - 195 * t)
            jitter = ((j * 7) % 11 - 5) * 1.6
            parts.append(
                f'<circle cx="{_fmt(sx(float(phi)))}" cy="{_fmt(yc + jitter)}"'
                f' r="2.4" fill="rgb({r},60,{b})" fill-opacity="0.75"/>'
            )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts), encoding="utf-8")


def write_bar_chart(
    path: str | Path,
    labels: list[str],
    values: list[float],
    colors: list[str],
    title: str,
    xlabel: str,
) -> None:
    """Horizontal bar chart (used for the attribution summary)."""
    n = len(labels)
    row_h = 26
    left = 300
    width = 820
    height = 70 + n * row_h
    vmax = max([abs(v) for v in values] + [1e-12])
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}"'
        f' height="{height}" viewBox="0 0 {width} {height}"'
        f' font-family="Helvetica,Arial,sans-serif">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{width / 2}" y="22" text-anchor="middle" font-size="14"'
        f' font-weight="bold">{title}</text>',
        f'<text x="{(left + width - 20) / 2}" y="{height - 12}"'
        f' text-anchor="middle" font-size="11">{xlabel}</text>',
    ]
    for i, (label, value, color) in enumerate(zip(labels, values, colors)):
        y = 46 + i * row_h
        bar = abs(value) / vmax * (width - left - 40)
        parts.append(
            f'<text x="{left - 8}" y="{_fmt(y + 13)}" text-anchor="end"'
            f' font-size="10">{label}</text>'
            f'<rect x="{left}" y="{_fmt(y)}" width="{_fmt(bar)}" height="18"'
            f' fill="{color}"/>'
            f'<text x="{_fmt(left + bar + 5)}" y="{_fmt(y + 13)}"'
            f' font-size="10">{_fmt(value)}</text>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts), encoding="utf-8")
