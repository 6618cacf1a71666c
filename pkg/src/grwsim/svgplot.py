"""Hand-rolled SVG emitters: dependency-light and byte-deterministic.

Output carries no timestamps or random ids, so plots are diffable in tests
and re-plotting never changes numeric results.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

WIDTH, HEIGHT = 640, 400
MARGIN = 56
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b")


def _scale(values, lo, hi, out_lo, out_hi):
    span = hi - lo if hi > lo else 1.0
    return [out_lo + (v - lo) / span * (out_hi - out_lo) for v in values]


def _axes(title: str, x_label: str, y_label: str,
          x_range: tuple[float, float], y_range: tuple[float, float]) -> list[str]:
    x0, x1 = MARGIN, WIDTH - MARGIN
    y0, y1 = HEIGHT - MARGIN, MARGIN
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="15" '
        f'font-family="sans-serif">{title}</text>',
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-size="12" font-family="sans-serif">{x_label}</text>',
        f'<text x="16" y="{HEIGHT / 2}" text-anchor="middle" font-size="12" '
        f'font-family="sans-serif" transform="rotate(-90 16 {HEIGHT / 2})">{y_label}</text>',
        f'<text x="{x0}" y="{y0 + 16}" font-size="10" font-family="sans-serif">'
        f'{x_range[0]:.4g}</text>',
        f'<text x="{x1}" y="{y0 + 16}" text-anchor="end" font-size="10" '
        f'font-family="sans-serif">{x_range[1]:.4g}</text>',
        f'<text x="{x0 - 4}" y="{y0}" text-anchor="end" font-size="10" '
        f'font-family="sans-serif">{y_range[0]:.4g}</text>',
        f'<text x="{x0 - 4}" y="{y1 + 4}" text-anchor="end" font-size="10" '
        f'font-family="sans-serif">{y_range[1]:.4g}</text>',
    ]
    return parts


def line_chart(path, series: dict[str, tuple[Sequence[float], Sequence[float]]],
               title: str = "", x_label: str = "", y_label: str = "") -> None:
    """Write a multi-series line chart; series maps name -> (xs, ys)."""
    all_x = [x for xs, _ in series.values() for x in xs]
    all_y = [y for _, ys in series.values() for y in ys if math.isfinite(y)]
    if not all_x or not all_y:
        raise ValueError("nothing to plot")
    x_lo, x_hi = min(all_x), max(all_x)
    y_lo, y_hi = min(all_y), max(all_y)
    if y_lo == y_hi:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    parts = _axes(title, x_label, y_label, (x_lo, x_hi), (y_lo, y_hi))
    for i, (color, (name, (xs, ys))) in enumerate(zip(PALETTE, series.items())):
        px = _scale(xs, x_lo, x_hi, MARGIN, WIDTH - MARGIN)
        py = _scale(ys, y_lo, y_hi, HEIGHT - MARGIN, MARGIN)
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(px, py))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        parts.append(f'<text x="{WIDTH - MARGIN}" y="{MARGIN + 14 * (i + 1)}" '
                     f'text-anchor="end" font-size="11" font-family="sans-serif" '
                     f'fill="{color}">{name}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts))


def bar_chart(path, labels: Sequence[str], values: Sequence[float],
              title: str = "", y_label: str = "") -> None:
    y_lo = min(0.0, min(values))
    y_hi = max(values) if max(values) > y_lo else y_lo + 1.0
    parts = _axes(title, "", y_label, (0, len(values)), (y_lo, y_hi))
    span = WIDTH - 2 * MARGIN
    bar_w = span / max(len(values), 1) * 0.7
    gap = span / max(len(values), 1)
    base = _scale([0.0], y_lo, y_hi, HEIGHT - MARGIN, MARGIN)[0]
    for i, (label, value) in enumerate(zip(labels, values)):
        top = _scale([value], y_lo, y_hi, HEIGHT - MARGIN, MARGIN)[0]
        x = MARGIN + i * gap + (gap - bar_w) / 2
        y, h = (top, base - top) if value >= 0 else (base, top - base)
        parts.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{bar_w:.2f}" '
                     f'height="{abs(h):.2f}" fill="{PALETTE[0]}"/>')
        parts.append(f'<text x="{x + bar_w / 2:.2f}" y="{HEIGHT - MARGIN + 14}" '
                     f'text-anchor="middle" font-size="10" '
                     f'font-family="sans-serif">{label}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts))


def histogram(path, values: Sequence[float], bins: int = 30,
              title: str = "", x_label: str = "") -> None:
    lo, hi = min(values), max(values)
    if lo == hi:
        lo, hi = lo - 1.0, hi + 1.0
    width = (hi - lo) / bins
    counts = [0] * bins
    for v in values:
        i = min(int((v - lo) / width), bins - 1)
        counts[i] += 1
    labels = [f"{lo + (i + 0.5) * width:.3g}" if i % max(bins // 6, 1) == 0 else ""
              for i in range(bins)]
    bar_chart(path, labels, counts, title=title, y_label="count")
