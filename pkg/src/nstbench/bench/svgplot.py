"""Dependency-free SVG box plots for benchmark summaries.

Fixed 800x500 canvas. One box per labelled group: interquartile box,
median line, whiskers at the furthest points within 1.5 IQR of the box,
and circles for anything beyond. Labels are XML-escaped. Each group is
wrapped in <g class="box"> so plots stay machine-checkable.
"""

import math
from typing import Dict, List, Sequence
from xml.sax.saxutils import escape

WIDTH = 800
HEIGHT = 500
MARGIN_LEFT = 70
MARGIN_RIGHT = 20
MARGIN_TOP = 40
MARGIN_BOTTOM = 70


def _quartiles(values: Sequence[float]):
    """Median-split quartiles: (q1, median, q3)."""
    xs = sorted(values)
    n = len(xs)

    def _median(seg):
        m = len(seg)
        mid = m // 2
        return seg[mid] if m % 2 else 0.5 * (seg[mid - 1] + seg[mid])

    med = _median(xs)
    half = n // 2
    lower = xs[:half]
    upper = xs[half + 1:] if n % 2 else xs[half:]
    if not lower:
        lower = xs
    if not upper:
        upper = xs
    return _median(lower), med, _median(upper)


def box_stats(values: Sequence[float]) -> dict:
    q1, med, q3 = _quartiles(values)
    iqr = q3 - q1
    lo_fence = q1 - 1.5 * iqr
    hi_fence = q3 + 1.5 * iqr
    inliers = [v for v in values if lo_fence <= v <= hi_fence]
    outliers = [v for v in values if v < lo_fence or v > hi_fence]
    whisker_lo = min(inliers) if inliers else q1
    whisker_hi = max(inliers) if inliers else q3
    return {
        "q1": q1, "median": med, "q3": q3,
        "whisker_lo": whisker_lo, "whisker_hi": whisker_hi,
        "outliers": outliers,
    }


def _ticks(lo: float, hi: float, n: int = 6) -> List[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / max(1, n - 1)
    mag = 10 ** math.floor(math.log10(raw))
    for mult in (1, 2, 2.5, 5, 10):
        step = mult * mag
        if step >= raw:
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + step * 1e-9:
        ticks.append(round(t, 12))
        t += step
    return ticks or [lo]


def _fmt(v: float) -> str:
    if v == 0:
        return "0"
    a = abs(v)
    if a >= 1000 or a < 0.001:
        return f"{v:.2e}"
    return f"{v:.4g}"


def boxplot_svg(groups: Dict[str, Sequence[float]], title: str, ylabel: str) -> str:
    """Render labelled value groups as a box plot; returns SVG text."""
    labels = list(groups.keys())
    stats = {}
    all_vals: List[float] = []
    for label in labels:
        vals = [float(v) for v in groups[label] if v is not None and math.isfinite(float(v))]
        if vals:
            stats[label] = box_stats(vals)
            all_vals.extend(vals)

    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="16">{escape(title)}</text>',
    ]

    if not all_vals:
        parts.append(
            f'<text x="{WIDTH / 2}" y="{HEIGHT / 2}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">no finite data</text>'
        )
        parts.append("</svg>")
        return "\n".join(parts)

    lo, hi = min(all_vals), max(all_vals)
    if hi == lo:
        pad = abs(hi) * 0.1 or 1.0
        lo, hi = lo - pad, hi + pad
    else:
        pad = (hi - lo) * 0.08
        lo, hi = lo - pad, hi + pad

    def y(v: float) -> float:
        return MARGIN_TOP + plot_h * (1.0 - (v - lo) / (hi - lo))

    # axes
    x0 = MARGIN_LEFT
    y0 = MARGIN_TOP + plot_h
    parts.append(f'<line x1="{x0}" y1="{MARGIN_TOP}" x2="{x0}" y2="{y0}" stroke="black"/>')
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0 + plot_w}" y2="{y0}" stroke="black"/>')
    for t in _ticks(lo, hi):
        ty = y(t)
        parts.append(f'<line x1="{x0 - 5}" y1="{ty:.2f}" x2="{x0}" y2="{ty:.2f}" stroke="black"/>')
        parts.append(
            f'<text x="{x0 - 8}" y="{ty + 4:.2f}" text-anchor="end" font-family="sans-serif" '
            f'font-size="11">{escape(_fmt(t))}</text>'
        )
    parts.append(
        f'<text x="16" y="{MARGIN_TOP + plot_h / 2}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13" '
        f'transform="rotate(-90 16 {MARGIN_TOP + plot_h / 2})">{escape(ylabel)}</text>'
    )

    n = len(labels)
    slot = plot_w / max(1, n)
    box_w = min(60.0, slot * 0.5)

    for i, label in enumerate(labels):
        cx = x0 + slot * (i + 0.5)
        parts.append(
            f'<text x="{cx:.2f}" y="{y0 + 20}" text-anchor="middle" font-family="sans-serif" '
            f'font-size="12">{escape(label)}</text>'
        )
        if label not in stats:
            continue
        st = stats[label]
        top = y(st["q3"])
        bot = y(st["q1"])
        med = y(st["median"])
        wlo = y(st["whisker_lo"])
        whi = y(st["whisker_hi"])
        half = box_w / 2
        group = [f'<g class="box" data-label="{escape(label, {chr(34): "&quot;"})}">']
        group.append(
            f'<line x1="{cx:.2f}" y1="{whi:.2f}" x2="{cx:.2f}" y2="{top:.2f}" stroke="black"/>'
        )
        group.append(
            f'<line x1="{cx:.2f}" y1="{bot:.2f}" x2="{cx:.2f}" y2="{wlo:.2f}" stroke="black"/>'
        )
        group.append(
            f'<line x1="{cx - half / 2:.2f}" y1="{whi:.2f}" x2="{cx + half / 2:.2f}" '
            f'y2="{whi:.2f}" stroke="black"/>'
        )
        group.append(
            f'<line x1="{cx - half / 2:.2f}" y1="{wlo:.2f}" x2="{cx + half / 2:.2f}" '
            f'y2="{wlo:.2f}" stroke="black"/>'
        )
        group.append(
            f'<rect x="{cx - half:.2f}" y="{top:.2f}" width="{box_w:.2f}" '
            f'height="{max(0.5, bot - top):.2f}" fill="#9ecae1" stroke="black"/>'
        )
        group.append(
            f'<line x1="{cx - half:.2f}" y1="{med:.2f}" x2="{cx + half:.2f}" y2="{med:.2f}" '
            f'stroke="black" stroke-width="2"/>'
        )
        for ov in st["outliers"]:
            group.append(
                f'<circle cx="{cx:.2f}" cy="{y(ov):.2f}" r="3" fill="none" stroke="black"/>'
            )
        group.append("</g>")
        parts.append("\n".join(group))

    parts.append("</svg>")
    return "\n".join(parts)
