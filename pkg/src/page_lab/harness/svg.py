"""Tiny deterministic SVG line charts, no plotting dependency.

Output is a fixed 800x500 viewport with optional log axes; all numbers are
formatted with %.6g so identical inputs give identical bytes.
"""

from __future__ import annotations

import math

W, H = 800, 500
ML, MR, MT, MB = 70, 160, 40, 55
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
           "#17becf", "#7f7f7f")


def _fmt(v: float) -> str:
    return "%.6g" % v


def _transform(vals, lo, hi, out_lo, out_hi, log):
    if log:
        lo, hi = math.log10(lo), math.log10(hi)
        vals = [math.log10(v) for v in vals]
    span = hi - lo if hi > lo else 1.0
    return [out_lo + (v - lo) * (out_hi - out_lo) / span for v in vals]


def _ticks(lo, hi, log):
    if log:
        a, b = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
        if b - a > 12:
            step = math.ceil((b - a) / 12)
        else:
            step = 1
        return [10.0 ** e for e in range(a, b + 1, step)]
    span = hi - lo if hi > lo else 1.0
    step = 10.0 ** math.floor(math.log10(span / 4))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= 6:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    out = []
    v = first
    while v <= hi + 1e-12 * span:
        out.append(v)
        v += step
    return out


def line_chart(series, path: str, *, title: str = "", x_label: str = "",
               y_label: str = "", log_x: bool = False, log_y: bool = False):
    """Write a line chart of [(label, xs, ys), ...] to path.

    Nonpositive values are dropped from log-scaled axes; a series with no
    plottable points is skipped but still listed in the legend.
    """
    cleaned = []
    for label, xs, ys in series:
        pts = [(float(x), float(y)) for x, y in zip(xs, ys)
               if math.isfinite(x) and math.isfinite(y)
               and (not log_x or x > 0) and (not log_y or y > 0)]
        cleaned.append((label, pts))
    allpts = [pt for _, pts in cleaned for pt in pts]
    if not allpts:
        xlo, xhi, ylo, yhi = 1.0, 10.0, 1.0, 10.0
    else:
        xlo = min(p[0] for p in allpts)
        xhi = max(p[0] for p in allpts)
        ylo = min(p[1] for p in allpts)
        yhi = max(p[1] for p in allpts)
        if xlo == xhi:
            xlo, xhi = (xlo / 2, xhi * 2) if log_x else (xlo - 1, xhi + 1)
        if ylo == yhi:
            ylo, yhi = (ylo / 2, yhi * 2) if log_y else (ylo - 1, yhi + 1)

    out = []
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">'
    )
    out.append(f'<rect width="{W}" height="{H}" fill="white"/>')
    if title:
        out.append(f'<text x="{W // 2}" y="24" text-anchor="middle" '
                   f'font-size="15">{title}</text>')

    out.append(f'<line x1="{ML}" y1="{H - MB}" x2="{W - MR}" y2="{H - MB}" '
               f'stroke="black"/>')
    out.append(f'<line x1="{ML}" y1="{MT}" x2="{ML}" y2="{H - MB}" '
               f'stroke="black"/>')

    for tv in _ticks(xlo, xhi, log_x):
        if tv < xlo * (1 - 1e-12) or tv > xhi * (1 + 1e-12):
            continue
        (px,) = _transform([tv], xlo, xhi, ML, W - MR, log_x)
        out.append(f'<line x1="{_fmt(px)}" y1="{H - MB}" x2="{_fmt(px)}" '
                   f'y2="{H - MB + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(px)}" y="{H - MB + 18}" '
                   f'text-anchor="middle">{_fmt(tv)}</text>')
    for tv in _ticks(ylo, yhi, log_y):
        if tv < ylo * (1 - 1e-12) or tv > yhi * (1 + 1e-12):
            continue
        (py,) = _transform([tv], ylo, yhi, H - MB, MT, log_y)
        out.append(f'<line x1="{ML - 5}" y1="{_fmt(py)}" x2="{ML}" '
                   f'y2="{_fmt(py)}" stroke="black"/>')
        out.append(f'<text x="{ML - 8}" y="{_fmt(py + 4)}" '
                   f'text-anchor="end">{_fmt(tv)}</text>')
    if x_label:
        out.append(f'<text x="{(ML + W - MR) // 2}" y="{H - 12}" '
                   f'text-anchor="middle">{x_label}</text>')
    if y_label:
        out.append(f'<text x="18" y="{(MT + H - MB) // 2}" text-anchor="middle" '
                   f'transform="rotate(-90 18 {(MT + H - MB) // 2})">{y_label}</text>')

    for k, (label, pts) in enumerate(cleaned):
        color = PALETTE[k % len(PALETTE)]
        if pts:
            xs = _transform([p[0] for p in pts], xlo, xhi, ML, W - MR, log_x)
            ys = _transform([p[1] for p in pts], ylo, yhi, H - MB, MT, log_y)
            coords = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, ys))
            out.append(f'<polyline points="{coords}" fill="none" '
                       f'stroke="{color}" stroke-width="1.5"/>')
        ly = MT + 16 + 18 * k
        out.append(f'<line x1="{W - MR + 10}" y1="{ly - 4}" x2="{W - MR + 34}" '
                   f'y2="{ly - 4}" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{W - MR + 40}" y="{ly}">{label}</text>')

    out.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")
