"""Minimal self-contained SVG line charts (no plotting dependencies).

Deterministic output: fixed canvas, fixed formatting, no timestamps.
"""

import math

_W, _H = 640, 480
_ML, _MR, _MT, _MB = 70, 20, 30, 50
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    step = 10 ** math.floor(math.log10(span / n))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= n:
            step *= mult
            break
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-12 * span:
        out.append(round(v, 12))
        v += step
    return out


def line_chart(path, series, title="", xlabel="", ylabel="",
               logx=False, logy=False):
    """Write a line chart; series is a list of (name, xs, ys)."""

    def tx(v):
        return math.log10(v) if logx else v

    def ty(v):
        return math.log10(v) if logy else v

    pts = [
        (tx(x), ty(y))
        for _, xs, ys in series
        for x, y in zip(xs, ys)
        if (not logx or x > 0) and (not logy or y > 0)
    ]
    if not pts:
        raise ValueError("nothing to plot")
    xlo = min(p[0] for p in pts)
    xhi = max(p[0] for p in pts)
    ylo = min(p[1] for p in pts)
    yhi = max(p[1] for p in pts)
    if xhi == xlo:
        xhi = xlo + 1.0
    if yhi == ylo:
        yhi = ylo + 1.0

    def sx(v):
        return _ML + (tx(v) - xlo) / (xhi - xlo) * (_W - _ML - _MR)

    def sy(v):
        return _H - _MB - (ty(v) - ylo) / (yhi - ylo) * (_H - _MT - _MB)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.1f}" y="18" text-anchor="middle" '
        f'font-size="14">{title}</text>',
    ]
    axis = 'stroke="black" stroke-width="1"'
    out.append(f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" '
               f'y2="{_H - _MB}" {axis}/>')
    out.append(f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" {axis}/>')
    for v in _ticks(xlo, xhi):
        px = _ML + (v - xlo) / (xhi - xlo) * (_W - _ML - _MR)
        label = f"1e{v:g}" if logx else f"{v:g}"
        out.append(f'<line x1="{px:.1f}" y1="{_H - _MB}" x2="{px:.1f}" '
                   f'y2="{_H - _MB + 5}" {axis}/>')
        out.append(f'<text x="{px:.1f}" y="{_H - _MB + 18}" '
                   f'text-anchor="middle" font-size="11">{label}</text>')
    for v in _ticks(ylo, yhi):
        py = _H - _MB - (v - ylo) / (yhi - ylo) * (_H - _MT - _MB)
        label = f"1e{v:g}" if logy else f"{v:g}"
        out.append(f'<line x1="{_ML - 5}" y1="{py:.1f}" x2="{_ML}" '
                   f'y2="{py:.1f}" {axis}/>')
        out.append(f'<text x="{_ML - 8}" y="{py + 4:.1f}" text-anchor="end" '
                   f'font-size="11">{label}</text>')
    out.append(f'<text x="{(_ML + _W - _MR) / 2:.1f}" y="{_H - 12}" '
               f'text-anchor="middle" font-size="12">{xlabel}</text>')
    out.append(f'<text x="16" y="{(_MT + _H - _MB) / 2:.1f}" font-size="12" '
               f'text-anchor="middle" transform="rotate(-90 16 '
               f'{(_MT + _H - _MB) / 2:.1f})">{ylabel}</text>')
    for si, (name, xs, ys) in enumerate(series):
        color = _COLORS[si % len(_COLORS)]
        coords = [
            f"{sx(x):.2f},{sy(y):.2f}"
            for x, y in zip(xs, ys)
            if (not logx or x > 0) and (not logy or y > 0)
        ]
        if not coords:
            continue
        out.append(f'<polyline points="{" ".join(coords)}" fill="none" '
                   f'stroke="{color}" stroke-width="1.5"/>')
        for c in coords:
            x, y = c.split(",")
            out.append(f'<circle cx="{x}" cy="{y}" r="2.5" fill="{color}"/>')
        out.append(f'<text x="{_W - _MR - 6}" y="{_MT + 14 + 14 * si}" '
                   f'text-anchor="end" font-size="11" '
                   f'fill="{color}">{name}</text>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
