"""Standalone SVG forest, funnel and residual plots.

Output is a pure function of the plot data: fixed 800x600 canvas, fixed
number formatting and element order, no timestamps or random ids.
"""

import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 800, 600
FONT = 'font-family="DejaVu Sans, Arial, sans-serif" font-size="12"'
Z95 = 1.959963984540054


def _f(x):
    return f"{x:.2f}"


def _svg(body, title, metadata=None):
    meta = f"<metadata>{escape(metadata)}</metadata>\n" if metadata else ""
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">\n' + meta +
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>\n'
        f'<text x="{WIDTH / 2:.0f}" y="24" text-anchor="middle" {FONT} font-weight="bold">'
        f"{escape(title)}</text>\n" + "".join(body) + "</svg>\n"
    )


def _line(x1, y1, x2, y2, stroke="black", dash=None, width=1):
    d = f' stroke-dasharray="{dash}"' if dash else ""
    return (
        f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" '
        f'stroke="{stroke}" stroke-width="{width}"{d}/>\n'
    )


def _text(x, y, s, anchor="start"):
    return f'<text x="{_f(x)}" y="{_f(y)}" text-anchor="{anchor}" {FONT}>{escape(str(s))}</text>\n'


def _num(x):
    return f"{x:.3f}" if abs(x) < 1000 else f"{x:.0f}"


def _tick_label(t, lo, hi):
    return f"{t:.0f}" if max(abs(lo), abs(hi)) >= 1000 else f"{t:.3g}"


def _ticks(lo, hi, n=5):
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def _padded(lo, hi):
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return -1.0, 1.0
    if hi == lo:
        pad = abs(lo) * 0.1 or 1.0
        return lo - pad, hi + pad
    pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


def _x_axis(lo, hi, left, right, y, label):
    sx = lambda v: left + (v - lo) / (hi - lo) * (right - left)
    out = [_line(left, y, right, y)]
    for t in _ticks(lo, hi):
        out.append(_line(sx(t), y, sx(t), y + 5))
        out.append(_text(sx(t), y + 18, _tick_label(t, lo, hi), "middle"))
    out.append(_text((left + right) / 2, y + 36, label, "middle"))
    return out, sx


def forest_svg(plot, title="Forest plot", effect_label="Effect", metadata=None):
    rows = plot.forest_rows
    studies = rows[:-2] if len(rows) >= 2 else rows
    summaries = rows[len(studies):]
    lo, hi = _padded(min(r.ci_low for r in rows), max(r.ci_high for r in rows))
    left, right, top, bottom = 220, 460, 50, HEIGHT - 70
    step = (bottom - top) / (len(rows) + 1)
    body, sx = _x_axis(lo, hi, left, right, bottom, effect_label)

    body.append(_text(20, top - 6, "Study"))
    body.append(_text(right + 20, top - 6, "Estimate [CI]"))
    body.append(_text(WIDTH - 85, top - 6, "W common", "end"))
    body.append(_text(WIDTH - 15, top - 6, "W random", "end"))
    wmax = max((r.weight_common for r in studies), default=1.0) or 1.0
    for i, r in enumerate(studies):
        y = top + step * (i + 0.5)
        body.append(_text(20, y + 4, r.study_id))
        body.append(_line(sx(r.ci_low), y, sx(r.ci_high), y))
        half = 2 + 8 * math.sqrt(r.weight_common / wmax)
        body.append(
            f'<rect x="{_f(sx(r.effect) - half)}" y="{_f(y - half)}" width="{_f(2 * half)}" '
            f'height="{_f(2 * half)}" fill="gray"/>\n'
        )
        body.append(_text(right + 20, y + 4, f"{_num(r.effect)} [{_num(r.ci_low)}, {_num(r.ci_high)}]"))
        body.append(_text(WIDTH - 85, y + 4, f"{100 * r.weight_common:.1f}%", "end"))
        body.append(_text(WIDTH - 15, y + 4, f"{100 * r.weight_random:.1f}%", "end"))
    for j, r in enumerate(summaries):
        y = top + step * (len(studies) + j + 0.5)
        pts = [(sx(r.ci_low), y), (sx(r.effect), y - 7), (sx(r.ci_high), y), (sx(r.effect), y + 7)]
        body.append(_text(20, y + 4, r.study_id))
        body.append(f'<polygon points="{" ".join(f"{_f(a)},{_f(b)}" for a, b in pts)}" fill="black"/>\n')
        body.append(_text(right + 20, y + 4, f"{_num(r.effect)} [{_num(r.ci_low)}, {_num(r.ci_high)}]"))
    if summaries:
        body.append(_line(sx(summaries[0].effect), top, sx(summaries[0].effect), bottom, "gray", "4,3"))
    return _svg(body, title, metadata)


def funnel_svg(plot, pooled, title="Funnel plot", effect_label="Effect", metadata=None):
    pts = plot.funnel_points
    se_max = max((se for _, se in pts), default=1.0) * 1.1 or 1.0
    xs = [e for e, _ in pts] + [pooled - Z95 * se_max, pooled + Z95 * se_max]
    lo, hi = _padded(min(xs), max(xs))
    left, right, top, bottom = 90, WIDTH - 40, 50, HEIGHT - 70
    body, sx = _x_axis(lo, hi, left, right, bottom, effect_label)
    sy = lambda se: top + se / se_max * (bottom - top)

    body.append(_line(left, top, left, bottom))
    for t in _ticks(0.0, se_max):
        body.append(_line(left - 5, sy(t), left, sy(t)))
        body.append(_text(left - 8, sy(t) + 4, _tick_label(t, 0.0, se_max), "end"))
    body.append(_text(left, top - 10, "Standard error", "middle"))
    body.append(_line(sx(pooled), top, sx(pooled), bottom, "gray", "4,3"))
    body.append(_line(sx(pooled), top, sx(pooled - Z95 * se_max), bottom, "gray", "2,2"))
    body.append(_line(sx(pooled), top, sx(pooled + Z95 * se_max), bottom, "gray", "2,2"))
    for e, se in pts:
        body.append(f'<circle cx="{_f(sx(e))}" cy="{_f(sy(se))}" r="4" fill="black"/>\n')
    return _svg(body, title, metadata)


def residual_svg(plot, title="Standardized residuals", metadata=None):
    res = plot.residuals
    labels = [r.study_id for r in plot.forest_rows[: len(res)]]
    lim = max([abs(r) for r in res] + [2.5]) * 1.1
    left, right, top, bottom = 90, WIDTH - 40, 50, HEIGHT - 120
    sy = lambda v: top + (lim - v) / (2 * lim) * (bottom - top)
    step = (right - left) / max(len(res), 1)
    body = [_line(left, top, left, bottom), _line(left, sy(0), right, sy(0))]
    for t in _ticks(-lim, lim):
        body.append(_line(left - 5, sy(t), left, sy(t)))
        body.append(_text(left - 8, sy(t) + 4, _tick_label(t, -lim, lim), "end"))
    for band in (-Z95, Z95):
        body.append(_line(left, sy(band), right, sy(band), "gray", "4,3"))
    for i, (lbl, r) in enumerate(zip(labels, res)):
        x = left + step * (i + 0.5)
        body.append(_line(x, sy(0), x, sy(r), "gray"))
        body.append(f'<circle cx="{_f(x)}" cy="{_f(sy(r))}" r="4" fill="black"/>\n')
        body.append(
            f'<text x="{_f(x)}" y="{_f(bottom + 12)}" text-anchor="end" {FONT} '
            f'transform="rotate(-45 {_f(x)} {_f(bottom + 12)})">{escape(lbl)}</text>\n'
        )
    return _svg(body, title, metadata)
