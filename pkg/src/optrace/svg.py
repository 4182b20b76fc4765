"""Minimal static SVG plots: polylines on linear or log axes, and a cell grid."""

import math
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
           "#e377c2", "#17becf")
WIDTH, HEIGHT = 640, 440
MARGIN = {"left": 70, "right": 20, "top": 36, "bottom": 56}


def _nice_ticks(lo, hi, n=6):
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def _fmt(v):
    return "%g" % v


class _Axis:
    def __init__(self, lo, hi, log, a, b):
        if log:
            lo, hi = math.log10(lo), math.log10(hi)
        if hi == lo:
            lo, hi = lo - 0.5, hi + 0.5
        self.lo, self.hi, self.log, self.a, self.b = lo, hi, log, a, b

    def __call__(self, v):
        v = np.asarray(v, float)
        if self.log:
            with np.errstate(divide="ignore", invalid="ignore"):
                v = np.log10(v)
        return self.a + (v - self.lo) / (self.hi - self.lo) * (self.b - self.a)

    def ticks(self):
        if self.log:
            return [(10.0 ** k, "1e%d" % k)
                    for k in range(math.ceil(self.lo - 1e-9), math.floor(self.hi + 1e-9) + 1)]
        return [(t, _fmt(t)) for t in _nice_ticks(self.lo, self.hi)]


def _frame(title, xlabel, ylabel, xa, ya):
    L, R, T, B = MARGIN["left"], WIDTH - MARGIN["right"], MARGIN["top"], HEIGHT - MARGIN["bottom"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<rect x="{L}" y="{T}" width="{R - L}" height="{B - T}" fill="none" stroke="black"/>']
    for v, lab in xa.ticks():
        x = float(xa(v))
        out.append(f'<line x1="{x:.2f}" y1="{B}" x2="{x:.2f}" y2="{B + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{B + 18}" text-anchor="middle">{escape(lab)}</text>')
    for v, lab in ya.ticks():
        y = float(ya(v))
        out.append(f'<line x1="{L - 5}" y1="{y:.2f}" x2="{L}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{L - 8}" y="{y + 4:.2f}" text-anchor="end">{escape(lab)}</text>')
    out.append(f'<text x="{(L + R) / 2}" y="{HEIGHT - 14}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{(T + B) / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {(T + B) / 2})">{escape(ylabel)}</text>')
    if title:
        out.append(f'<text x="{(L + R) / 2}" y="22" text-anchor="middle" font-size="14">'
                   f'{escape(title)}</text>')
    return out


def line_plot(series, xlabel="w", ylabel="density", title="", logx=False, logy=False,
              xlim=None, ylim=None):
    """SVG text for a set of curves.

    ``series`` is a list of ``(label, x, y)`` or ``(label, x, y, style)`` with
    ``style`` in {"line", "dashed", "points"}.  Non-finite points (and
    non-positive ones on log axes) break the polyline.
    """
    xs = []
    ys = []
    for s in series:
        x, y = np.asarray(s[1], float), np.asarray(s[2], float)
        ok = np.isfinite(x) & np.isfinite(y)
        if logx:
            ok &= x > 0
        if logy:
            ok &= y > 0
        xs.append(x[ok])
        ys.append(y[ok])
    allx = np.concatenate(xs) if xs else np.array([0.0, 1.0])
    ally = np.concatenate(ys) if ys else np.array([0.0, 1.0])
    if allx.size == 0:
        allx, ally = np.array([0.0, 1.0]), np.array([0.0, 1.0])
    xlim = xlim or (float(allx.min()), float(allx.max()))
    if ylim is None:
        ylim = (float(ally.min()), float(ally.max()))
        if not logy:
            ylim = (min(0.0, ylim[0]), ylim[1] * 1.05 if ylim[1] > 0 else 1.0)
    L, R, T, B = MARGIN["left"], WIDTH - MARGIN["right"], MARGIN["top"], HEIGHT - MARGIN["bottom"]
    xa = _Axis(xlim[0], xlim[1], logx, L, R)
    ya = _Axis(ylim[0], ylim[1], logy, B, T)
    out = _frame(title, xlabel, ylabel, xa, ya)
    out.append(f'<clipPath id="plot"><rect x="{L}" y="{T}" width="{R - L}" height="{B - T}"/></clipPath>')
    for i, s in enumerate(series):
        label = s[0]
        style = s[3] if len(s) > 3 else "line"
        color = PALETTE[i % len(PALETTE)]
        x, y = np.asarray(s[1], float), np.asarray(s[2], float)
        ok = np.isfinite(x) & np.isfinite(y)
        if logx:
            ok &= x > 0
        if logy:
            ok &= y > 0
        px, py = xa(np.where(ok, x, 1.0)), ya(np.where(ok, y, 1.0))
        if style == "points":
            for a, b in zip(px[ok], py[ok]):
                out.append(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="1.6" fill="{color}" clip-path="url(#plot)"/>')
        else:
            dash = ' stroke-dasharray="6,4"' if style == "dashed" else ""
            seg = []
            for a, b, good in zip(px, py, ok):
                if good:
                    seg.append(f"{a:.2f},{b:.2f}")
                elif seg:
                    out.append(_polyline(seg, color, dash))
                    seg = []
            if seg:
                out.append(_polyline(seg, color, dash))
        ly = T + 16 + 16 * i
        out.append(f'<line x1="{R - 150}" y1="{ly - 4}" x2="{R - 128}" y2="{ly - 4}" stroke="{color}" '
                   f'stroke-width="2"/>')
        out.append(f'<text x="{R - 122}" y="{ly}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _polyline(points, color, dash):
    return (f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} '
            f'clip-path="url(#plot)" points="{" ".join(points)}"/>')


CLASS_COLORS = {"no transition": "#c6dbef", "transition": "#fcbba1", "inconclusive": "#d9d9d9"}


def cell_grid(xs, ys, cells, xlabel="1/chi", ylabel="mu", title=""):
    """SVG for a grid of labelled cells.

    ``cells`` maps ``(x, y)`` to ``(category, text)``; categories are coloured
    by :data:`CLASS_COLORS`.
    """
    xs, ys = list(xs), list(ys)
    L, R, T, B = MARGIN["left"], WIDTH - MARGIN["right"], MARGIN["top"], HEIGHT - MARGIN["bottom"]
    cw = (R - L) / max(len(xs), 1)
    ch = (B - T) / max(len(ys), 1)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>']
    for i, x in enumerate(xs):
        for j, y in enumerate(sorted(ys, reverse=True)):
            cat, text = cells[(x, y)]
            cx, cy = L + i * cw, T + j * ch
            out.append(f'<rect x="{cx:.2f}" y="{cy:.2f}" width="{cw:.2f}" height="{ch:.2f}" '
                       f'fill="{CLASS_COLORS.get(cat, "white")}" stroke="black"/>')
            out.append(f'<text x="{cx + cw / 2:.2f}" y="{cy + ch / 2 + 4:.2f}" '
                       f'text-anchor="middle">{escape(text)}</text>')
    for i, x in enumerate(xs):
        out.append(f'<text x="{L + (i + 0.5) * cw:.2f}" y="{B + 18}" text-anchor="middle">{_fmt(x)}</text>')
    for j, y in enumerate(sorted(ys, reverse=True)):
        out.append(f'<text x="{L - 8}" y="{T + (j + 0.5) * ch + 4:.2f}" text-anchor="end">{_fmt(y)}</text>')
    out.append(f'<text x="{(L + R) / 2}" y="{HEIGHT - 14}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{(T + B) / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {(T + B) / 2})">{escape(ylabel)}</text>')
    if title:
        out.append(f'<text x="{(L + R) / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
