"""Dependency-free SVG rendering for heatmaps, curvature plots and rank lines.

All coordinates are printed with fixed precision so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import math

import numpy as np

BLUES = ((247, 251, 255), (198, 219, 239), (107, 174, 214), (33, 113, 181), (8, 48, 107))
SERIES_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def _esc(text):
    return (
        str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")
    )


def _f(v):
    return f"{v:.2f}"


def blue(t):
    """Sequential blue for ``t`` in [0, 1]; darker means larger."""
    t = min(max(float(t), 0.0), 1.0) * (len(BLUES) - 1)
    i = min(int(t), len(BLUES) - 2)
    frac = t - i
    rgb = [round(a + (b - a) * frac) for a, b in zip(BLUES[i], BLUES[i + 1])]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _nice_ticks(lo, hi, n=5):
    if not hi > lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(round(v, 12))
        v += step
    return ticks


def _tick_label(v):
    return f"{v:.4g}"


def _open(width, height, title):
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{_f(width / 2)}" y="22" font-size="15" text-anchor="middle">{_esc(title)}</text>',
    ]


def heatmap_svg(matrix, vmax=None, title=None):
    """Symmetric c-value heatmap with element labels on both axes.

    The colour scale is linear over ``[0, vmax]``; pass a shared `vmax` to
    compare several materials on one scale.
    """
    names = matrix.element_names
    D = len(names)
    C = matrix.C
    vmax = float(C.max()) if vmax is None else float(vmax)
    cell = max(12, min(36, 560 // max(D, 1)))
    left, top = 70, 70
    legend_w = 90
    width = left + D * cell + legend_w + 20
    height = top + D * cell + 40
    out = _open(width, height, title or f"c-values: {matrix.material}")
    for i in range(D):
        y = top + i * cell
        out.append(
            f'<text x="{left - 6}" y="{_f(y + cell * 0.65)}" font-size="11" text-anchor="end">{_esc(names[i])}</text>'
        )
        x = left + i * cell + cell / 2
        out.append(
            f'<text x="{_f(x)}" y="{top - 6}" font-size="11" text-anchor="start" '
            f'transform="rotate(-60 {_f(x)} {top - 6})">{_esc(names[i])}</text>'
        )
        for j in range(D):
            t = C[i, j] / vmax if vmax > 0 else 0.0
            out.append(
                f'<rect x="{left + j * cell}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="{blue(t)}" stroke="#ffffff" stroke-width="0.5">'
                f"<title>{_esc(names[i])}/{_esc(names[j])}: {C[i, j]:.6g}</title></rect>"
            )
    lx = left + D * cell + 30
    steps = 50
    bar_h = D * cell
    for s in range(steps):
        t = 1 - s / steps
        out.append(
            f'<rect x="{lx}" y="{_f(top + s * bar_h / steps)}" width="16" '
            f'height="{_f(bar_h / steps + 0.5)}" fill="{blue(t)}"/>'
        )
    out.append(f'<text x="{lx + 20}" y="{top + 10}" font-size="10">{_tick_label(vmax)}</text>')
    out.append(f'<text x="{lx + 20}" y="{top + bar_h}" font-size="10">0</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


class _Axes:
    def __init__(self, x0, x1, y0, y1, box):
        self.x0, self.x1, self.y0, self.y1 = x0, x1, y0, y1
        self.left, self.top, self.w, self.h = box

    def px(self, x):
        return self.left + (x - self.x0) / (self.x1 - self.x0 or 1.0) * self.w

    def py(self, y):
        return self.top + self.h - (y - self.y0) / (self.y1 - self.y0 or 1.0) * self.h

    def frame(self, xlabel, ylabel):
        out = [
            f'<rect x="{self.left}" y="{self.top}" width="{self.w}" height="{self.h}" '
            'fill="none" stroke="#333333"/>'
        ]
        for t in _nice_ticks(self.x0, self.x1):
            X = self.px(t)
            out.append(f'<line x1="{_f(X)}" y1="{self.top + self.h}" x2="{_f(X)}" y2="{self.top + self.h + 5}" stroke="#333333"/>')
            out.append(f'<text x="{_f(X)}" y="{self.top + self.h + 18}" font-size="11" text-anchor="middle">{_tick_label(t)}</text>')
        for t in _nice_ticks(self.y0, self.y1):
            Y = self.py(t)
            out.append(f'<line x1="{self.left - 5}" y1="{_f(Y)}" x2="{self.left}" y2="{_f(Y)}" stroke="#333333"/>')
            out.append(f'<text x="{self.left - 8}" y="{_f(Y + 4)}" font-size="11" text-anchor="end">{_tick_label(t)}</text>')
        out.append(
            f'<text x="{_f(self.left + self.w / 2)}" y="{self.top + self.h + 38}" font-size="12" '
            f'text-anchor="middle">{_esc(xlabel)}</text>'
        )
        cy = self.top + self.h / 2
        out.append(
            f'<text x="18" y="{_f(cy)}" font-size="12" text-anchor="middle" '
            f'transform="rotate(-90 18 {_f(cy)})">{_esc(ylabel)}</text>'
        )
        return out

    def polyline(self, xs, ys, color, width=1.5, dash=None):
        pts = " ".join(f"{_f(self.px(a))},{_f(self.py(b))}" for a, b in zip(xs, ys))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        return f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}"{extra}/>'


def curvature_svg(profile, positions=None, truth_intervals=None, title=None):
    """Curvature along the transect with the dashed threshold line.

    Samples inside an exceedance interval are drawn as blue points on the
    axis; optional `truth_intervals` (transect coordinates) as red bands.
    """
    x = profile.x
    kappa = profile.kappa
    ymax = max(float(kappa.max()), profile.threshold, 1e-12) * 1.08
    ax = _Axes(float(x[0]), float(x[-1]), 0.0, ymax, (70, 40, 620, 300))
    a, b = profile.pair
    out = _open(720, 400, title or f"curvature of log({a}/{b})   c = {profile.c_value:.4g}")
    for lo, hi in truth_intervals or ():
        out.append(
            f'<rect x="{_f(ax.px(lo))}" y="{ax.top}" width="{_f(ax.px(hi) - ax.px(lo))}" '
            f'height="{ax.h}" fill="#d62728" fill-opacity="0.12"/>'
        )
    for lo, hi in profile.intervals_x:
        out.append(
            f'<rect x="{_f(ax.px(lo))}" y="{ax.top}" width="{_f(max(ax.px(hi) - ax.px(lo), 0.5))}" '
            f'height="{ax.h}" fill="#1f77b4" fill-opacity="0.12"/>'
        )
    out += ax.frame("distance along transect", "curvature")
    out.append(ax.polyline(x, kappa, "#222222"))
    Y = ax.py(profile.threshold)
    out.append(
        f'<line x1="{ax.left}" y1="{_f(Y)}" x2="{ax.left + ax.w}" y2="{_f(Y)}" '
        'stroke="#555555" stroke-dasharray="6,4"/>'
    )
    if positions is not None:
        flagged = set(profile.flagged)
        for i, p in enumerate(np.asarray(positions, dtype=float)):
            color = "#1f77b4" if i in flagged else "#999999"
            r = 3.5 if i in flagged else 2.0
            out.append(f'<circle cx="{_f(ax.px(p))}" cy="{_f(ax.top + ax.h - 4)}" r="{r}" fill="{color}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def comparison_svg(table, title="top-ranked c-values by material"):
    """One line per material: c-value against rank."""
    values = table.values
    finite = values[np.isfinite(values)]
    ymax = float(finite.max()) * 1.05 if finite.size and finite.max() > 0 else 1.0
    k = len(table.ranks)
    ax = _Axes(1.0, float(max(k, 2)), 0.0, ymax, (80, 40, 560, 300))
    out = _open(800, 400, title)
    out += ax.frame("rank", "c-value")
    for col, material in enumerate(table.materials):
        color = SERIES_COLORS[col % len(SERIES_COLORS)]
        ok = np.isfinite(values[:, col])
        out.append(ax.polyline(table.ranks[ok], values[ok, col], color))
        ly = 50 + 18 * col
        out.append(f'<line x1="655" y1="{ly}" x2="675" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="680" y="{ly + 4}" font-size="11">{_esc(material)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
