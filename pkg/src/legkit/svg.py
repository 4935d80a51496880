"""Minimal SVG plots: line charts, heatmaps, polygons and stick figures.

Output is plain text built by hand so that identical data gives identical
files; the only volatile part is an optional timestamp comment.
"""

import math
from datetime import datetime, timezone
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")

# anchor colours of a perceptually ordered map (dark blue -> yellow)
_CMAP = np.array([[68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37]],
                 dtype=float)


def colormap(t):
    if not math.isfinite(t):
        return "#bbbbbb"
    t = min(max(t, 0.0), 1.0) * (len(_CMAP) - 1)
    i = min(int(t), len(_CMAP) - 2)
    c = _CMAP[i] + (t - i) * (_CMAP[i + 1] - _CMAP[i])
    return "#%02x%02x%02x" % tuple(int(round(v)) for v in c)


def _f(x):
    return f"{x:.2f}"


def nice_ticks(lo, hi, n=5):
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return ticks


def _label(v):
    return f"{v:.4g}"


class Canvas:
    """One or more plot panels sharing an SVG document."""

    def __init__(self, width=640, height=420, title=None):
        self.width = width
        self.height = height
        self.items = []
        if title:
            self.text(width / 2, 20, title, size=15, anchor="middle")

    def text(self, x, y, s, size=11, anchor="start", rotate=None, color="#000"):
        rot = f' transform="rotate({rotate} {_f(x)} {_f(y)})"' if rotate else ""
        self.items.append(f'<text x="{_f(x)}" y="{_f(y)}" font-size="{size}" '
                          f'text-anchor="{anchor}" fill="{color}"{rot}>{escape(str(s))}</text>')

    def line(self, x1, y1, x2, y2, color="#000", width=1.0, dash=None):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.items.append(f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" '
                          f'stroke="{color}" stroke-width="{width}"{d}/>')

    def polyline(self, pts, color="#000", width=1.5, closed=False, fill="none", opacity=1.0,
                 dash=None):
        if not len(pts):
            return
        s = " ".join(f"{_f(x)},{_f(y)}" for x, y in pts)
        tag = "polygon" if closed else "polyline"
        d = f' stroke-dasharray="{dash}"' if dash else ""
        op = f' fill-opacity="{opacity}"' if fill != "none" else ""
        self.items.append(f'<{tag} points="{s}" fill="{fill}"{op} stroke="{color}" '
                          f'stroke-width="{width}"{d}/>')

    def rect(self, x, y, w, h, fill, stroke="none"):
        self.items.append(f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(w)}" height="{_f(h)}" '
                          f'fill="{fill}" stroke="{stroke}"/>')

    def circle(self, x, y, r, fill="#000"):
        self.items.append(f'<circle cx="{_f(x)}" cy="{_f(y)}" r="{_f(r)}" fill="{fill}"/>')

    def render(self, meta=True):
        head = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
                f'height="{self.height}" viewBox="0 0 {self.width} {self.height}" '
                f'font-family="sans-serif">']
        if meta:
            stamp = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
            head.append(f"<!-- generated {stamp} -->")
        head.append(f'<rect width="{self.width}" height="{self.height}" fill="#fff"/>')
        return "\n".join(head + self.items + ["</svg>", ""])

    def save(self, path, meta=True):
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.render(meta))


class Panel:
    """Axes box mapping data coordinates into a rectangle of a canvas."""

    def __init__(self, canvas, x0, y0, w, h, xlim, ylim, xlabel="", ylabel="", title=None,
                 equal=False):
        self.c = canvas
        self.x0, self.y0, self.w, self.h = x0, y0, w, h
        xlim, ylim = _pad(xlim), _pad(ylim)
        if equal:
            sx = (xlim[1] - xlim[0]) / w
            sy = (ylim[1] - ylim[0]) / h
            s = max(sx, sy)
            cx, cy = 0.5 * sum(xlim), 0.5 * sum(ylim)
            xlim = (cx - s * w / 2, cx + s * w / 2)
            ylim = (cy - s * h / 2, cy + s * h / 2)
        self.xlim, self.ylim = xlim, ylim
        self._axes(xlabel, ylabel, title)

    def px(self, x, y):
        u = self.x0 + (x - self.xlim[0]) / (self.xlim[1] - self.xlim[0]) * self.w
        v = self.y0 + self.h - (y - self.ylim[0]) / (self.ylim[1] - self.ylim[0]) * self.h
        return u, v

    def _axes(self, xlabel, ylabel, title):
        c = self.c
        c.rect(self.x0, self.y0, self.w, self.h, "none", stroke="#444")
        for t in nice_ticks(*self.xlim):
            u, _ = self.px(t, self.ylim[0])
            c.line(u, self.y0 + self.h, u, self.y0 + self.h + 4, "#444")
            c.text(u, self.y0 + self.h + 16, _label(t), size=10, anchor="middle")
        for t in nice_ticks(*self.ylim):
            _, v = self.px(self.xlim[0], t)
            c.line(self.x0 - 4, v, self.x0, v, "#444")
            c.text(self.x0 - 6, v + 3, _label(t), size=10, anchor="end")
        if xlabel:
            c.text(self.x0 + self.w / 2, self.y0 + self.h + 32, xlabel, anchor="middle")
        if ylabel:
            c.text(self.x0 - 44, self.y0 + self.h / 2, ylabel, anchor="middle", rotate=-90)
        if title:
            c.text(self.x0 + self.w / 2, self.y0 - 8, title, size=12, anchor="middle")

    def polyline(self, xs, ys, **kw):
        self.c.polyline([self.px(x, y) for x, y in zip(xs, ys)], **kw)

    def polygon(self, verts, **kw):
        self.c.polyline([self.px(x, y) for x, y in verts], closed=True, **kw)

    def hline(self, y, **kw):
        a, b = self.px(self.xlim[0], y), self.px(self.xlim[1], y)
        self.c.line(a[0], a[1], b[0], b[1], **kw)

    def legend(self, entries):
        for k, (label, color) in enumerate(entries):
            y = self.y0 + 14 + 14 * k
            self.c.line(self.x0 + 8, y - 4, self.x0 + 26, y - 4, color, 2)
            self.c.text(self.x0 + 30, y, label, size=10)


def _pad(lim, frac=0.05):
    lo, hi = float(lim[0]), float(lim[1])
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return (-1.0, 1.0)
    if hi - lo < 1e-12:
        d = max(abs(lo), 1.0) * 0.5
        return (lo - d, hi + d)
    d = (hi - lo) * frac
    return (lo - d, hi + d)


def line_plot(series, title="", xlabel="", ylabel="", hlines=()):
    """``series`` is a list of ``(label, xs, ys)``."""
    c = Canvas(title=title)
    xs_all = np.concatenate([np.asarray(s[1], dtype=float) for s in series])
    ys_all = np.concatenate([np.asarray(s[2], dtype=float) for s in series] +
                            [np.asarray(list(hlines), dtype=float)])
    p = Panel(c, 70, 40, 540, 320, (xs_all.min(), xs_all.max()), (ys_all.min(), ys_all.max()),
              xlabel, ylabel)
    for y in hlines:
        p.hline(y, color="#888", dash="4,3")
    for k, (label, xs, ys) in enumerate(series):
        p.polyline(xs, ys, color=PALETTE[k % len(PALETTE)])
    p.legend([(s[0], PALETTE[k % len(PALETTE)]) for k, s in enumerate(series)])
    return c


def heatmap(values, xs, ys, title="", xlabel="", ylabel=""):
    """``values[i, j]`` is drawn at (xs[i], ys[j]); NaN cells are grey."""
    values = np.asarray(values, dtype=float)
    c = Canvas(width=700, title=title)
    p = Panel(c, 70, 40, 500, 320, (min(xs), max(xs)), (min(ys), max(ys)), xlabel, ylabel)
    finite = values[np.isfinite(values)]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 0.0)
    span = hi - lo if hi > lo else 1.0
    dx = (max(xs) - min(xs)) / max(len(xs) - 1, 1)
    dy = (max(ys) - min(ys)) / max(len(ys) - 1, 1)
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            u0, v0 = p.px(x - dx / 2, y + dy / 2)
            u1, v1 = p.px(x + dx / 2, y - dy / 2)
            c.rect(u0, v0, u1 - u0, v1 - v0, colormap((values[i, j] - lo) / span))
    # colour bar
    for k in range(50):
        t = k / 49
        c.rect(600, 360 - 320 * t - 6.4, 18, 6.6, colormap(t))
    c.text(624, 364, _label(lo), size=10)
    c.text(624, 44, _label(hi), size=10)
    return c


def polytope_panels(panels, title=""):
    """Side-by-side polygon panels.

    ``panels`` is a list of dicts with keys ``title``, ``xlabel``, ``ylabel``,
    ``polygons`` (list of ``(label, vertices)``), optional ``cross`` (peaks of
    a requirement cross) and ``path`` (list of ``(label, points)``).
    """
    n = len(panels)
    w = 300
    c = Canvas(width=80 + n * (w + 70), height=420, title=title)
    for k, spec in enumerate(panels):
        pts = [np.asarray(v, dtype=float) for _, v in spec.get("polygons", [])]
        if spec.get("cross") is not None:
            a, b = spec["cross"]
            pts.append(np.array([[a, 0], [-a, 0], [0, b], [0, -b]], dtype=float))
        for _, path in spec.get("path", []):
            pts.append(np.asarray(path, dtype=float))
        allp = np.vstack(pts) if pts else np.zeros((1, 2))
        r = float(np.abs(allp).max()) or 1.0
        p = Panel(c, 70 + k * (w + 70), 50, w, w, (-r, r), (-r, r), spec.get("xlabel", ""),
                  spec.get("ylabel", ""), spec.get("title"), equal=True)
        legend = []
        for m, (label, verts) in enumerate(spec.get("polygons", [])):
            color = PALETTE[m % len(PALETTE)]
            p.polygon(verts, color=color, fill=color, opacity=0.15)
            legend.append((label, color))
        if spec.get("cross") is not None:
            a, b = spec["cross"]
            for seg in (((-a, 0), (a, 0)), ((0, -b), (0, b))):
                p.polyline([seg[0][0], seg[1][0]], [seg[0][1], seg[1][1]], color="#000", width=2.5)
            legend.append(("requirement", "#000"))
        for m, (label, path) in enumerate(spec.get("path", [])):
            path = np.asarray(path, dtype=float)
            color = PALETTE[(m + 3) % len(PALETTE)]
            p.polyline(path[:, 0], path[:, 1], color=color, width=1.0)
            legend.append((label, color))
        p.legend(legend)
    return c


def stick_figure(chains, title=""):
    """Front (y-z) and side (x-z) views of ``chains``: lists of 3-D joint positions."""
    c = Canvas(width=680, height=420, title=title)
    allp = np.vstack([np.asarray(ch, dtype=float) for ch in chains])
    lo, hi = allp.min(axis=0), allp.max(axis=0)
    for k, (ax, name) in enumerate(((1, "y [m]"), (0, "x [m]"))):
        p = Panel(c, 70 + k * 320, 50, 260, 300, (lo[ax], hi[ax]), (lo[2], hi[2]), name,
                  "z [m]" if k == 0 else "", "front" if k == 0 else "side", equal=True)
        for chain in chains:
            chain = np.asarray(chain, dtype=float)
            p.polyline(chain[:, ax], chain[:, 2], color="#333", width=3)
            for pt in chain:
                u, v = p.px(pt[ax], pt[2])
                c.circle(u, v, 3.5, PALETTE[0])
    return c
