"""Deterministic SVG rendering of triangulations, packings, colorings and maps.

Coordinates are written with a fixed number of decimals, so identical
input gives byte-identical files.
"""
from __future__ import annotations

import numpy as np

from .beltrami import DiscreteMap
from .geom import Triangulation
from .packing import CirclePacking
from .percolation import GridColoring

SIZE = 600


def _n(x, digits=4) -> str:
    s = f"{float(x):.{digits}f}"
    return "0.0000" if s == "-0.0000" else s


class _Canvas:
    """Maps the world box (x0, y0, x1, y1) onto a square viewport, y up."""

    def __init__(self, box, pad=0.02):
        x0, y0, x1, y1 = box
        span = max(x1 - x0, y1 - y0) * (1 + 2 * pad) or 1.0
        cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
        self.x0, self.y1 = cx - span / 2, cy + span / 2
        self.s = SIZE / span
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
            f'viewBox="0 0 {SIZE} {SIZE}">',
        ]

    def xy(self, x, y):
        return _n((x - self.x0) * self.s), _n((self.y1 - y) * self.s)

    def add(self, s):
        self.parts.append(s)

    def text(self):
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _write(text, path):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)


def triangulation_svg(t: Triangulation) -> str:
    v = t.vertices
    box = (*v.min(axis=0), *v.max(axis=0)) if len(v) else (0, 0, 1, 1)
    cv = _Canvas(box)
    cv.add(f'<rect width="{SIZE}" height="{SIZE}" fill="white"/>')
    e = t.edges
    d = []
    for a, b in e:
        (xa, ya), (xb, yb) = cv.xy(*v[a]), cv.xy(*v[b])
        d.append(f"M{xa} {ya}L{xb} {yb}")
    cv.add(f'<path d="{"".join(d)}" stroke="black" stroke-width="0.5" fill="none"/>')
    return cv.text()


def packing_svg(p: CirclePacking, carrier: bool = True) -> str:
    """One circle element per packing circle; the unit circle and carrier
    edges are drawn as paths."""
    cv = _Canvas((-1, -1, 1, 1))
    cv.add(f'<rect width="{SIZE}" height="{SIZE}" fill="white"/>')
    ux, uy = cv.xy(0, 0)
    R = _n(cv.s)
    cv.add(f'<path d="M{_n(float(ux) - cv.s)} {uy}a{R} {R} 0 1 0 {_n(2 * cv.s)} 0a{R} {R} 0 1 0 '
           f'{_n(-2 * cv.s)} 0" stroke="gray" fill="none"/>')
    if carrier and p.triangles is not None:
        d = []
        c = p.centers
        for tr in p.triangles:
            pts = [cv.xy(*c[i]) for i in tr]
            d.append(f"M{pts[0][0]} {pts[0][1]}L{pts[1][0]} {pts[1][1]}L{pts[2][0]} {pts[2][1]}Z")
        cv.add(f'<path d="{"".join(d)}" stroke="#c33" stroke-width="0.3" fill="none"/>')
    for i in range(p.n):
        x, y = cv.xy(*p.centers[i])
        col = "#36c" if p.boundary[i] else "black"
        cv.add(f'<circle cx="{x}" cy="{y}" r="{_n(p.radii[i] * cv.s)}" stroke="{col}" '
               f'stroke-width="0.5" fill="none"/>')
    return cv.text()


def coloring_svg(c: GridColoring, deep=None) -> str:
    """Blue background, one rectangle per run of yellow cells, optional
    deep-blue overlay (boolean mask of the same shape)."""
    N, d = c.N, c.delta
    cv = _Canvas((-N * d, -N * d, (N + 1) * d, (N + 1) * d), pad=0.0)
    cv.add(f'<rect width="{SIZE}" height="{SIZE}" fill="#9cf"/>')

    def runs(mask, colour):
        for i in range(mask.shape[0]):
            row = mask[i]
            j = 0
            while j < len(row):
                if not row[j]:
                    j += 1
                    continue
                k = j
                while k < len(row) and row[k]:
                    k += 1
                x, y = cv.xy((i - N) * d, (k - N) * d)
                cv.add(f'<rect x="{x}" y="{y}" width="{_n(d * cv.s)}" height="{_n((k - j) * d * cv.s)}" '
                       f'fill="{colour}"/>')
                j = k
    runs(c.yellow, "#fd3")
    if deep is not None:
        runs(np.asarray(deep, dtype=bool), "#036")
    return cv.text()


def map_svg(m: DiscreteMap, lines: int = 33, box=(-1.0, -1.0, 1.0, 1.0)) -> str:
    """Image of a square grid of ``lines`` horizontal and vertical lines in ``box``."""
    x0, y0, x1, y1 = box
    s = np.linspace(0, 1, 129)
    t = np.linspace(0, 1, lines)
    hor = [m((x0 + s * (x1 - x0)) + 1j * (y0 + tt * (y1 - y0))) for tt in t]
    ver = [m((x0 + tt * (x1 - x0)) + 1j * (y0 + s * (y1 - y0))) for tt in t]
    allw = np.concatenate(hor + ver)
    cv = _Canvas((allw.real.min(), allw.imag.min(), allw.real.max(), allw.imag.max()))
    cv.add(f'<rect width="{SIZE}" height="{SIZE}" fill="white"/>')
    for w in hor + ver:
        pts = " ".join("{},{}".format(*cv.xy(z.real, z.imag)) for z in w)
        cv.add(f'<polyline points="{pts}" stroke="black" stroke-width="0.5" fill="none"/>')
    return cv.text()


def render_svg(obj, path, **kw):
    """Dispatch on the object type and write the SVG to ``path``."""
    if isinstance(obj, CirclePacking):
        text = packing_svg(obj, **kw)
    elif isinstance(obj, Triangulation):
        text = triangulation_svg(obj)
    elif isinstance(obj, GridColoring):
        text = coloring_svg(obj, **kw)
    elif isinstance(obj, DiscreteMap):
        text = map_svg(obj, **kw)
    else:
        raise TypeError(f"cannot render {type(obj).__name__}")
    _write(text, path)
    return path
