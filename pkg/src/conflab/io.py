"""Line-oriented text formats.

Each record is a keyword followed by whitespace-separated fields; floats
are written with 17 significant digits so that reading returns the same
binary values.  Writers accept a path or a text stream; readers accept a
path, a stream or a string holding the whole file.

``TRI n m``, ``V x y``, ``T i j k``
    triangulation (0-based, positively oriented triangles)
``PTS n``, ``P x y``
    point set
``PACK n``, ``C i cx cy r b``, ``MOB a_re a_im theta``
    circle packing; ``b`` is 1 for boundary circles
``QUAD n c0 c1 c2 c3 marked``, ``V x y``
    quadrilateral: polygon vertices, corner indices and marked pair
``RHO n``, ``R v w``
    discrete metric
``GRID N r seed``, ``D delta``, one run-length row per x index
    coloring; a row is a list of tokens like ``12b`` / ``3y``
``MU delta nx ny``, ``O x0 y0 mu0_re mu0_im``, per-cell ``re im``
    Beltrami field, cell (i, j) at line i * ny + j
``MAP h nx ny``, ``O x0 y0``, per-node ``wre wim``
    sampled map, node (i, j) at ``(x0 + (i + 1/2) h, y0 + (j + 1/2) h)``
"""
from __future__ import annotations

import io
import os
from contextlib import contextmanager

import numpy as np

from .beltrami import BeltramiField, DiscreteMap
from .geom import PointSet, Triangulation
from .modulus import DiscreteMetric, Quadrilateral
from .packing import CirclePacking
from .percolation import GridColoring


class FormatError(ValueError):
    pass


def _f(x) -> str:
    return format(float(x), ".17g")


@contextmanager
def _out(dest):
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="ascii", newline="\n") as fh:
            yield fh
    else:
        yield dest


def _lines(src):
    if isinstance(src, os.PathLike) or (isinstance(src, str) and "\n" not in src and os.path.exists(src)):
        with open(src, encoding="ascii") as fh:
            text = fh.read()
    elif isinstance(src, str):
        text = src
    else:
        text = src.read()
    return [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]


def _expect(tok, key, n=None):
    if not tok or tok[0] != key:
        raise FormatError(f"expected {key!r} record, got {' '.join(tok) if tok else 'end of file'}")
    if n is not None and len(tok) != n + 1:
        raise FormatError(f"{key} record needs {n} fields, got {len(tok) - 1}")
    return tok[1:]


def dumps(writer, obj) -> str:
    buf = io.StringIO()
    writer(obj, buf)
    return buf.getvalue()


# ---------------------------------------------------------------- geometry

def write_points(ps: PointSet, dest):
    with _out(dest) as fh:
        fh.write(f"PTS {len(ps.points)}\n")
        for x, y in ps.points:
            fh.write(f"P {_f(x)} {_f(y)}\n")


def read_points(src) -> PointSet:
    ln = _lines(src)
    (n,) = _expect(ln[0], "PTS", 1)
    pts = [list(map(float, _expect(t, "P", 2))) for t in ln[1:1 + int(n)]]
    if len(pts) != int(n):
        raise FormatError("truncated point list")
    return PointSet(np.array(pts, dtype=float).reshape(-1, 2))


def write_triangulation(t: Triangulation, dest):
    with _out(dest) as fh:
        fh.write(f"TRI {t.n_vertices} {len(t.triangles)}\n")
        for x, y in t.vertices:
            fh.write(f"V {_f(x)} {_f(y)}\n")
        for i, j, k in t.triangles:
            fh.write(f"T {i} {j} {k}\n")


def read_triangulation(src) -> Triangulation:
    ln = _lines(src)
    n, m = map(int, _expect(ln[0], "TRI", 2))
    if len(ln) != 1 + n + m:
        raise FormatError("record count does not match the TRI header")
    v = np.array([list(map(float, _expect(t, "V", 2))) for t in ln[1:1 + n]], dtype=float).reshape(-1, 2)
    tr = np.array([list(map(int, _expect(t, "T", 3))) for t in ln[1 + n:]], dtype=np.int64).reshape(-1, 3)
    return Triangulation.from_triangles(v, tr)


# ---------------------------------------------------------------- packings

def write_packing(p: CirclePacking, dest):
    with _out(dest) as fh:
        fh.write(f"PACK {p.n}\n")
        for i in range(p.n):
            cx, cy = p.centers[i]
            fh.write(f"C {i} {_f(cx)} {_f(cy)} {_f(p.radii[i])} {int(p.boundary[i])}\n")
        a, th = p.normalization
        fh.write(f"MOB {_f(complex(a).real)} {_f(complex(a).imag)} {_f(th)}\n")


def _hyperbolic_data(c, r, bd):
    """Labels and hyperbolic centres (ideal points for horocycles) of
    Euclidean circles in the unit disk."""
    n = len(r)
    labels = np.zeros(n)
    hc = np.zeros(n, dtype=complex)
    z = c[:, 0] + 1j * c[:, 1]
    for i in range(n):
        d = abs(z[i])
        u = z[i] / d if d > 0 else 1.0
        if bd[i]:
            hc[i] = u
            continue
        a1, a2 = np.arctanh(d - r[i]), np.arctanh(d + r[i])
        labels[i] = np.exp(-2 * (a2 - a1))
        hc[i] = u * np.tanh(0.5 * (a1 + a2))
    return labels, hc


def read_packing(src) -> CirclePacking:
    ln = _lines(src)
    (n,) = map(int, _expect(ln[0], "PACK", 1))
    c = np.zeros((n, 2))
    r = np.zeros(n)
    bd = np.zeros(n, dtype=bool)
    for t in ln[1:1 + n]:
        i, cx, cy, rr, b = _expect(t, "C", 5)
        i = int(i)
        c[i] = float(cx), float(cy)
        r[i] = float(rr)
        bd[i] = b == "1"
    norm = (0j, 0.0)
    if len(ln) > 1 + n:
        are, aim, th = map(float, _expect(ln[1 + n], "MOB", 3))
        norm = (complex(are, aim), th)
    labels, hc = _hyperbolic_data(c, r, bd)
    return CirclePacking(labels, bd, c, r, hc, norm)


# ---------------------------------------------------------------- modulus

def write_quadrilateral(q: Quadrilateral, dest):
    with _out(dest) as fh:
        c = q.corners
        fh.write(f"QUAD {len(q.vertices)} {c[0]} {c[1]} {c[2]} {c[3]} {q.marked}\n")
        for x, y in q.vertices:
            fh.write(f"V {_f(x)} {_f(y)}\n")


def read_quadrilateral(src) -> Quadrilateral:
    ln = _lines(src)
    n, c0, c1, c2, c3, marked = map(int, _expect(ln[0], "QUAD", 6))
    v = np.array([list(map(float, _expect(t, "V", 2))) for t in ln[1:1 + n]], dtype=float)
    return Quadrilateral(v, (c0, c1, c2, c3), marked)


def write_metric(rho: DiscreteMetric, dest):
    with _out(dest) as fh:
        fh.write(f"RHO {len(rho.vertices)}\n")
        for v, w in zip(rho.vertices.tolist(), rho.rho.tolist()):
            fh.write(f"R {v} {_f(w)}\n")


def read_metric(src) -> DiscreteMetric:
    ln = _lines(src)
    (n,) = map(int, _expect(ln[0], "RHO", 1))
    rows = [_expect(t, "R", 2) for t in ln[1:1 + n]]
    return DiscreteMetric(np.array([int(a) for a, _ in rows], dtype=np.int64),
                          np.array([float(b) for _, b in rows]))


# ---------------------------------------------------------------- percolation

def _rle(row):
    out = []
    i = 0
    n = len(row)
    while i < n:
        j = i
        while j < n and row[j] == row[i]:
            j += 1
        out.append(f"{j - i}{'y' if row[i] else 'b'}")
        i = j
    return " ".join(out)


def write_coloring(c: GridColoring, dest):
    with _out(dest) as fh:
        seed = "-" if c.seed is None else str(c.seed)
        fh.write(f"GRID {c.N} {_f(c.r)} {seed}\n")
        fh.write(f"D {_f(c.delta)}\n")
        for row in c.yellow:
            fh.write(_rle(row.tolist()) + "\n")


def read_coloring(src) -> GridColoring:
    ln = _lines(src)
    N, r, seed = _expect(ln[0], "GRID", 3)
    N = int(N)
    (delta,) = map(float, _expect(ln[1], "D", 1))
    rows = []
    for toks in ln[2:]:
        row = []
        for tok in toks:
            k, col = int(tok[:-1]), tok[-1]
            if col not in "by":
                raise FormatError(f"bad run token {tok!r}")
            row.extend([col == "y"] * k)
        if len(row) != 2 * N + 1:
            raise FormatError("row length does not match N")
        rows.append(row)
    if len(rows) != 2 * N + 1:
        raise FormatError("row count does not match N")
    return GridColoring(N, float(r), np.array(rows, dtype=bool).reshape(2 * N + 1, 2 * N + 1),
                        None if seed == "-" else int(seed), delta)


# ---------------------------------------------------------------- beltrami

def write_field(f: BeltramiField, dest):
    nx, ny = f.values.shape
    with _out(dest) as fh:
        fh.write(f"MU {_f(f.delta)} {nx} {ny}\n")
        fh.write(f"O {_f(f.origin[0])} {_f(f.origin[1])} {_f(f.mu0.real)} {_f(f.mu0.imag)}\n")
        for v in f.values.ravel():
            fh.write(f"{_f(v.real)} {_f(v.imag)}\n")


def read_field(src) -> BeltramiField:
    ln = _lines(src)
    d, nx, ny = _expect(ln[0], "MU", 3)
    nx, ny = int(nx), int(ny)
    x0, y0, m_re, m_im = map(float, _expect(ln[1], "O", 4))
    vals = np.array([[float(a), float(b)] for a, b in ln[2:2 + nx * ny]])
    if len(vals) != nx * ny:
        raise FormatError("truncated field")
    z = (vals[:, 0] + 1j * vals[:, 1]).reshape(nx, ny)
    return BeltramiField(float(d), (x0, y0), z, complex(m_re, m_im))


def write_map(m: DiscreteMap, dest):
    w = m.values
    with _out(dest) as fh:
        fh.write(f"MAP {_f(m.h)} {m.n} {m.n}\n")
        fh.write(f"O {_f(m.x0)} {_f(m.x0)}\n")
        for v in w.ravel():
            fh.write(f"{_f(v.real)} {_f(v.imag)}\n")


def read_map(src) -> dict:
    """Returns ``{"h", "origin", "values"}``; values has shape (nx, ny)."""
    ln = _lines(src)
    h, nx, ny = _expect(ln[0], "MAP", 3)
    nx, ny = int(nx), int(ny)
    x0, y0 = map(float, _expect(ln[1], "O", 2))
    vals = np.array([[float(a), float(b)] for a, b in ln[2:2 + nx * ny]])
    if len(vals) != nx * ny:
        raise FormatError("truncated map")
    return {"h": float(h), "origin": (x0, y0), "values": (vals[:, 0] + 1j * vals[:, 1]).reshape(nx, ny)}
