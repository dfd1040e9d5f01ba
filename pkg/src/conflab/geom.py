"""Point sampling, Delaunay/Voronoi construction, clipping and discrete
rectangles.

Triangulations are stored as a vertex array, an array of positively
oriented vertex triples and the triangle adjacency (``neighbors[t, i]`` is
the triangle across the edge opposite local vertex ``i``, -1 on the
boundary).  Per-vertex flowers (neighbors in counterclockwise order) are
derived lazily.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import poisson

from ._backend import DegenerateInput, kernels


class GeometryError(ValueError):
    """Invalid geometric input or a structural failure (non-disk, empty)."""


# --------------------------------------------------------------------------
# domains
# --------------------------------------------------------------------------

def _polygon_area(v):
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _segments_cross(p1, p2, q1, q2):
    """Proper crossing of segments p1p2 and q1q2 (broadcasting, no touching)."""
    def orient(a, b, c):
        return np.sign((b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1])
                       - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0]))
    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    return (d1 * d2 < 0) & (d3 * d4 < 0)


def _point_segment_distance(pts, a, b):
    """Distances from each point to each segment a[j]b[j]; shape (n, m)."""
    ab = b - a
    L2 = np.einsum("ij,ij->i", ab, ab)
    ap = pts[:, None, :] - a[None, :, :]
    s = np.clip(np.einsum("nmj,mj->nm", ap, ab) / np.where(L2 > 0, L2, 1.0), 0.0, 1.0)
    proj = a[None] + s[..., None] * ab[None]
    return np.linalg.norm(pts[:, None, :] - proj, axis=2)


@dataclass(frozen=True)
class Domain:
    """Disk, axis-aligned rectangle or simple polygon (counterclockwise).

    Use the constructors :meth:`disk`, :meth:`rectangle` and :meth:`polygon`.
    """
    kind: str
    center: tuple = (0.0, 0.0)
    radius: float = 1.0
    vertices: np.ndarray | None = field(default=None, compare=False)

    @classmethod
    def disk(cls, center=(0.0, 0.0), radius=1.0):
        if not (radius > 0 and math.isfinite(radius)):
            raise GeometryError("disk radius must be positive and finite")
        return cls("disk", (float(center[0]), float(center[1])), float(radius))

    @classmethod
    def rectangle(cls, corner=(0.0, 0.0), width=1.0, height=1.0):
        if not (width > 0 and height > 0 and math.isfinite(width * height)):
            raise GeometryError("rectangle needs positive finite sides")
        x0, y0 = float(corner[0]), float(corner[1])
        v = np.array([[x0, y0], [x0 + width, y0], [x0 + width, y0 + height],
                      [x0, y0 + height]])
        return cls("rectangle", vertices=v)

    @classmethod
    def polygon(cls, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise GeometryError("polygon needs at least 3 vertices")
        if not np.all(np.isfinite(v)):
            raise GeometryError("polygon vertices must be finite")
        a = _polygon_area(v)
        if a == 0:
            raise GeometryError("polygon has zero area")
        if a < 0:
            v = v[::-1].copy()
        k = len(v)
        p1, p2 = v, np.roll(v, -1, axis=0)
        cross = _segments_cross(p1[:, None], p2[:, None], p1[None], p2[None])
        if cross.any():
            raise GeometryError("polygon is not simple")
        return cls("polygon", vertices=v)

    @property
    def area(self) -> float:
        if self.kind == "disk":
            return math.pi * self.radius ** 2
        return _polygon_area(self.vertices)

    @property
    def bbox(self):
        """(xmin, ymin, xmax, ymax)."""
        if self.kind == "disk":
            cx, cy = self.center
            r = self.radius
            return (cx - r, cy - r, cx + r, cy + r)
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return (lo[0], lo[1], hi[0], hi[1])

    def contains(self, pts) -> np.ndarray:
        """Closed-domain membership for an (n, 2) array."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.kind == "disk":
            d = pts - np.asarray(self.center)
            return np.einsum("ij,ij->i", d, d) <= self.radius ** 2
        if self.kind == "rectangle":
            x0, y0, x1, y1 = self.bbox
            return ((pts[:, 0] >= x0) & (pts[:, 0] <= x1)
                    & (pts[:, 1] >= y0) & (pts[:, 1] <= y1))
        v = self.vertices
        a, b = v, np.roll(v, -1, axis=0)
        x, y = pts[:, 0:1], pts[:, 1:2]
        # even-odd rule, then add boundary points
        cond = (a[None, :, 1] > y) != (b[None, :, 1] > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = a[None, :, 0] + (y - a[None, :, 1]) * (b[None, :, 0] - a[None, :, 0]) / (
                b[None, :, 1] - a[None, :, 1])
        inside = (np.sum(cond & (x < xint), axis=1) % 2) == 1
        on_edge = (_point_segment_distance(pts, a, b) <= 1e-14 * max(1.0, np.abs(v).max())).any(axis=1)
        return inside | on_edge

    def distance_to_boundary(self, pts) -> np.ndarray:
        """Euclidean distance to the boundary curve (sign ignored)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.kind == "disk":
            return np.abs(self.radius - np.linalg.norm(pts - np.asarray(self.center), axis=1))
        v = self.vertices
        return _point_segment_distance(pts, v, np.roll(v, -1, axis=0)).min(axis=1)

    def boundary_polygon(self, n=256) -> np.ndarray:
        if self.kind == "disk":
            th = 2 * np.pi * np.arange(n) / n
            return np.column_stack([self.center[0] + self.radius * np.cos(th),
                                    self.center[1] + self.radius * np.sin(th)])
        return self.vertices.copy()


# --------------------------------------------------------------------------
# point sets and sampling
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PointSet:
    points: np.ndarray
    seed: int | None = None
    intensity: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(p)):
            raise GeometryError("points must be finite")
        object.__setattr__(self, "points", p)

    def __len__(self):
        return len(self.points)


def sample_poisson(domain: Domain, intensity: float, seed: int, fixed_n: bool = False) -> PointSet:
    """Poisson process of the given intensity (points per unit area).

    The count is drawn by inverting the Poisson CDF at one uniform; the
    points are uniform in the domain by rejection from its bounding box.
    With ``fixed_n`` the count is the rounded mean instead (the fixed-N
    model).
    """
    if not (intensity >= 0 and math.isfinite(intensity)):
        raise GeometryError("intensity must be a finite nonnegative number")
    area = domain.area
    if not (area > 0 and math.isfinite(area)):
        raise GeometryError("domain must have positive finite area")
    rng = np.random.default_rng(seed)
    mean = area * intensity
    if fixed_n:
        n = int(round(mean))
    else:
        u = rng.random()
        n = int(poisson.ppf(u, mean)) if mean > 0 else 0
    x0, y0, x1, y1 = domain.bbox
    frac = area / ((x1 - x0) * (y1 - y0))
    chunks = []
    have = 0
    while have < n:
        m = int((n - have) / frac * 1.1) + 16
        cand = np.column_stack([x0 + (x1 - x0) * rng.random(m), y0 + (y1 - y0) * rng.random(m)])
        cand = cand[domain.contains(cand)]
        chunks.append(cand[: n - have])
        have += len(chunks[-1])
    pts = np.concatenate(chunks) if chunks else np.empty((0, 2))
    return PointSet(pts, seed=seed, intensity=float(intensity))


# --------------------------------------------------------------------------
# triangulations
# --------------------------------------------------------------------------

def _triangle_neighbors(tris):
    """Adjacency across edges; raises on non-manifold edges."""
    m = len(tris)
    nb = np.full((m, 3), -1, dtype=np.int64)
    if m == 0:
        return nb
    a = tris[:, [1, 2, 0]].ravel()
    b = tris[:, [2, 0, 1]].ravel()
    owner = np.repeat(np.arange(m), 3)
    local = np.tile(np.arange(3), m)
    n = int(tris.max()) + 1
    key = a * n + b
    rkey = b * n + a
    if len(np.unique(key)) != len(key):
        raise GeometryError("directed edge used twice: inconsistent orientation or non-manifold")
    order = np.argsort(key)
    pos = np.searchsorted(key[order], rkey)
    pos = np.minimum(pos, len(key) - 1)
    hit = key[order][pos] == rkey
    nb[owner[hit], local[hit]] = owner[order[pos[hit]]]
    return nb


@dataclass(eq=False)
class Triangulation:
    """Vertices plus positively oriented triangles.

    ``boundary_flags`` marks vertices on a boundary edge.  The Delaunay
    flag records whether the triangle set came from :func:`delaunay`.
    """
    vertices: np.ndarray
    triangles: np.ndarray
    neighbors: np.ndarray | None = None
    is_delaunay: bool = False

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float).reshape(-1, 2)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if self.neighbors is None:
            self.neighbors = _triangle_neighbors(self.triangles)
        else:
            self.neighbors = np.ascontiguousarray(self.neighbors, dtype=np.int64)

    @classmethod
    def from_triangles(cls, vertices, triangles):
        """Build from explicit triangles, reorienting each counterclockwise."""
        v = np.asarray(vertices, dtype=float)
        t = np.array(triangles, dtype=np.int64).reshape(-1, 3)
        area = _signed_areas(v, t)
        if np.any(area == 0):
            raise GeometryError("degenerate triangle")
        flip = area < 0
        t[flip] = t[flip][:, [0, 2, 1]]
        return cls(v, t)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges (i < j), sorted."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        """Directed boundary edges u->v with the carrier on the left."""
        t, nb = self.triangles, self.neighbors
        ti, li = np.nonzero(nb < 0)
        return np.column_stack([t[ti, (li + 1) % 3], t[ti, (li + 2) % 3]])

    @cached_property
    def boundary_flags(self) -> np.ndarray:
        f = np.zeros(self.n_vertices, dtype=bool)
        f[self.boundary_edges.ravel()] = True
        return f

    @cached_property
    def used(self) -> np.ndarray:
        u = np.zeros(self.n_vertices, dtype=bool)
        u[self.triangles.ravel()] = True
        return u

    @cached_property
    def adjacency(self) -> list:
        """Per-vertex neighbor arrays (counterclockwise for manifold stars)."""
        ptr, idx = self.flowers
        return [idx[ptr[v]:ptr[v + 1]] for v in range(self.n_vertices)]

    @cached_property
    def _vertex_triangle(self):
        vt = np.full(self.n_vertices, -1, dtype=np.int64)
        # prefer, for boundary vertices, the triangle holding the outgoing boundary edge
        m = self.n_triangles
        vt[self.triangles[:, 0]] = np.arange(m)
        vt[self.triangles[:, 1]] = np.arange(m)
        vt[self.triangles[:, 2]] = np.arange(m)
        t, nb = self.triangles, self.neighbors
        ti, li = np.nonzero(nb < 0)
        vt[t[ti, (li + 1) % 3]] = ti
        return vt

    @cached_property
    def flowers(self):
        """CSR ``(ptr, idx)`` of counterclockwise neighbor lists.

        Interior vertices list a closed cycle; boundary vertices list the
        path from the next boundary vertex to the previous one.  Raises
        :class:`GeometryError` if some vertex star is not a disk or half-disk.
        """
        T = self.triangles.tolist()
        NB = self.neighbors.tolist()
        vt = self._vertex_triangle.tolist()
        bflag = self.boundary_flags
        counts = np.bincount(self.triangles.ravel(), minlength=self.n_vertices)
        ptr = [0]
        idx = []
        for v in range(self.n_vertices):
            t0 = vt[v]
            if t0 < 0:
                ptr.append(len(idx))
                continue
            t = t0
            seen = 0
            while True:
                tri = T[t]
                i = tri.index(v)
                idx.append(tri[(i + 1) % 3])
                seen += 1
                nt = NB[t][(i + 1) % 3]
                if nt < 0:
                    idx.append(tri[(i + 2) % 3])
                    break
                if nt == t0:
                    break
                t = nt
            if seen != counts[v]:
                raise GeometryError(f"vertex {v} has a non-manifold star")
            if bflag[v] != (NB[t][(T[t].index(v) + 1) % 3] < 0):
                raise GeometryError(f"vertex {v} star inconsistent with boundary")
            ptr.append(len(idx))
        return np.array(ptr, dtype=np.int64), np.array(idx, dtype=np.int64)

    def degree(self) -> np.ndarray:
        ptr, _ = self.flowers
        return np.diff(ptr)

    @cached_property
    def boundary_cycles(self) -> list:
        """Boundary vertex cycles, each counterclockwise around the carrier."""
        be = self.boundary_edges
        nxt = {}
        for u, v in be.tolist():
            if u in nxt:
                raise GeometryError("boundary is pinched at a vertex")
            nxt[u] = v
        cycles = []
        seen = set()
        for start in sorted(nxt):
            if start in seen:
                continue
            cyc = [start]
            seen.add(start)
            u = nxt[start]
            while u != start:
                cyc.append(u)
                seen.add(u)
                u = nxt[u]
            cycles.append(np.array(cyc, dtype=np.int64))
        return cycles

    @cached_property
    def is_disk(self) -> bool:
        """Combinatorial closed disk: connected, manifold, one boundary
        cycle, Euler characteristic 1."""
        if self.n_triangles == 0:
            return False
        try:
            self.flowers
            cycles = self.boundary_cycles
        except GeometryError:
            return False
        if len(cycles) != 1:
            return False
        used = self.used
        V = int(used.sum())
        E = len(self.edges)
        F = self.n_triangles
        if V - E + F != 1:
            return False
        return _connected_triangles(self.neighbors)

    @property
    def boundary_cycle(self) -> np.ndarray:
        if not self.is_disk:
            raise GeometryError("triangulation is not a combinatorial closed disk")
        return self.boundary_cycles[0]

    def carrier_polygon(self) -> np.ndarray:
        """Boundary cycle coordinates (counterclockwise) of a disk carrier."""
        return self.vertices[self.boundary_cycle]

    @cached_property
    def kdtree(self):
        return cKDTree(self.vertices)

    def signed_areas(self) -> np.ndarray:
        return _signed_areas(self.vertices, self.triangles)

    def subcomplex(self, keep_tri) -> tuple[Triangulation, np.ndarray]:
        """Triangulation on the kept triangles with vertices re-indexed.

        Returns ``(sub, old_index)`` with ``old_index[new] = old``.
        """
        keep_tri = np.asarray(keep_tri)
        if keep_tri.dtype == bool:
            keep_tri = np.nonzero(keep_tri)[0]
        tris = self.triangles[keep_tri]
        old = np.unique(tris.ravel())
        remap = np.full(self.n_vertices, -1, dtype=np.int64)
        remap[old] = np.arange(len(old))
        tmap = np.full(self.n_triangles, -1, dtype=np.int64)
        tmap[keep_tri] = np.arange(len(keep_tri))
        nb = self.neighbors[keep_tri]
        nb = np.where(nb >= 0, tmap[np.maximum(nb, 0)], -1)
        sub = Triangulation(self.vertices[old], remap[tris], nb, is_delaunay=False)
        return sub, old


def _signed_areas(v, t):
    a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                  - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


def _connected_triangles(nb) -> bool:
    m = len(nb)
    if m == 0:
        return False
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components
    r, c = np.nonzero(nb >= 0)
    g = coo_matrix((np.ones(len(r)), (r, nb[r, c])), shape=(m, m))
    return connected_components(g, directed=False)[0] == 1


def delaunay(points) -> Triangulation:
    """Delaunay triangulation of the convex hull of a point set.

    Cocircular ties are broken by a symbolic perturbation of the lifting
    map in vertex-index order, so the output is canonical.
    """
    xy = points.points if isinstance(points, PointSet) else np.asarray(points, dtype=float)
    try:
        tris, nbrs = kernels.delaunay(xy)
    except DegenerateInput as exc:
        raise GeometryError(str(exc)) from exc
    return Triangulation(xy, tris, nbrs, is_delaunay=True)


def circumcircles(v, t):
    """Circumcenters (m, 2) and circumradii (m,) of triangles ``t``."""
    a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    bx, by = b[:, 0] - a[:, 0], b[:, 1] - a[:, 1]
    cx, cy = c[:, 0] - a[:, 0], c[:, 1] - a[:, 1]
    d = 2.0 * (bx * cy - by * cx)
    b2, c2 = bx * bx + by * by, cx * cx + cy * cy
    ux = (cy * b2 - by * c2) / d
    uy = (bx * c2 - cx * b2) / d
    return np.column_stack([a[:, 0] + ux, a[:, 1] + uy]), np.hypot(ux, uy)


# --------------------------------------------------------------------------
# Voronoi cells
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class VoronoiEdge:
    """Boundary piece ``origin + s * direction`` for ``s`` in [s0, s1].

    ``s0 = -inf`` and/or ``s1 = +inf`` mark rays and full lines.
    ``neighbor`` is the site on the other side.
    """
    neighbor: int
    origin: tuple
    direction: tuple
    s0: float
    s1: float

    @property
    def kind(self) -> str:
        inf0, inf1 = math.isinf(self.s0), math.isinf(self.s1)
        return "line" if inf0 and inf1 else "ray" if inf0 or inf1 else "segment"

    @property
    def length(self) -> float:
        return (self.s1 - self.s0) * math.hypot(*self.direction)


@dataclass(frozen=True)
class VoronoiCell:
    """Cell of ``site``: the intersection of the bisector half-planes."""
    site: int
    point: tuple
    edges: tuple

    @property
    def bounded(self) -> bool:
        return all(e.kind == "segment" for e in self.edges)

    def vertices(self) -> np.ndarray:
        """Finite corner points in counterclockwise order."""
        out = []
        for e in self.edges:
            if not math.isinf(e.s0):
                out.append((e.origin[0] + e.s0 * e.direction[0], e.origin[1] + e.s0 * e.direction[1]))
        return np.array(out).reshape(-1, 2)

    def contains(self, z, sites) -> bool:
        z = np.asarray(z, dtype=float)
        d0 = np.sum((z - np.asarray(self.point)) ** 2)
        d = np.sum((sites - z) ** 2, axis=1)
        return bool(np.all(d0 <= d * (1 + 1e-12) + 1e-300))


def _clip_halfplane(poly, tags, p, nrm, c, tag):
    """Clip polygon ``poly`` (list of points, per-edge tags) by nrm.x <= c."""
    out, otags = [], []
    k = len(poly)
    for i in range(k):
        a, b = poly[i], poly[(i + 1) % k]
        fa = nrm[0] * a[0] + nrm[1] * a[1] - c
        fb = nrm[0] * b[0] + nrm[1] * b[1] - c
        if fa <= 0:
            out.append(a)
            otags.append(tags[i])
            if fb > 0:
                s = fa / (fa - fb)
                out.append((a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])))
                otags.append(tag)
        elif fb <= 0:
            s = fa / (fa - fb)
            out.append((a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])))
            otags.append(tags[i])
    return out, otags


def voronoi_cell(points, index: int, tri: Triangulation | None = None) -> VoronoiCell:
    """Voronoi cell of site ``index`` with unbounded edges as rays/lines.

    The bisectors that can bound the cell are those of Delaunay neighbors
    (all other sites when the set is collinear or has fewer than 3 points).
    """
    xy = points.points if isinstance(points, PointSet) else np.asarray(points, dtype=float)
    n = len(xy)
    if not 0 <= index < n:
        raise IndexError("site index out of range")
    x = xy[index]
    cand = None
    extent_pts = [xy]
    if n >= 3:
        try:
            tri = tri or delaunay(xy)
        except GeometryError:
            tri = None
        if tri is not None:
            cand = tri.adjacency[index]
            inc = np.nonzero((tri.triangles == index).any(axis=1))[0]
            cc, _ = circumcircles(tri.vertices, tri.triangles[inc])
            extent_pts.append(cc)
    if cand is None:
        cand = np.array([j for j in range(n) if j != index], dtype=np.int64)
    allp = np.concatenate(extent_pts)
    lo, hi = allp.min(axis=0), allp.max(axis=0)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-300))
    lo, hi = lo - 4 * span - 1, hi + 4 * span + 1
    box = [(lo[0], lo[1]), (hi[0], lo[1]), (hi[0], hi[1]), (lo[0], hi[1])]
    poly, tags = box, [-1, -1, -1, -1]
    for j in cand.tolist():
        y = xy[j]
        nrm = (y[0] - x[0], y[1] - x[1])
        c = 0.5 * ((y[0] ** 2 + y[1] ** 2) - (x[0] ** 2 + x[1] ** 2))
        poly, tags = _clip_halfplane(poly, tags, x, nrm, c, j)
    k = len(poly)
    # rotate so that, for unbounded cells, the edge list starts after a box edge
    start = 0
    if -1 in tags:
        for i in range(k):
            if tags[i] == -1 and tags[(i + 1) % k] != -1:
                start = (i + 1) % k
                break
    edges = []
    for s in range(k):
        i = (start + s) % k
        if tags[i] == -1:
            continue
        j = tags[i]
        a, b = poly[i], poly[(i + 1) % k]
        y = xy[j]
        d = (-(y[1] - x[1]), y[0] - x[0])          # bisector direction, ccw around x
        mid = (0.5 * (x[0] + y[0]), 0.5 * (x[1] + y[1]))
        dd = d[0] ** 2 + d[1] ** 2
        sa = ((a[0] - mid[0]) * d[0] + (a[1] - mid[1]) * d[1]) / dd
        sb = ((b[0] - mid[0]) * d[0] + (b[1] - mid[1]) * d[1]) / dd
        s0 = -math.inf if tags[(i - 1) % k] == -1 else float(sa)
        s1 = math.inf if tags[(i + 1) % k] == -1 else float(sb)
        if s1 <= s0:
            continue    # bisector touches the cell in a single point
        edges.append(VoronoiEdge(int(j), (float(mid[0]), float(mid[1])),
                                 (float(d[0]), float(d[1])), s0, s1))
    return VoronoiCell(int(index), (float(x[0]), float(x[1])), tuple(edges))


# --------------------------------------------------------------------------
# clipping, nearest vertex, star property
# --------------------------------------------------------------------------

def triangles_inside(t: Triangulation, domain: Domain) -> np.ndarray:
    """Boolean mask of triangles whose closed triangle lies in the domain.

    Disk and rectangle are convex, so vertex membership is exact.  For
    polygons the triangle edges must also not cross the polygon boundary and
    no polygon vertex may lie strictly inside the triangle.
    """
    inside_v = domain.contains(t.vertices)
    ok = inside_v[t.triangles].all(axis=1)
    if domain.kind != "polygon" or not ok.any():
        return ok
    idx = np.nonzero(ok)[0]
    v = t.vertices
    tri = t.triangles[idx]
    P = domain.vertices
    Q = np.roll(P, -1, axis=0)
    bad = np.zeros(len(idx), dtype=bool)
    for e in range(3):
        a = v[tri[:, e]][:, None, :]
        b = v[tri[:, (e + 1) % 3]][:, None, :]
        bad |= _segments_cross(a, b, P[None], Q[None]).any(axis=1)
        # polygon vertex strictly left of every edge means strictly inside
    A, B, C = v[tri[:, 0]], v[tri[:, 1]], v[tri[:, 2]]

    def left(a, b, p):
        return ((b[:, None, 0] - a[:, None, 0]) * (p[None, :, 1] - a[:, None, 1])
                - (b[:, None, 1] - a[:, None, 1]) * (p[None, :, 0] - a[:, None, 0])) > 0
    bad |= (left(A, B, P) & left(B, C, P) & left(C, A, P)).any(axis=1)
    ok[idx[bad]] = False
    return ok


def clip_to_domain(t: Triangulation, domain: Domain) -> Triangulation:
    """Keep the triangles contained in the closed domain and re-index.

    The result's :attr:`Triangulation.is_disk` flags whether the carrier is a
    combinatorial closed disk; ``carrier_polygon()`` reports it.
    """
    keep = triangles_inside(t, domain)
    if not keep.any():
        raise GeometryError("no triangle lies inside the domain")
    if keep.all():
        return t
    sub, _ = t.subcomplex(keep)
    sub.is_delaunay = t.is_delaunay
    return sub


def nearest_vertex(t: Triangulation, z) -> int:
    """Closest vertex to ``z``; exact ties go to the lowest index."""
    z = np.asarray(z, dtype=float)
    d, i = t.kdtree.query(z)
    cand = t.kdtree.query_ball_point(z, d * (1 + 1e-9) + 1e-300)
    cand = np.array(sorted(cand), dtype=np.int64)
    dd = np.sum((t.vertices[cand] - z) ** 2, axis=1)
    return int(cand[np.argmin(dd)])


def nearest_vertices(t: Triangulation, zs) -> np.ndarray:
    return np.array([nearest_vertex(t, z) for z in np.atleast_2d(zs)], dtype=np.int64)


def gabriel_mask(t: Triangulation) -> np.ndarray:
    """Per-edge flag (aligned with ``t.edges``): no vertex lies strictly
    inside the disk having the edge as diameter."""
    e = t.edges
    a, b = t.vertices[e[:, 0]], t.vertices[e[:, 1]]
    mid = 0.5 * (a + b)
    rad = 0.5 * np.linalg.norm(b - a, axis=1)
    d, j = t.kdtree.query(mid, k=3)
    ok = np.ones(len(e), dtype=bool)
    for c in range(3):
        other = (j[:, c] != e[:, 0]) & (j[:, c] != e[:, 1])
        ok &= ~(other & (d[:, c] < rad * (1 - 1e-12)))
    return ok


def verify_star_property(t: Triangulation, samples: int, seed, gabriel_only: bool = False) -> int:
    """Count sampled edge points whose nearest site is not an endpoint.

    Points are uniform on uniformly chosen edges.  Taken literally the
    property fails on Delaunay edges that are not Gabriel edges (the
    midpoint of the long side of an obtuse triangle is closer to the
    opposite vertex), so ``gabriel_only`` restricts the sample to edges
    whose diametral disk is empty, where it holds exactly.
    """
    rng = np.random.default_rng(seed)
    e = t.edges
    if gabriel_only:
        e = e[gabriel_mask(t)]
    if len(e) == 0 or samples <= 0:
        return 0
    pick = rng.integers(0, len(e), size=samples)
    s = rng.random(samples)
    a, b = t.vertices[e[pick, 0]], t.vertices[e[pick, 1]]
    x = a + s[:, None] * (b - a)
    dmin, _ = t.kdtree.query(x)
    dend = np.minimum(np.linalg.norm(x - a, axis=1), np.linalg.norm(x - b, axis=1))
    return int(np.sum(dmin < dend * (1 - 1e-12)))


def max_edge_length_away_from_boundary(t: Triangulation, domain: Domain, margin: float) -> float:
    """Longest edge having an endpoint at distance >= margin from the
    domain boundary (inside the domain)."""
    e = t.edges
    dist = domain.distance_to_boundary(t.vertices)
    inside = domain.contains(t.vertices)
    far = inside & (dist >= margin)
    sel = far[e[:, 0]] | far[e[:, 1]]
    if not sel.any():
        return 0.0
    L = np.linalg.norm(t.vertices[e[sel, 0]] - t.vertices[e[sel, 1]], axis=1)
    return float(L.max())


# --------------------------------------------------------------------------
# rectangles and their discrete approximations
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Rect:
    """Rectangle with the given center, side lengths and rotation angle.

    ``width`` runs along the direction ``e^{i angle}``.  Corners are listed
    counterclockwise starting at the lower-left corner of the local frame.
    Side k joins corner k to corner k+1, so sides 0 and 2 have length
    ``width`` and sides 1 and 3 have length ``height``.
    """
    center: tuple
    width: float
    height: float
    angle: float = 0.0

    def corners(self) -> np.ndarray:
        c, s = math.cos(self.angle), math.sin(self.angle)
        hw, hh = self.width / 2, self.height / 2
        loc = np.array([[-hw, -hh], [hw, -hh], [hw, hh], [-hw, hh]])
        rot = np.array([[c, -s], [s, c]])
        return loc @ rot.T + np.asarray(self.center, dtype=float)

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float)) - np.asarray(self.center, dtype=float)
        c, s = math.cos(self.angle), math.sin(self.angle)
        u = pts[:, 0] * c + pts[:, 1] * s
        v = -pts[:, 0] * s + pts[:, 1] * c
        return (np.abs(u) <= self.width / 2) & (np.abs(v) <= self.height / 2)

    def dilate(self, d: float) -> Rect:
        return Rect(self.center, self.width + 2 * d, self.height + 2 * d, self.angle)


@dataclass(eq=False)
class CombinatorialRectangle:
    """Exterior discrete approximation of a rectangle.

    ``vertex_subset`` holds indices into the source triangulation;
    ``sub`` is the induced sub-triangulation and ``sub_index`` maps its
    vertices back.  ``side_paths[k]`` runs along the boundary cycle of
    ``sub`` from corner k to corner k+1 (both included, source indices).

    In the extended form every boundary vertex v of the source in the
    subset gets a tangency node v* (where its circle touches the unit
    circle), numbered ``source.n_vertices + v``, and every boundary edge vw
    of the source in the subset gets the quadrilateral face (v, w, w*, v*).
    """
    source: Triangulation
    vertex_subset: np.ndarray
    marked_corners: np.ndarray
    side_paths: list
    sub: Triangulation
    sub_index: np.ndarray
    tangency_nodes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    quads: np.ndarray = field(default_factory=lambda: np.zeros((0, 4), dtype=np.int64))

    @property
    def extended(self) -> bool:
        return len(self.tangency_nodes) > 0

    def graph(self):
        """Adjacency lists of the induced subgraph, keyed by source index
        (tangency nodes by ``source.n_vertices + v``)."""
        keep = np.zeros(self.source.n_vertices, dtype=bool)
        keep[self.vertex_subset] = True
        e = self.source.edges
        e = e[keep[e[:, 0]] & keep[e[:, 1]]]
        adj = {int(v): [] for v in self.vertex_subset}
        adj.update({int(v): [] for v in self.tangency_nodes})
        for a, b, b2, a2 in self.quads.tolist():
            e = np.vstack([e, [[a, a2], [b, b2], [a2, b2]]])
        for a, b in {(min(a, b), max(a, b)) for a, b in e.tolist()}:
            adj[a].append(b)
            adj[b].append(a)
        return {v: sorted(nb) for v, nb in adj.items()}


def exterior_discrete_approx(t: Triangulation, rect: Rect, extended: bool = False) -> CombinatorialRectangle:
    """Vertices in the rectangle plus their neighbors, with marked corners.

    Corners are the boundary-cycle vertices of the induced sub-triangulation
    closest to the rectangle's corners (lowest index on ties); see the
    decisions ledger for why the nearest vertex overall cannot be used.
    ``extended=True`` adds the tangency nodes and quadrilateral faces along
    the source boundary (see ``CombinatorialRectangle``).
    """
    inside = rect.contains(t.vertices) & t.used
    if not inside.any():
        raise GeometryError("rectangle contains no vertex")
    ptr, idx = t.flowers
    sel = inside.copy()
    for v in np.nonzero(inside)[0]:
        sel[idx[ptr[v]:ptr[v + 1]]] = True
    keep_tri = sel[t.triangles].all(axis=1)
    if not keep_tri.any():
        raise GeometryError("induced sub-triangulation is empty")
    sub, old = t.subcomplex(keep_tri)
    subset = np.nonzero(sel)[0]
    if len(old) != len(subset) or not sub.is_disk:
        raise GeometryError("exterior approximation is not a combinatorial disk")
    cyc = sub.boundary_cycle
    bpts = sub.vertices[cyc]
    pos = []
    for c in rect.corners():
        d = np.sum((bpts - c) ** 2, axis=1)
        best = np.nonzero(d == d.min())[0]
        pos.append(int(best[np.argmin(old[cyc[best]])]))
    if len(set(pos)) < 4:
        raise GeometryError("fewer than 4 distinct corner vertices")
    # corners must appear in the same cyclic order along the boundary
    k = len(cyc)
    rel = [(p - pos[0]) % k for p in pos]
    if not (rel[0] < rel[1] < rel[2] < rel[3]):
        raise GeometryError("marked corners are out of cyclic order")
    paths = []
    for j in range(4):
        a, b = pos[j], pos[(j + 1) % 4]
        seg = [(a + s) % k for s in range(((b - a) % k) + 1)]
        paths.append(old[cyc[seg]])
    rect_ = CombinatorialRectangle(t, subset, old[cyc[pos]], paths, sub, old)
    if extended:
        bcyc = t.boundary_cycle
        on = sel[bcyc]
        rect_.tangency_nodes = t.n_vertices + bcyc[on]
        nxt = np.roll(bcyc, -1)
        both = on & sel[nxt]
        a, b = bcyc[both], nxt[both]
        rect_.quads = np.column_stack([a, b, t.n_vertices + b, t.n_vertices + a])
    return rect_


def grid_triangulation(nx: int, ny: int, x0=0.0, y0=0.0, h=1.0) -> Triangulation:
    """Regular grid with each square split along its main diagonal."""
    xs = x0 + h * np.arange(nx + 1)
    ys = y0 + h * np.arange(ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    v = np.column_stack([X.ravel(), Y.ravel()])
    tris = []
    for j in range(ny):
        for i in range(nx):
            a = j * (nx + 1) + i
            b, c, d = a + 1, a + nx + 2, a + nx + 1
            tris.append((a, b, c))
            tris.append((a, c, d))
    return Triangulation(v, np.array(tris))


def hex_patch(rings: int, spacing: float = 1.0) -> Triangulation:
    """Triangular-lattice hexagon with ``rings`` rings around the origin.

    Built from the lattice combinatorics, not by Delaunay: the rounded
    coordinates of the collinear boundary points are slightly convex and
    would pick up sliver triangles along the hull.
    """
    ij = [(i, j) for i in range(-rings, rings + 1) for j in range(-rings, rings + 1)
          if abs(i + j) <= rings]
    pts = np.array([(spacing * (i + 0.5 * j), spacing * (math.sqrt(3) / 2) * j) for i, j in ij])
    # center first, then by radius
    order = np.lexsort((pts[:, 1], np.hypot(pts[:, 0], pts[:, 1]).round(9)))
    index = {ij[k]: r for r, k in enumerate(order)}
    tris = []
    for (i, j) in product(range(-rings - 1, rings + 1), repeat=2):
        for tri in (((i, j), (i + 1, j), (i, j + 1)), ((i + 1, j), (i + 1, j + 1), (i, j + 1))):
            if all(v in index for v in tri):
                tris.append([index[v] for v in tri])
    return Triangulation.from_triangles(pts[order], np.array(tris))
