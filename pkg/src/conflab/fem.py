"""Graded conforming meshes of simple polygons and the P1 Dirichlet energy.

Mesh points are quadtree leaf centres (size driven by a sizing function
that shrinks like a power of the distance to singular corners) plus boundary
points spaced by the same function.  The points are triangulated with the
Delaunay kernel; boundary segments that are not Delaunay edges are
recovered by deleting the interior points that encroach on them (or by
splitting the segment), so the kept triangles conform to the polygon.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import spsolve

from ._backend import kernels


class MeshError(ValueError):
    """The requested mesh cannot resolve the polygon or its marked sides."""


def polygon_area(v):
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def interior_angles(v):
    """Interior angle at each vertex of a counterclockwise polygon."""
    a = np.roll(v, 1, axis=0) - v
    b = np.roll(v, -1, axis=0) - v
    # angle from b to a measured counterclockwise
    ang = np.arctan2(b[:, 0] * a[:, 1] - b[:, 1] * a[:, 0], np.einsum("ij,ij->i", a, b))
    return np.where(ang <= 0, ang + 2 * np.pi, ang)


def point_in_polygon(pts, v):
    x, y = pts[:, 0:1], pts[:, 1:2]
    a, b = v, np.roll(v, -1, axis=0)
    cond = (a[None, :, 1] > y) != (b[None, :, 1] > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = a[None, :, 0] + (y - a[None, :, 1]) * (b[None, :, 0] - a[None, :, 0]) / (
            b[None, :, 1] - a[None, :, 1])
    return (np.sum(cond & (x < xint), axis=1) % 2) == 1


def distance_to_polygon(pts, v):
    a, b = v, np.roll(v, -1, axis=0)
    ab = b - a
    L2 = np.einsum("ij,ij->i", ab, ab)
    out = np.full(len(pts), np.inf)
    for j in range(len(v)):      # loop over edges keeps memory linear
        ap = pts - a[j]
        s = np.clip(ap @ ab[j] / L2[j], 0.0, 1.0)
        d = np.linalg.norm(ap - s[:, None] * ab[j], axis=1)
        np.minimum(out, d, out=out)
    return out


@dataclass
class Mesh:
    """Conforming triangle mesh; ``bnd_edge[i]`` is the polygon edge a
    boundary node lies on (-1 for interior nodes) and ``bnd_param`` its
    position along that edge in [0, 1]."""
    points: np.ndarray
    triangles: np.ndarray
    bnd_edge: np.ndarray
    bnd_param: np.ndarray


def _sizing(pts, h0, sing, gamma, grade_radius, hmin):
    if len(sing) == 0:
        return np.full(len(pts), h0)
    d = np.linalg.norm(pts[:, None, :] - sing[None, :, :], axis=2) / grade_radius
    h = h0 * np.min(np.power(np.maximum(d, 1e-300), gamma[None, :]), axis=1)
    return np.clip(h, hmin, h0)


def grading_exponents(lam):
    """Size exponent for a corner singularity ``r**lam``: elements of size
    ``h0 * r**(1 - 0.8 lam)`` keep the energy error of order ``h0**2``."""
    return np.clip(1.0 - 0.8 * np.asarray(lam, dtype=float), 0.0, 0.95)


def mesh_polygon(v, h0, singular=(), exponents=None, grade_radius=None, hmin=None) -> Mesh:
    """Graded conforming mesh of the counterclockwise simple polygon ``v``.

    Near vertex ``singular[i]`` the element size behaves like
    ``h0 * (r / grade_radius) ** exponents[i]`` (default 1/2).
    """
    v = np.asarray(v, dtype=float)
    k = len(v)
    diam = float(np.max(np.linalg.norm(v[:, None] - v[None], axis=2)))
    sing = v[np.asarray(singular, dtype=np.int64)] if len(singular) else np.empty((0, 2))
    gamma = np.full(len(sing), 0.5) if exponents is None else np.asarray(exponents, dtype=float)
    grade_radius = grade_radius or 0.5 * diam
    hmin = hmin or h0 * 1e-8

    def size(p):
        return _sizing(np.atleast_2d(p), h0, sing, gamma, grade_radius, hmin)

    # boundary points: equal increments of the integral of 1/size
    bpts, bedge, bpar = [], [], []
    for j in range(k):
        p, q = v[j], v[(j + 1) % k]
        L = float(np.linalg.norm(q - p))
        # sizing is sampled densely near both ends, where it can be tiny
        g = np.geomspace(1e-14, 1.0, 600)
        s = np.unique(np.concatenate([np.linspace(0.0, 1.0, 2001), g, 1.0 - g, [0.0]]))
        f = 1.0 / size(p[None] + s[:, None] * (q - p)[None])
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(s) * L)])
        nseg = max(1, int(round(cum[-1])))
        targets = np.linspace(0.0, cum[-1], nseg + 1)[:-1]
        par = np.interp(targets, cum, s)
        bpts.append(p[None] + par[:, None] * (q - p)[None])
        bedge.append(np.full(nseg, j))
        bpar.append(par)
    bpts = np.concatenate(bpts)
    bedge = np.concatenate(bedge)
    bpar = np.concatenate(bpar)

    # quadtree leaf centres
    lo = v.min(axis=0)
    side = float((v.max(axis=0) - lo).max()) * 1.0001
    cells = np.array([[lo[0] + side / 2, lo[1] + side / 2]])
    csize = side
    leaves = []
    while len(cells):
        s = size(cells)
        split = s < csize
        leaves.append(cells[~split])
        c = cells[split]
        if csize < hmin / 2 or len(c) == 0:
            leaves.append(c)
            break
        q = csize / 4
        cells = np.concatenate([c + [-q, -q], c + [q, -q], c + [-q, q], c + [q, q]])
        # prune cells far outside the polygon
        keep = point_in_polygon(cells, v) | (distance_to_polygon(cells, v) < csize)
        cells = cells[keep]
        csize /= 2
    ipts = np.concatenate(leaves) if leaves else np.empty((0, 2))
    if len(ipts):
        inside = point_in_polygon(ipts, v)
        ipts = ipts[inside]
        ipts = ipts[distance_to_polygon(ipts, v) > 0.5 * size(ipts)]
        # leaf centres are cocircular in fours; a fixed small jitter keeps
        # the Delaunay predicates on their fast path
        rng = np.random.default_rng(0)
        ipts = ipts + 0.05 * size(ipts)[:, None] * (rng.random(ipts.shape) - 0.5)

    return _recover(v, bpts, bedge, bpar, ipts)


def _recover(v, bpts, bedge, bpar, ipts):
    k = len(v)
    for _ in range(60):
        nb = len(bpts)
        pts = np.concatenate([bpts, ipts])
        tris, _nbr = kernels.delaunay(pts)
        e = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
        n = len(pts)
        ekeys = set((np.minimum(e[:, 0], e[:, 1]) * n + np.maximum(e[:, 0], e[:, 1])).tolist())
        a = np.arange(nb)
        b = np.roll(a, -1)
        key = np.minimum(a, b) * n + np.maximum(a, b)
        missing = np.array([kk not in ekeys for kk in key.tolist()])
        if not missing.any():
            cen = pts[tris].mean(axis=1)
            keep = point_in_polygon(cen, v)
            # nearly collinear boundary runs leave hull slivers of no area
            d = pts[tris]
            ar = 0.5 * ((d[:, 1, 0] - d[:, 0, 0]) * (d[:, 2, 1] - d[:, 0, 1])
                        - (d[:, 1, 1] - d[:, 0, 1]) * (d[:, 2, 0] - d[:, 0, 0]))
            lmax = np.max(np.linalg.norm(d - np.roll(d, 1, axis=1), axis=2), axis=1)
            keep &= ar > 1e-10 * lmax ** 2
            tris = tris[keep]
            be = np.concatenate([bedge, np.full(len(ipts), -1)])
            bp = np.concatenate([bpar, np.full(len(ipts), np.nan)])
            used = np.zeros(len(pts), dtype=bool)
            used[tris.ravel()] = True
            remap = np.cumsum(used) - 1
            return Mesh(pts[used], remap[tris], be[used], bp[used])
        drop = np.zeros(len(ipts), dtype=bool)
        split = []
        for i in np.nonzero(missing)[0]:
            p, q = bpts[i], bpts[(i + 1) % nb]
            mid, rad = 0.5 * (p + q), 0.5 * np.linalg.norm(q - p)
            if len(ipts):
                hit = np.linalg.norm(ipts - mid, axis=1) < rad * 1.05
                if hit.any():
                    drop |= hit
                    continue
            split.append(i)
        ipts = ipts[~drop]
        if split:
            ins_p, ins_e, ins_t = [], [], []
            for i in split:
                j = (i + 1) % nb
                t1 = bpar[j] if bedge[j] == bedge[i] else 1.0
                ins_p.append(0.5 * (bpts[i] + bpts[j]))
                ins_e.append(bedge[i])
                ins_t.append(0.5 * (bpar[i] + t1))
            order = np.argsort(np.concatenate([np.arange(nb), np.array(split) + 0.5]), kind="stable")
            bpts = np.concatenate([bpts, np.array(ins_p)])[order]
            bedge = np.concatenate([bedge, np.array(ins_e)])[order]
            bpar = np.concatenate([bpar, np.array(ins_t)])[order]
    raise MeshError("boundary recovery did not converge")


def stiffness(points, tris):
    """P1 stiffness matrix (cotangent weights)."""
    p = points
    a, b, c = p[tris[:, 0]], p[tris[:, 1]], p[tris[:, 2]]
    area = 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))
    # gradients of barycentric coordinates times 2*area
    g = np.stack([
        np.column_stack([b[:, 1] - c[:, 1], c[:, 0] - b[:, 0]]),
        np.column_stack([c[:, 1] - a[:, 1], a[:, 0] - c[:, 0]]),
        np.column_stack([a[:, 1] - b[:, 1], b[:, 0] - a[:, 0]]),
    ], axis=1)
    Kl = np.einsum("tik,tjk->tij", g, g) / (4 * area)[:, None, None]
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    n = len(points)
    return coo_matrix((Kl.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def dirichlet_energy(K, zero, one):
    """Energy of the discrete harmonic function equal to 0 on ``zero`` and
    1 on ``one`` (natural boundary conditions elsewhere)."""
    n = K.shape[0]
    u = np.zeros(n)
    u[one] = 1.0
    fixed = np.zeros(n, dtype=bool)
    fixed[zero] = True
    fixed[one] = True
    free = np.nonzero(~fixed)[0]
    if len(free):
        Kff = K[free][:, free]
        rhs = -K[free] @ u
        u[free] = spsolve(Kff.tocsc(), rhs)
    return float(u @ (K @ u)), u


def grid_network_energy(mask, zero, one):
    """Energy of the node-based resistor network on a square grid.

    ``mask[i, j]`` marks grid nodes in the closed domain.  Grid edges with
    both ends in the domain carry conductance 1, halved for edges lying on
    the domain boundary (an edge whose two adjacent cells are not both in
    the domain).  ``zero``/``one`` are boolean node masks.
    """
    ny, nx = mask.shape
    idx = -np.ones(mask.shape, dtype=np.int64)
    idx[mask] = np.arange(mask.sum())
    # cell (i, j) spans nodes i..i+1, j..j+1 and is inside iff all 4 nodes are
    cell = mask[:-1, :-1] & mask[1:, :-1] & mask[:-1, 1:] & mask[1:, 1:]
    cellp = np.zeros((ny + 1, nx + 1), dtype=bool)
    cellp[1:-1, 1:-1] = cell
    rows, cols, vals = [], [], []
    # horizontal edges (i, j)-(i, j+1): adjacent cells (i-1, j) and (i, j)
    he = mask[:, :-1] & mask[:, 1:]
    hc = cellp[:-1, 1:-1].astype(int) + cellp[1:, 1:-1].astype(int)
    he &= hc > 0
    w = np.where(hc == 2, 1.0, 0.5)
    i, j = np.nonzero(he)
    rows.append(idx[i, j]); cols.append(idx[i, j + 1]); vals.append(w[i, j])
    ve = mask[:-1, :] & mask[1:, :]
    vc = cellp[1:-1, :-1].astype(int) + cellp[1:-1, 1:].astype(int)
    ve &= vc > 0
    w = np.where(vc == 2, 1.0, 0.5)
    i, j = np.nonzero(ve)
    rows.append(idx[i, j]); cols.append(idx[i + 1, j]); vals.append(w[i, j])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    val = np.concatenate(vals)
    n = int(mask.sum())
    A = coo_matrix((val, (r, c)), shape=(n, n))
    A = (A + A.T).tocsr()
    L = coo_matrix((np.asarray(A.sum(axis=1)).ravel(), (np.arange(n), np.arange(n))), shape=(n, n)) - A
    e, _ = dirichlet_energy(L.tocsr(), idx[zero & mask], idx[one & mask])
    return e
