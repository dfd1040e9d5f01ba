"""Maximal circle packings in the unit disk and the circle-packing map.

Labels are ``x_v = exp(-2 h_v)`` with ``h_v`` the hyperbolic radius, so a
boundary horocycle has ``x = 0``.  In a face ``(v, u, w)`` the angle at
``v`` satisfies

    sin^2(alpha / 2) = x_v (1 - x_u)(1 - x_w) / ((1 - x_v x_u)(1 - x_v x_w)).

The solver alternates Gauss-Seidel sweeps of exact per-vertex solves with
Newton supersteps in ``log x``; a candidate update is accepted only if the
maximum angle-sum residual does not increase.  Layout then walks the
triangles breadth-first using hyperbolic tangency distances.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import spsolve

from ._backend import kernels
from .geom import GeometryError, Triangulation

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


class PackingError(RuntimeError):
    """Structural failure or non-convergence; ``residual`` carries the last
    maximum angle-sum residual when relevant."""

    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


# --------------------------------------------------------------------------
# Moebius helpers (disk automorphisms z -> e^{i theta} (z - a) / (1 - conj(a) z))
# --------------------------------------------------------------------------

def mobius(a: complex, theta: float, z):
    return np.exp(1j * theta) * (z - a) / (1 - np.conj(a) * z)


def mobius_inv(a: complex, theta: float, w):
    u = np.exp(-1j * theta) * w
    return (u + a) / (1 + np.conj(a) * u)


def mobius_circle(a: complex, theta: float, c, r, inverse=False):
    """Image of the circle(s) ``|z - c| = r``, none passing through the pole.

    The image centre is the image of the pole's inverse point.
    """
    f = mobius_inv if inverse else mobius
    c = np.asarray(c, dtype=complex)
    r = np.asarray(r, dtype=float)
    if a == 0:
        return f(a, theta, c), r.copy()
    pole = -np.exp(1j * theta) / np.conj(a) if inverse else 1 / np.conj(a)
    d = pole - c
    cc = f(a, theta, c + r * r / np.conj(d))
    rr = np.abs(f(a, theta, c + r * d / np.abs(d)) - cc)
    return cc, rr


def compose(a1, t1, a2, t2):
    """(a, theta) of M2 o M1."""
    a = mobius_inv(a1, t1, a2)
    theta = t2 + t1 - 2 * np.angle(1 - np.conj(a1) * a)
    return complex(a), float(np.angle(np.exp(1j * theta)))


# --------------------------------------------------------------------------
# data types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AffineMap:
    """z -> a z + b conj(z) + c."""
    a: complex
    b: complex
    c: complex = 0j

    def __post_init__(self):
        if not abs(self.b) < abs(self.a):
            raise ValueError("affine map must be orientation preserving (|b| < |a|)")

    @property
    def mu(self) -> complex:
        return self.b / self.a

    @property
    def K(self) -> float:
        k = abs(self.mu)
        return (1 + k) / (1 - k)

    def __call__(self, z):
        z = np.asarray(z)
        return self.a * z + self.b * np.conj(z) + self.c

    def matrix(self) -> np.ndarray:
        """Real 2x2 linear part."""
        a, b = self.a, self.b
        return np.array([[a.real + b.real, -a.imag + b.imag],
                         [a.imag + b.imag, a.real - b.real]])

    @classmethod
    def from_matrix(cls, m, offset=(0.0, 0.0)):
        m = np.asarray(m, dtype=float)
        a = 0.5 * complex(m[0, 0] + m[1, 1], m[1, 0] - m[0, 1])
        b = 0.5 * complex(m[0, 0] - m[1, 1], m[1, 0] + m[0, 1])
        return cls(a, b, complex(offset[0], offset[1]))


@dataclass(eq=False)
class CirclePacking:
    """Maximal packing: per-vertex label, Euclidean circle and hyperbolic
    data (``hcenters`` holds the hyperbolic centre of interior circles and
    the ideal point of horocycles).  ``normalization`` is ``(a, theta)`` of
    the accumulated disk automorphism."""
    labels: np.ndarray
    boundary: np.ndarray
    centers: np.ndarray
    radii: np.ndarray
    hcenters: np.ndarray
    normalization: tuple = (0j, 0.0)
    tolerance_achieved: float = math.nan
    residual_history: list = field(default_factory=list)
    tangency_residual: float = math.nan
    triangles: np.ndarray | None = None

    @property
    def n(self):
        return len(self.labels)

    def centers_complex(self):
        return self.centers[:, 0] + 1j * self.centers[:, 1]


# --------------------------------------------------------------------------
# angle sums and the radius solver
# --------------------------------------------------------------------------

def _corners(tris):
    """Each triangle corner as (v, u, w) with (v, u, w) counterclockwise."""
    t = tris
    v = np.concatenate([t[:, 0], t[:, 1], t[:, 2]])
    u = np.concatenate([t[:, 1], t[:, 2], t[:, 0]])
    w = np.concatenate([t[:, 2], t[:, 0], t[:, 1]])
    return v, u, w


def corner_angles(x, v, u, w):
    xv, xu, xw = x[v], x[u], x[w]
    q = xv * (1 - xu) * (1 - xw) / ((1 - xv * xu) * (1 - xv * xw))
    return 2 * np.arcsin(np.sqrt(np.clip(q, 0.0, 1.0)))


def angle_sums(x, tris, n):
    v, u, w = _corners(tris)
    return np.bincount(v, weights=corner_angles(x, v, u, w), minlength=n)


def angle_residual(x, tris, interior):
    n = len(x)
    s = angle_sums(x, tris, n)
    return float(np.max(np.abs(s[interior] - TWO_PI))) if len(interior) else 0.0


def _newton_step(x, tris, interior, pos):
    """Newton direction in y = log x for the interior angle sums."""
    n = len(x)
    v, u, w = _corners(tris)
    m = pos[v] >= 0
    v, u, w = v[m], u[m], w[m]
    xv, xu, xw = x[v], x[u], x[w]
    q = xv * (1 - xu) * (1 - xw) / ((1 - xv * xu) * (1 - xv * xw))
    q = np.clip(q, 1e-300, 1 - 1e-16)
    half = np.arcsin(np.sqrt(q))
    tn = np.tan(half)
    F = np.bincount(pos[v], weights=2 * half, minlength=len(interior)) - TWO_PI
    dvv = tn * (1 + xv * xu / (1 - xv * xu) + xv * xw / (1 - xv * xw))
    duu = tn * xu * (xv - 1) / ((1 - xu) * (1 - xv * xu))
    dww = tn * xw * (xv - 1) / ((1 - xw) * (1 - xv * xw))
    rows = [pos[v]]
    cols = [pos[v]]
    vals = [dvv]
    for nb, d in ((u, duu), (w, dww)):
        k = pos[nb] >= 0
        rows.append(pos[v][k])
        cols.append(pos[nb][k])
        vals.append(d[k])
    k = len(interior)
    J = coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                   shape=(k, k)).tocsc()
    return spsolve(J, -F)


def _flower_csr(t: Triangulation):
    ptr, idx = t.flowers
    return ptr, idx


def solve_labels(t: Triangulation, tolerance=1e-10, max_iterations=200, x0=None,
                 sweeps_per_iteration=10):
    """Labels with interior angle sums 2 pi; returns ``(x, history)``.

    ``history`` lists the accepted maximum residual after each iteration and
    is non-increasing by construction.
    """
    n = t.n_vertices
    bd = t.boundary_flags
    interior = np.nonzero(~bd & t.used)[0]
    x = np.zeros(n)
    if x0 is None:
        x[interior] = 0.5
    else:
        x[interior] = np.clip(np.asarray(x0, dtype=float)[interior], 1e-12, 1 - 1e-12)
    history = []
    if len(interior) == 0:
        return x, [0.0]
    tris = t.triangles
    ptr, idx = _flower_csr(t)
    pos = np.full(n, -1, dtype=np.int64)
    pos[interior] = np.arange(len(interior))
    res = angle_residual(x, tris, interior)
    history.append(res)
    it = 0
    while res > tolerance and it < max_iterations:
        it += 1
        accepted = False
        if res < 0.5 or it > 1:
            try:
                dy = _newton_step(x, tris, interior, pos)
            except (RuntimeError, ValueError, FloatingPointError):
                dy = None
            if dy is not None and np.all(np.isfinite(dy)):
                step = 1.0
                y = np.log(x[interior])
                for _ in range(30):
                    yn = np.minimum(y + step * dy, -1e-15)
                    xn = x.copy()
                    xn[interior] = np.exp(yn)
                    rn = angle_residual(xn, tris, interior)
                    if rn <= res:
                        x, res, accepted = xn, rn, True
                        break
                    step *= 0.5
        if not accepted:
            # Gauss-Seidel is globally convergent: sweep until the residual
            # is no worse than the last accepted state.
            xn = x.copy()
            for _ in range(1000):
                kernels.pack_sweep(xn, interior, ptr, idx, sweeps_per_iteration)
                rn = angle_residual(xn, tris, interior)
                if rn <= res:
                    break
            else:
                raise PackingError("radius iteration stalled", residual=res)
            x, res = xn, rn
        history.append(res)
        log.debug("packing iteration %d residual %.3e", it, res)
    if res > tolerance:
        raise PackingError(f"no convergence in {max_iterations} iterations (residual {res:.3e})",
                           residual=res)
    assert all(b <= a for a, b in zip(history, history[1:]))
    return x, history


# --------------------------------------------------------------------------
# layout
# --------------------------------------------------------------------------

def _hop_distance_to_boundary(t: Triangulation):
    ptr, idx = t.flowers
    n = t.n_vertices
    dist = np.full(n, -1, dtype=np.int64)
    q = deque()
    for v in np.nonzero(t.boundary_flags)[0]:
        dist[v] = 0
        q.append(int(v))
    while q:
        v = q.popleft()
        for u in idx[ptr[v]:ptr[v + 1]]:
            if dist[u] < 0:
                dist[u] = dist[v] + 1
                q.append(int(u))
    return dist


def _angle(xv, xu, xw):
    q = xv * (1 - xu) * (1 - xw) / ((1 - xv * xu) * (1 - xv * xw))
    return 2 * math.asin(math.sqrt(min(max(q, 0.0), 1.0)))


def layout(t: Triangulation, x: np.ndarray):
    """Euclidean centres, radii and hyperbolic data from solved labels.

    Returns ``(centers_complex, radii, hcenters)``.
    """
    n = t.n_vertices
    bd = t.boundary_flags
    T = t.triangles.tolist()
    NB = t.neighbors.tolist()
    hc = np.full(n, np.nan + 0j)          # hyperbolic centre / ideal point
    ec = np.full(n, np.nan + 0j)          # Euclidean centre
    er = np.full(n, np.nan)               # Euclidean radius
    h = np.where(bd, np.inf, -0.5 * np.log(np.where(bd, 1.0, x)))
    rho = np.where(bd, 1.0, np.tanh(h / 2))
    placed = np.zeros(n, dtype=bool)

    def set_interior(v, c):
        hc[v] = c
        r = rho[v]
        den = 1 - r * r * abs(c) ** 2
        ec[v] = c * (1 - r * r) / den
        er[v] = r * (1 - abs(c) ** 2) / den
        placed[v] = True

    def set_horo(v, zeta, cen, rad):
        hc[v] = zeta / abs(zeta)
        ec[v] = cen
        er[v] = rad
        placed[v] = True

    interior = np.nonzero(~bd & t.used)[0]
    if len(interior):
        depth = _hop_distance_to_boundary(t)
        dmax = depth[interior].max()
        root_v = int(interior[depth[interior] == dmax].min())
        r0 = next(k for k, tri in enumerate(T) if root_v in tri)
        tri = T[r0]
        i = tri.index(root_v)
        a, b, c = tri[i], tri[(i + 1) % 3], tri[(i + 2) % 3]
        set_interior(a, 0j)
        if bd[b]:
            R = (1 - rho[a]) / 2
            set_horo(b, 1 + 0j, 1 - R, R)
        else:
            set_interior(b, complex(math.tanh((h[a] + h[b]) / 2), 0))
        _place_from(a, b, c, x, h, rho, bd, hc, ec, er, set_interior, set_horo)
    else:
        r0 = 0
        a, b, c = T[0]
        R = 2 * math.sqrt(3) - 3
        for k, v in enumerate((a, b, c)):
            z = complex(math.cos(2 * math.pi * k / 3), math.sin(2 * math.pi * k / 3))
            set_horo(v, z, (1 - R) * z, R)

    done = np.zeros(len(T), dtype=bool)
    done[r0] = True
    q = deque([r0])
    while q:
        t0 = q.popleft()
        for t1 in NB[t0]:
            if t1 < 0 or done[t1]:
                continue
            tri = T[t1]
            miss = [k for k in range(3) if not placed[tri[k]]]
            if len(miss) > 1:
                continue
            if miss:
                k = miss[0]
                _place_from(tri[(k + 1) % 3], tri[(k + 2) % 3], tri[k],
                            x, h, rho, bd, hc, ec, er, set_interior, set_horo)
            done[t1] = True
            q.append(t1)
    if not placed[t.used].all():
        raise PackingError("layout did not reach every vertex")
    return ec, er, hc


def _place_from(u, v, w, x, h, rho, bd, hc, ec, er, set_interior, set_horo):
    """Place w given placed u, v with (u, v, w) counterclockwise."""
    if not bd[u]:
        pivot, other, sign = u, v, 1.0
        alpha = _angle(x[u], x[v], x[w])
    elif not bd[v]:
        pivot, other, sign = v, u, -1.0
        alpha = _angle(x[v], x[w], x[u])
    else:
        _place_two_horocycles(u, v, w, x, h, bd, hc, ec, er, set_interior, set_horo)
        return
    a = hc[pivot]
    phi = np.angle(mobius(a, 0.0, hc[other])) + sign * alpha
    e = complex(math.cos(phi), math.sin(phi))
    if bd[w]:
        R = (1 - rho[pivot]) / 2
        cen, rad = mobius_circle(a, 0.0, (1 - R) * e, R, inverse=True)
        set_horo(w, mobius_inv(a, 0.0, e), complex(cen), float(rad))
    else:
        set_interior(w, complex(mobius_inv(a, 0.0, math.tanh((h[pivot] + h[w]) / 2) * e)))


def _place_two_horocycles(u, v, w, x, h, bd, hc, ec, er, set_interior, set_horo):
    # Upper half-plane picture with u's ideal point at infinity: the
    # horocycle of u becomes the line Im = H, every circle tangent to it
    # has top H and bottom H x.
    zeta = hc[u]

    def to_uhp(z):
        return 1j * (zeta + z) / (zeta - z)

    def from_uhp(s):
        return zeta * (s - 1j) / (s + 1j)

    R_u = er[u]
    H = (1 - R_u) / R_u
    Xv = to_uhp(hc[v]).real
    rv = H / 2
    rw = H * (1 - x[w]) / 2
    Xw = Xv + 2 * math.sqrt(rv * rw)
    if bd[w]:
        zw = from_uhp(complex(Xw, 0.0))
        # circle through three image points
        pts = [from_uhp(complex(Xw, 0.0)), from_uhp(complex(Xw, H)),
               from_uhp(complex(Xw + H / 2, H / 2))]
        cen, rad = _circle_through(*pts)
        set_horo(w, zw, cen, rad)
    else:
        set_interior(w, complex(from_uhp(complex(Xw, H * math.sqrt(x[w])))))


def _circle_through(p, q, r):
    ax, ay, bx, by, cx, cy = p.real, p.imag, q.real, q.imag, r.real, r.imag
    d = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay)
          + (cx * cx + cy * cy) * (ay - by)) / d
    uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx)
          + (cx * cx + cy * cy) * (bx - ax)) / d
    c = complex(ux, uy)
    return c, abs(p - c)


def tangency_residuals(t: Triangulation, centers, radii):
    """Relative tangency error per edge: | |c_i - c_j| - (r_i + r_j) | / (r_i + r_j)."""
    e = t.edges
    c = np.asarray(centers)
    if c.ndim == 2:
        c = c[:, 0] + 1j * c[:, 1]
    s = radii[e[:, 0]] + radii[e[:, 1]]
    return np.abs(np.abs(c[e[:, 0]] - c[e[:, 1]]) - s) / s


def horocycle_residuals(p: CirclePacking):
    c = p.centers_complex()
    b = p.boundary
    return np.abs(np.abs(c[b]) + p.radii[b] - 1)


def max_circle_packing(t: Triangulation, tolerance: float = 1e-10, max_iterations: int = 200,
                       x0=None) -> CirclePacking:
    """Maximal packing of a combinatorial closed disk in the unit disk."""
    if not t.is_disk:
        raise PackingError("triangulation is not a combinatorial closed disk")
    if not t.used.all():
        raise PackingError("triangulation has isolated vertices; re-index first")
    x, hist = solve_labels(t, tolerance, max_iterations, x0)
    ec, er, hc = layout(t, x)
    bd = t.boundary_flags
    tr = tangency_residuals(t, ec, er)
    p = CirclePacking(labels=x, boundary=bd.copy(), centers=np.column_stack([ec.real, ec.imag]),
                      radii=er, hcenters=hc, tolerance_achieved=hist[-1],
                      residual_history=hist, tangency_residual=float(tr.max()),
                      triangles=t.triangles)
    return p


def apply_automorphism(p: CirclePacking, a: complex, theta: float) -> CirclePacking:
    """Image of the packing under z -> e^{i theta}(z - a)/(1 - conj(a) z)."""
    bd = p.boundary
    hc = mobius(a, theta, p.hcenters)
    hc[bd] = hc[bd] / np.abs(hc[bd])
    c, r = mobius_circle(a, theta, p.centers_complex(), p.radii)
    # interior circles: recompute from hyperbolic centres for accuracy
    rho = np.tanh(-0.25 * np.log(np.where(bd, 1.0, p.labels)))
    den = 1 - rho ** 2 * np.abs(hc) ** 2
    ci = hc * (1 - rho ** 2) / den
    ri = rho * (1 - np.abs(hc) ** 2) / den
    c = np.where(bd, c, ci)
    r = np.where(bd, r, ri)
    norm = compose(*p.normalization, a, theta)
    return replace(p, centers=np.column_stack([c.real, c.imag]), radii=np.asarray(r, dtype=float),
                   hcenters=hc, normalization=norm)


def normalize_packing(p: CirclePacking, v1: int, v2: int) -> CirclePacking:
    """Move C_{v1} to the origin and the centre of C_{v2} to the positive
    real axis."""
    if v1 == v2:
        raise PackingError("v1 and v2 must differ")
    if p.boundary[v1]:
        raise PackingError("v1 must be an interior vertex (a horocycle cannot be centred at 0)")
    a = complex(p.hcenters[v1])
    w2 = mobius(a, 0.0, p.hcenters[v2])
    theta = -float(np.angle(w2))
    return apply_automorphism(p, a, theta)


# --------------------------------------------------------------------------
# piecewise-linear circle-packing map
# --------------------------------------------------------------------------

class OutOfCarrier(ValueError):
    """Query point outside the carrier of the source triangulation."""


@dataclass(eq=False)
class PLMap:
    """Piecewise-affine map with ``z -> A[t] z + offset[t]`` on triangle t."""
    source: Triangulation
    targets: np.ndarray
    A: np.ndarray
    offset: np.ndarray
    _hint: int = 0

    def __call__(self, z):
        return eval_plmap(self, z)

    def jacobians(self) -> np.ndarray:
        return np.linalg.det(self.A)


def affine_pieces(src_xy, dst_xy, tris):
    a, b, c = src_xy[tris[:, 0]], src_xy[tris[:, 1]], src_xy[tris[:, 2]]
    S = np.stack([b - a, c - a], axis=2)
    A2, B2, C2 = dst_xy[tris[:, 0]], dst_xy[tris[:, 1]], dst_xy[tris[:, 2]]
    Tm = np.stack([B2 - A2, C2 - A2], axis=2)
    M = Tm @ np.linalg.inv(S)
    off = A2 - np.einsum("tij,tj->ti", M, a)
    return M, off


def packing_map(t: Triangulation, p: CirclePacking) -> PLMap:
    """Vertices to circle centres, affine on each triangle."""
    if p.n != t.n_vertices:
        raise PackingError("packing does not match the triangulation")
    dst = p.centers
    tr = t.triangles
    area = 0.5 * ((dst[tr[:, 1], 0] - dst[tr[:, 0], 0]) * (dst[tr[:, 2], 1] - dst[tr[:, 0], 1])
                  - (dst[tr[:, 1], 1] - dst[tr[:, 0], 1]) * (dst[tr[:, 2], 0] - dst[tr[:, 0], 0]))
    if np.any(area <= 0):
        raise PackingError(f"{int(np.sum(area <= 0))} image triangles are degenerate or reversed")
    M, off = affine_pieces(t.vertices, dst, tr)
    return PLMap(t, dst.copy(), M, off)


def _scan(t: Triangulation, z, tol=1e-12):
    """Linear scan over all triangles (barycentric test with tolerance)."""
    v = t.vertices
    tr = t.triangles
    a, b, c = v[tr[:, 0]], v[tr[:, 1]], v[tr[:, 2]]

    def cross(p, q, r):
        return (q[:, 0] - p[:, 0]) * (r[..., 1] - p[:, 1]) - (q[:, 1] - p[:, 1]) * (r[..., 0] - p[:, 0])
    area2 = cross(a, b, c)
    l0 = cross(b, c, z) / area2
    l1 = cross(c, a, z) / area2
    l2 = cross(a, b, z) / area2
    ok = np.nonzero((l0 >= -tol) & (l1 >= -tol) & (l2 >= -tol))[0]
    return int(ok[0]) if len(ok) else -1


def locate_points(t: Triangulation, z, hint=0):
    """Triangle index per query point, -1 outside the carrier."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    tri = kernels.locate(t.vertices, t.triangles, t.neighbors, z, hint)
    for k in np.nonzero(tri < 0)[0]:
        tri[k] = _scan(t, z[k])
    return tri


def eval_plmap(m: PLMap, z):
    """Evaluate at (2,) / (n, 2) points or complex input (same shape back)."""
    z_in = np.asarray(z)
    is_complex = np.iscomplexobj(z_in)
    if is_complex:
        pts = np.column_stack([z_in.ravel().real, z_in.ravel().imag])
    else:
        pts = np.atleast_2d(z_in.astype(float))
    tri = locate_points(m.source, pts, m._hint)
    if np.any(tri < 0):
        bad = pts[np.nonzero(tri < 0)[0][0]]
        raise OutOfCarrier(f"point {tuple(bad)} lies outside the carrier")
    m._hint = int(tri[-1])
    out = np.einsum("nij,nj->ni", m.A[tri], pts) + m.offset[tri]
    if is_complex:
        return (out[:, 0] + 1j * out[:, 1]).reshape(z_in.shape)
    return out[0] if z_in.ndim == 1 else out


def ring_ratio(t: Triangulation, p: CirclePacking, max_degree: int) -> float:
    """Minimum of r_i / r_v over interior v of degree <= max_degree and
    neighbours i."""
    ptr, idx = t.flowers
    deg = np.diff(ptr)
    vs = np.nonzero(~p.boundary & (deg <= max_degree) & t.used)[0]
    if len(vs) == 0:
        raise PackingError("no interior vertex of the requested degree")
    best = math.inf
    for v in vs:
        nb = idx[ptr[v]:ptr[v + 1]]
        best = min(best, float(p.radii[nb].min() / p.radii[v]))
    return best
