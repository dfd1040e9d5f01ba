"""Moduli of quadrilaterals and combinatorial rectangles.

Continuous modulus: Dirichlet energy of the harmonic function that is 0 and
1 on the marked sides and insulated on the others, computed with P1
elements on graded meshes at two resolutions and Richardson-extrapolated.

Discrete modulus: vertex extremal length by constraint generation.  The
quadratic subproblem ``min |rho|^2  s.t.  G rho >= 1`` is a least-distance
program, solved exactly through non-negative least squares.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from . import fem
from .geom import Domain, GeometryError, Rect, _segments_cross
from .packing import CirclePacking, ring_ratio

# --------------------------------------------------------------------------
# quadrilaterals and continuous modulus
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Quadrilateral:
    """Simple polygon with four marked vertices in counterclockwise order.

    Side k runs from ``corners[k]`` to ``corners[k+1]`` along the boundary.
    ``marked = 0`` distinguishes sides 0 and 2, ``marked = 1`` sides 1 and
    3; the modulus is that of the family of curves joining the
    distinguished sides.
    """
    vertices: np.ndarray
    corners: tuple
    marked: int = 0

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        c = tuple(int(i) for i in self.corners)
        if len(c) != 4 or len(set(c)) != 4:
            raise GeometryError("need four distinct marked vertices")
        if fem.polygon_area(v) < 0:
            k = len(v)
            v = v[::-1].copy()
            c = tuple((k - 1 - i) for i in c[::-1])
            c = c[-1:] + c[:-1]
        k = len(v)
        rel = [(i - c[0]) % k for i in c]
        if not (rel[0] < rel[1] < rel[2] < rel[3]):
            raise GeometryError("marked vertices must be in cyclic order")
        if self.marked not in (0, 1):
            raise ValueError("marked must be 0 or 1")
        Domain.polygon(v)          # simplicity check
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "corners", c)

    @classmethod
    def rectangle(cls, width, height, marked=1, center=(0.0, 0.0), angle=0.0):
        """Rectangle; ``marked=1`` joins the two sides of length ``height``
        (left and right when ``angle = 0``)."""
        v = Rect(center, width, height, angle).corners()
        return cls(v, (0, 1, 2, 3), marked)

    def conjugate(self) -> Quadrilateral:
        return Quadrilateral(self.vertices, self.corners, 1 - self.marked)

    def side(self, k) -> np.ndarray:
        """Vertex indices along side k (both ends included)."""
        n = len(self.vertices)
        a, b = self.corners[k % 4], self.corners[(k + 1) % 4]
        return np.array([(a + s) % n for s in range(((b - a) % n) + 1)])

    def side_of_edge(self) -> np.ndarray:
        """Side index of each polygon edge (edge j joins vertex j to j+1)."""
        n = len(self.vertices)
        out = np.empty(n, dtype=np.int64)
        for k in range(4):
            s = self.side(k)
            out[s[:-1]] = k
        return out


@dataclass(frozen=True)
class ModulusEstimate:
    """Richardson-extrapolated modulus with its error estimate."""
    value: float
    error: float
    coarse: float
    fine: float
    nodes: int

    def __float__(self):
        return self.value


def modulus_rectangle(width: float, height: float, marked: str = "vertical") -> float:
    """(length of marked sides) / (length of unmarked sides).

    ``marked="vertical"`` distinguishes the two sides of length ``height``.
    """
    if not (width > 0 and height > 0):
        raise ValueError("rectangle sides must be positive")
    if marked == "vertical":
        return height / width
    if marked == "horizontal":
        return width / height
    raise ValueError("marked must be 'vertical' or 'horizontal'")


def _energy(q: Quadrilateral, h0: float):
    v = q.vertices
    ang = fem.interior_angles(v)
    # leading singular exponent of the potential: pi/(2 angle) where the
    # boundary condition switches, pi/angle elsewhere
    lam = np.pi / ang
    lam[list(q.corners)] /= 2
    sing = np.nonzero(lam < 1 - 1e-9)[0]
    mesh = fem.mesh_polygon(v, h0, singular=sing, exponents=fem.grading_exponents(lam[sing]))
    side_of = q.side_of_edge()
    be = mesh.bnd_edge
    onb = be >= 0
    nside = np.full(len(mesh.points), -1)
    nside[onb] = side_of[be[onb]]
    # a node at parameter 0 of an edge is the polygon vertex: it also
    # belongs to the previous edge's side
    n = len(v)
    at_vertex = onb & (mesh.bnd_param == 0)
    prev_side = np.full(len(mesh.points), -1)
    prev_side[at_vertex] = side_of[(be[at_vertex] - 1) % n]
    s0, s1 = (0, 2) if q.marked == 0 else (1, 3)
    zero = np.nonzero((nside == s0) | (prev_side == s0))[0]
    one = np.nonzero((nside == s1) | (prev_side == s1))[0]
    for s, nodes in ((s0, zero), (s1, one)):
        if len(nodes) < 3:
            raise fem.MeshError(f"mesh too coarse to resolve marked side {s}")
    K = fem.stiffness(mesh.points, mesh.triangles)
    e, _ = fem.dirichlet_energy(K, zero, one)
    return e, len(mesh.points)


def modulus_quadrilateral(q: Quadrilateral, mesh: float = 1 / 24) -> ModulusEstimate:
    """Modulus of the curve family joining the distinguished sides.

    ``mesh`` is the coarse element size relative to the polygon diameter;
    the fine solve halves it and the two energies are extrapolated assuming
    second-order convergence.
    """
    v = q.vertices
    diam = float(np.max(np.linalg.norm(v[:, None] - v[None], axis=2)))
    h0 = mesh * diam
    e1, _ = _energy(q, h0)
    e2, nodes = _energy(q, h0 / 2)
    val = e2 + (e2 - e1) / 3
    return ModulusEstimate(val, abs(e2 - e1) / 3, e1, e2, nodes)


def l_shape_grid_modulus(n: int) -> float:
    """Second discretization for the L-shaped hexagon of :func:`l_shape`:
    node-based resistor network on the grid of spacing 1/n."""
    ii, jj = np.meshgrid(np.arange(2 * n + 1), np.arange(2 * n + 1), indexing="ij")
    x, y = jj / n, ii / n
    mask = (x <= 1 + 1e-12) | (y <= 1 + 1e-12)
    zero = np.isclose(x, 2) & (y <= 1 + 1e-12)
    one = np.isclose(y, 2) & (x <= 1 + 1e-12)
    return fem.grid_network_energy(mask, zero, one)


def l_shape() -> Quadrilateral:
    """[0,2]x[0,1] union [0,1]x[0,2], joining the far end of the horizontal
    arm (x = 2) to the far end of the vertical arm (y = 2)."""
    v = np.array([[0, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2]], dtype=float)
    return Quadrilateral(v, (1, 2, 4, 5), marked=0)


# --------------------------------------------------------------------------
# discrete modulus
# --------------------------------------------------------------------------

@dataclass
class DiscreteMetric:
    """Vertex weights; ``rho[v]`` for v in ``vertices``."""
    vertices: np.ndarray
    rho: np.ndarray

    @property
    def area(self) -> float:
        return float(np.sum(self.rho ** 2))

    def as_dict(self):
        return dict(zip(self.vertices.tolist(), self.rho.tolist()))


@dataclass
class DiscreteModulus:
    value: float
    metric: DiscreteMetric
    paths: list = field(default_factory=list)
    certificate: set | None = None        # vertices reachable from A when disconnected
    shortest: float = math.inf


def _normalize_graph(graph):
    if isinstance(graph, dict):
        verts = sorted(graph)
        adj = {v: list(graph[v]) for v in verts}
    else:
        verts = list(range(len(graph)))
        adj = {v: list(graph[v]) for v in verts}
    for v in list(adj):
        for u in adj[v]:
            if u not in adj:
                raise ValueError(f"neighbor {u} of {v} is not a vertex")
    return verts, adj


def shortest_vertex_path(adj, weight, A, B):
    """Minimum vertex-weight path from A to B (both ends counted)."""
    dist = {}
    prev = {}
    heap = []
    for a in A:
        d = weight[a]
        if d < dist.get(a, math.inf):
            dist[a] = d
            prev[a] = None
            heapq.heappush(heap, (d, a))
    Bs = set(B)
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist[v]:
            continue
        if v in Bs:
            path = [v]
            while prev[path[-1]] is not None:
                path.append(prev[path[-1]])
            return d, path[::-1]
        for u in adj[v]:
            nd = d + weight[u]
            if nd < dist.get(u, math.inf):
                dist[u] = nd
                prev[u] = v
                heapq.heappush(heap, (nd, u))
    return math.inf, None


def least_distance(G, h):
    """min |x| subject to G x >= h, via NNLS (Lawson and Hanson).

    Returns ``None`` when the constraints are infeasible.
    """
    m, n = G.shape
    E = np.vstack([G.T, h[None, :]])
    f = np.zeros(n + 1)
    f[-1] = 1.0
    u, _ = nnls(E, f, maxiter=50 * (m + n + 1))
    r = E @ u - f
    if abs(r[-1]) < 1e-14:
        return None
    return -r[:n] / r[-1]


def discrete_modulus(graph, A, B, tol=1e-9, max_rounds=10000) -> DiscreteModulus:
    """Vertex modulus of the family of paths joining vertex sets A and B.

    ``graph`` is an adjacency dict (vertex -> neighbors) or list of lists.
    """
    verts, adj = _normalize_graph(graph)
    A = sorted(set(A))
    B = sorted(set(B))
    if not A or not B:
        raise ValueError("marked vertex sets must be nonempty")
    if set(A) & set(B):
        raise ValueError("marked vertex sets must be disjoint")
    index = {v: i for i, v in enumerate(verts)}
    n = len(verts)
    rho = np.zeros(n)
    zero = {v: 0.0 for v in verts}
    d, path = shortest_vertex_path(adj, zero, A, B)
    if path is None:
        # reachable set from A separates A from B
        seen = set(A)
        stack = list(A)
        while stack:
            v = stack.pop()
            for u in adj[v]:
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        return DiscreteModulus(0.0, DiscreteMetric(np.array(verts), rho), [], seen, math.inf)
    rows = []
    paths = []
    for _ in range(max_rounds):
        w = {v: rho[index[v]] for v in verts}
        d, path = shortest_vertex_path(adj, w, A, B)
        if d >= 1 - tol:
            break
        g = np.zeros(n)
        g[[index[v] for v in path]] = 1.0
        rows.append(g)
        paths.append(path)
        x = least_distance(np.array(rows), np.ones(len(rows)))
        rho = np.maximum(x, 0.0)
    else:
        raise RuntimeError("constraint generation did not terminate")
    return DiscreteModulus(float(np.sum(rho ** 2)), DiscreteMetric(np.array(verts), rho), paths,
                           None, d)


def rectangle_modulus(cr, marked: int = 1) -> DiscreteModulus:
    """Discrete modulus of a combinatorial rectangle between sides
    ``marked`` and ``marked + 2``."""
    g = cr.graph()
    return discrete_modulus(g, cr.side_paths[marked % 4].tolist(),
                            cr.side_paths[(marked + 2) % 4].tolist())


# --------------------------------------------------------------------------
# metric transfer
# --------------------------------------------------------------------------

def _lens_area(r1, r2, d):
    """Area of the intersection of two disks (vectorized)."""
    r1, r2, d = np.broadcast_arrays(np.asarray(r1, float), np.asarray(r2, float), np.asarray(d, float))
    out = np.zeros(d.shape)
    small = np.minimum(r1, r2)
    inside = d <= np.abs(r1 - r2)
    out[inside] = np.pi * small[inside] ** 2
    part = (~inside) & (d < r1 + r2)
    if part.any():
        a, b, c = r1[part], r2[part], d[part]
        t1 = a * a * np.arccos(np.clip((c * c + a * a - b * b) / (2 * c * a), -1, 1))
        t2 = b * b * np.arccos(np.clip((c * c + b * b - a * a) / (2 * c * b), -1, 1))
        t3 = 0.5 * np.sqrt(np.maximum((-c + a + b) * (c + a - b) * (c - a + b) * (c + a + b), 0))
        out[part] = t1 + t2 - t3
    return out


@dataclass
class ContinuousMetric:
    """Sum of weighted disk indicators."""
    centers: np.ndarray
    radii: np.ndarray
    weights: np.ndarray
    eta: float = math.nan
    constant: float = math.nan           # reported C(N)

    @property
    def area(self) -> float:
        """Integral of the squared pointwise sum (exact lens areas)."""
        c, r, w = self.centers, self.radii, self.weights
        if len(w) == 0:
            return 0.0
        from scipy.spatial import cKDTree
        tree = cKDTree(c)
        pairs = tree.query_pairs(2 * r.max(), output_type="ndarray")
        total = float(np.sum(w ** 2 * np.pi * r ** 2))
        if len(pairs):
            i, j = pairs[:, 0], pairs[:, 1]
            d = np.linalg.norm(c[i] - c[j], axis=1)
            total += 2 * float(np.sum(w[i] * w[j] * _lens_area(r[i], r[j], d)))
        return total

    def length(self, path) -> float:
        """rho-length of a polyline."""
        path = np.asarray(path, dtype=float)
        total = 0.0
        for p, q in zip(path[:-1], path[1:]):
            d = q - p
            L2 = float(d @ d)
            if L2 == 0:
                continue
            f = p[None] - self.centers
            b = f @ d
            cc = np.einsum("ij,ij->i", f, f) - self.radii ** 2
            disc = b * b - L2 * cc
            ok = disc > 0
            sq = np.sqrt(np.where(ok, disc, 0))
            t0 = np.clip((-b - sq) / L2, 0, 1)
            t1 = np.clip((-b + sq) / L2, 0, 1)
            total += float(np.sum(np.where(ok, (t1 - t0), 0) * self.weights)) * math.sqrt(L2)
        return total

    def value_at(self, z) -> np.ndarray:
        z = np.atleast_2d(z)
        d = np.linalg.norm(z[:, None] - self.centers[None], axis=2)
        return (d <= self.radii[None]) @ self.weights


def transfer_metric(p: CirclePacking, rho: DiscreteMetric | dict, max_degree: int,
                    eta: float | None = None, triangulation=None) -> ContinuousMetric:
    """rho_cont = (1/eta) sum rho(v)/r_v * indicator of B(c_v, (1+eta) r_v).

    ``eta`` defaults to half the empirical ring ratio of the packing at
    ``max_degree``.  ``C(N) = (N+1)((1+eta)/eta)^2`` is reported.
    """
    if isinstance(rho, DiscreteMetric):
        rho = rho.as_dict()
    tris = p.triangles
    deg = np.bincount(tris.ravel(), minlength=p.n) if tris is not None else None
    # vertex degree in the 1-skeleton: number of distinct neighbours
    if tris is not None:
        e = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
        e.sort(axis=1)
        e = np.unique(e, axis=0)
        deg = np.bincount(e.ravel(), minlength=p.n)
    support = [v for v, w in rho.items() if w > 0]
    if deg is not None:
        bad = [v for v in support if deg[v] > max_degree]
        if bad:
            raise ValueError(f"metric supported on vertex {bad[0]} of degree {deg[bad[0]]} > {max_degree}")
    if eta is None:
        if triangulation is None:
            raise ValueError("pass eta or the triangulation to estimate it from the ring ratio")
        eta = 0.5 * ring_ratio(triangulation, p, max_degree)
    C = (max_degree + 1) * ((1 + eta) / eta) ** 2
    if not support:
        return ContinuousMetric(np.empty((0, 2)), np.empty(0), np.empty(0), eta, C)
    s = np.array(support)
    r = p.radii[s]
    w = np.array([rho[v] for v in support]) / (eta * r)
    return ContinuousMetric(p.centers[s].copy(), (1 + eta) * r, w, eta, C)


# --------------------------------------------------------------------------
# quasiconformality statistics
# --------------------------------------------------------------------------

def _as_complex_map(f):
    """Wrap a map on (n, 2) arrays or complex arrays as complex -> complex."""
    def g(z):
        z = np.asarray(z, dtype=complex)
        try:
            w = f(z)
            w = np.asarray(w)
            if np.iscomplexobj(w) and w.shape == z.shape:
                return w
        except (TypeError, ValueError, IndexError):
            pass
        pts = np.column_stack([z.ravel().real, z.ravel().imag])
        w = np.asarray(f(pts))
        if w.ndim == 2:
            w = w[:, 0] + 1j * w[:, 1]
        return w.reshape(z.shape)
    return g


def image_quadrilateral(f, rect: Rect, per_side: int = 16, marked: int = 1):
    """Image under ``f`` of the rectangle boundary sampled ``per_side``
    points per side; corners stay marked."""
    c = rect.corners()
    cz = c[:, 0] + 1j * c[:, 1]
    pts = []
    for k in range(4):
        a, b = cz[k], cz[(k + 1) % 4]
        s = np.arange(per_side) / per_side
        pts.append(a + s * (b - a))
    z = np.concatenate(pts)
    w = _as_complex_map(f)(z)
    v = np.column_stack([w.real, w.imag])
    return Quadrilateral(v, (0, per_side, 2 * per_side, 3 * per_side), marked)


@dataclass
class RoughQCReport:
    K: float
    ratios: list
    rectangles: list
    witness: Rect | None = None


def sample_rectangles(domain: Domain, epsilon: float, samples: int, rng, axis_aligned=False,
                      max_side=None, margin=0.0):
    """Rectangles with sides >= epsilon inside the domain (rejection)."""
    x0, y0, x1, y1 = domain.bbox
    L = max_side or max(x1 - x0, y1 - y0)
    out = []
    tries = 0
    while len(out) < samples:
        tries += 1
        if tries > 10000 * samples:
            raise GeometryError("could not fit rectangles of the requested size")
        c = (x0 + (x1 - x0) * rng.random(), y0 + (y1 - y0) * rng.random())
        w = epsilon + (L - epsilon) * rng.random()
        h = epsilon + (L - epsilon) * rng.random()
        ang = 0.0 if axis_aligned else math.pi * rng.random()
        r = Rect(c, w, h, ang)
        cor = r.corners()
        if not domain.contains(cor).all():
            continue
        if margin > 0 and domain.distance_to_boundary(cor).min() < margin:
            continue
        if domain.kind == "polygon":
            # edges must not cross the polygon boundary
            P = domain.vertices
            Q = np.roll(P, -1, axis=0)
            if _segments_cross(cor[:, None], np.roll(cor, -1, axis=0)[:, None], P[None], Q[None]).any():
                continue
        out.append(r)
    return out


def rough_qc_test(f, domain: Domain, epsilon: float, samples: int, seed, axis_aligned=False,
                  max_side=None, margin=0.0, mesh=1 / 16, per_side=16) -> RoughQCReport:
    """max over sampled rectangles of the modulus distortion of ``f``."""
    rng = np.random.default_rng(seed)
    rects = sample_rectangles(domain, epsilon, samples, rng, axis_aligned, max_side, margin)
    ratios = []
    worst = 1.0
    for r in rects:
        mod_r = r.height / r.width              # family joining sides 1 and 3
        try:
            q = image_quadrilateral(f, r, per_side, marked=1)
        except GeometryError:
            return RoughQCReport(math.inf, ratios, rects, r)
        m = modulus_quadrilateral(q, mesh).value
        k = max(m / mod_r, mod_r / m)
        ratios.append(k)
        worst = max(worst, k)
    return RoughQCReport(worst, ratios, rects)


def quasisymmetry_ratio(f, x, r: float, samples: int = 64, seed=None) -> float:
    """sup / inf of |f(z) - f(x)| over sampled points with |z - x| = 2r."""
    g = _as_complex_map(f)
    x = complex(x[0], x[1]) if not np.iscomplexobj(x) and np.ndim(x) == 1 else complex(x)
    phase = 0.0 if seed is None else np.random.default_rng(seed).random() * 2 * np.pi
    th = phase + 2 * np.pi * np.arange(samples) / samples
    z = x + 2 * r * np.exp(1j * th)
    w = g(np.concatenate([[x], z]))
    d = np.abs(w[1:] - w[0])
    return float(d.max() / d.min())


def square_family(domain: Domain, epsilon: float) -> list:
    """Squares of the grids e^{2 pi i k/n} j eps Z^2 (1 <= j, k <= n,
    n = ceil(1/eps)) lying in the closed domain, duplicates removed.

    Each square is a :class:`Rect`; ordering is by (side, angle, center).
    """
    if not 0 < epsilon <= 1:
        raise ValueError("epsilon must lie in (0, 1]")
    n = math.ceil(1 / epsilon - 1e-12)
    bb = domain.bbox
    corners_bb = np.array([[bb[0], bb[1]], [bb[2], bb[1]], [bb[2], bb[3]], [bb[0], bb[3]]])
    seen = {}
    for j in range(1, n + 1):
        s = j * epsilon
        for k in range(1, n + 1):
            ang = 2 * math.pi * k / n
            c, sn = math.cos(ang), math.sin(ang)
            # lattice coordinates of the bbox
            loc = corners_bb @ np.array([[c, -sn], [sn, c]]) / s
            lo = np.floor(loc.min(axis=0)).astype(int) - 1
            hi = np.ceil(loc.max(axis=0)).astype(int) + 1
            a, b = np.meshgrid(np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1), indexing="ij")
            a, b = a.ravel(), b.ravel()
            # lower-left corners in the rotated frame -> world
            cx = (a + 0.5) * s
            cy = (b + 0.5) * s
            wx = c * cx - sn * cy
            wy = sn * cx + c * cy
            for x_, y_ in zip(wx.tolist(), wy.tolist()):
                r = Rect((x_, y_), s, s, ang)
                cor = r.corners()
                tol = 1e-9 * s
                if domain.kind == "disk":
                    ok = np.all(np.linalg.norm(cor - np.asarray(domain.center), axis=1)
                                <= domain.radius + tol)
                elif domain.kind == "rectangle":
                    x0, y0, x1, y1 = domain.bbox
                    ok = np.all((cor[:, 0] >= x0 - tol) & (cor[:, 0] <= x1 + tol)
                                & (cor[:, 1] >= y0 - tol) & (cor[:, 1] <= y1 + tol))
                else:
                    ok = domain.contains(cor).all()
                if not ok:
                    continue
                ang_mod = (ang % (math.pi / 2))
                if math.isclose(ang_mod, math.pi / 2, abs_tol=1e-9):
                    ang_mod = 0.0
                key = (round(s, 9), round(ang_mod, 9), round(x_, 9) + 0.0, round(y_, 9) + 0.0)
                if key not in seen:
                    seen[key] = Rect((x_, y_), s, s, ang_mod)
    return [seen[k] for k in sorted(seen)]
