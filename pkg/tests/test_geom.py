import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conflab import geom
from conflab.experiments import _polygon_distance_to_origin
from conflab.fem import point_in_polygon
from conflab.predicates import incircle_exact, orient2d_exact

from conftest import brute_force_delaunay_violations

UNIT = geom.Domain.rectangle((0, 0), 1, 1)
DISK = geom.Domain.disk()


# ------------------------------------------------------------------ Poisson

def test_poisson_zero_intensity_is_empty():
    assert len(geom.sample_poisson(DISK, 0.0, 1)) == 0


def test_poisson_rejects_bad_input():
    with pytest.raises(geom.GeometryError):
        geom.sample_poisson(UNIT, math.inf, 1)
    with pytest.raises(geom.GeometryError):
        geom.sample_poisson(UNIT, -1.0, 1)


def test_poisson_count_mean_and_variance():
    n = np.array([len(geom.sample_poisson(UNIT, 1000, s)) for s in range(500)])
    assert abs(n.mean() - 1000) < 3 * math.sqrt(1000 / 500)
    assert abs(n.var(ddof=1) - 1000) < 0.2 * 1000


def test_poisson_quadrant_counts_uncorrelated():
    counts = []
    for s in range(1000):
        p = geom.sample_poisson(UNIT, 200, 10_000 + s).points
        q = (p[:, 0] >= 0.5).astype(int) + 2 * (p[:, 1] >= 0.5).astype(int)
        counts.append(np.bincount(q, minlength=4))
    c = np.corrcoef(np.array(counts).T)
    off = c[~np.eye(4, dtype=bool)]
    assert np.all(np.abs(off) < 0.1)
    assert np.abs(off).mean() < 0.05


def test_poisson_reproducible_and_inside():
    a = geom.sample_poisson(DISK, 300, 42)
    b = geom.sample_poisson(DISK, 300, 42)
    assert a.points.tobytes() == b.points.tobytes()
    assert DISK.contains(a.points).all()
    assert a.intensity == 300 and a.seed == 42


def test_fixed_n_mode():
    p = geom.sample_poisson(UNIT, 250, 3, fixed_n=True)
    assert len(p) == 250


# ------------------------------------------------------------------ Delaunay

def test_three_points_single_triangle():
    t = geom.delaunay(np.array([[0, 0], [1, 0], [0, 1.0]]))
    assert t.n_triangles == 1
    assert t.signed_areas()[0] > 0


def test_square_tie_rule_and_both_diagonals_empty():
    v = np.array([[0, 0], [1, 0], [0, 1], [1, 1.0]])
    t = geom.delaunay(v)
    diag = {tuple(sorted(e)) for e in t.edges.tolist()} - {(0, 1), (0, 2), (1, 3), (2, 3)}
    assert diag == {(1, 2)}
    for tris in ([[0, 1, 2], [1, 3, 2]], [[0, 1, 3], [0, 3, 2]]):
        for a, b, c in tris:
            assert orient2d_exact(*v[a], *v[b], *v[c]) > 0
            for d in range(4):
                if d not in (a, b, c):
                    assert incircle_exact(*v[a], *v[b], *v[c], *v[d]) <= 0


def test_degenerate_input_errors():
    with pytest.raises(geom.GeometryError):
        geom.delaunay(np.array([[0, 0], [1, 1.0]]))
    with pytest.raises(geom.GeometryError):
        geom.delaunay(np.array([[0, 0], [1, 1], [2, 2], [3, 3.0]]))


def test_random_100_points_empty_circumcircles():
    p = np.random.default_rng(0).random((100, 2))
    t = geom.delaunay(p)
    assert brute_force_delaunay_violations(t) == 0
    assert np.all(t.signed_areas() > 0)


def test_brute_force_2000_points():
    p = geom.sample_poisson(UNIT, 2000, 7).points
    t = geom.delaunay(p)
    assert brute_force_delaunay_violations(t) == 0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 20), st.integers(0, 20)), min_size=3, max_size=40, unique=True))
def test_delaunay_properties_on_integer_points(pts):
    """Integer grids are full of cocircular quadruples: the exact predicates
    and the perturbation rule must still give a valid triangulation."""
    v = np.array(pts, dtype=float)
    try:
        t = geom.delaunay(v)
    except geom.GeometryError:
        x = v - v[0]
        assert np.all(x[:, 0] * x[1:2, 1] - x[:, 1] * x[1:2, 0] == 0) or len(v) < 3 or \
            np.linalg.matrix_rank(x) < 2
        return
    assert np.all(t.signed_areas() > 0)
    for (a, b, c) in t.triangles:
        for d in range(len(v)):
            if d not in (a, b, c):
                assert incircle_exact(*v[a], *v[b], *v[c], *v[d]) <= 0
    # Euler: a triangulated convex hull with h hull vertices has 2n - h - 2 triangles
    h = len(t.boundary_cycle)
    assert t.n_triangles == 2 * len(v) - h - 2
    adj = t.adjacency
    assert all(u in adj[w] for u in range(len(v)) for w in adj[u])


# ------------------------------------------------------------------ Voronoi

def test_voronoi_two_points_half_planes():
    p = np.array([[0, 0], [2, 0.0]])
    c = geom.voronoi_cell(p, 0)
    assert len(c.edges) == 1 and c.edges[0].kind == "line"
    assert c.edges[0].origin == (1.0, 0.0)
    assert c.contains((0.99, 5), p) and not c.contains((1.01, 5), p)


def test_voronoi_square_corner_is_quadrant():
    p = np.array([[0, 0], [1, 0], [0, 1], [1, 1.0]])
    c = geom.voronoi_cell(p, 0)
    assert not c.bounded
    assert np.allclose(c.vertices(), [[0.5, 0.5]])
    assert c.contains((0.5, -100), p) and c.contains((-100, 0.5), p)
    assert not c.contains((0.6, 0.4), p)


def test_voronoi_delaunay_duality():
    p = np.random.default_rng(5).random((50, 2))
    t = geom.delaunay(p)
    edges = {tuple(e) for e in t.edges.tolist()}
    shared = set()
    for i in range(50):
        for e in geom.voronoi_cell(p, i, t).edges:
            if e.length > 1e-12:
                shared.add(tuple(sorted((i, e.neighbor))))
    assert shared == edges


# ------------------------------------------------------------------ clipping

def test_clip_identity_when_inside():
    t = geom.delaunay(np.random.default_rng(1).random((30, 2)))
    assert geom.clip_to_domain(t, UNIT) is t


def test_clip_removes_straddling_triangle():
    v = np.array([[0.1, 0.1], [0.5, 0.1], [0.3, 0.5], [0.9, 0.5]])
    t = geom.Triangulation.from_triangles(v, np.array([[0, 1, 2], [1, 3, 2]]))
    dom = geom.Domain.rectangle((0, 0), 0.8, 1)
    c = geom.clip_to_domain(t, dom)
    assert c.n_triangles == 1 and c.n_vertices == 3
    with pytest.raises(geom.GeometryError):
        geom.clip_to_domain(t, geom.Domain.rectangle((5, 5), 1, 1))


def test_clip_carrier_covers_inner_disk():
    ok = 0
    for s in range(100):
        t = geom.clip_to_domain(geom.delaunay(geom.sample_poisson(DISK, 2000, s).points), DISK)
        assert np.all(np.linalg.norm(t.vertices, axis=1) <= 1)
        if t.is_disk:
            ok += _polygon_distance_to_origin(t.vertices[t.boundary_cycle]) >= 0.9
    assert ok >= 95


def test_edge_length_away_from_boundary():
    lam = 5000
    ok = 0
    for s in range(20):
        t = geom.delaunay(geom.sample_poisson(DISK, lam, 500 + s).points)
        L = geom.max_edge_length_away_from_boundary(t, DISK, 10 / math.sqrt(lam))
        ok += L <= 9 / math.sqrt(lam)
    assert ok >= 19


# ------------------------------------------------------------------ nearest vertex

def test_nearest_vertex_exact_and_ties():
    v = np.array([[5, 5], [6, 5], [7, 5], [0, 1], [9, 9], [8, 8], [7, 7], [0, -1.0]])
    t = geom.Triangulation.from_triangles(v, np.array([[0, 1, 6]]))
    assert geom.nearest_vertex(t, (7, 7)) == 6
    assert geom.nearest_vertex(t, (0, 0)) == 3            # equidistant from 3 and 7


def test_nearest_vertex_matches_linear_scan():
    rng = np.random.default_rng(2)
    t = geom.delaunay(rng.random((200, 2)))
    for z in rng.random((100, 2)):
        d = np.linalg.norm(t.vertices - z, axis=1)
        assert geom.nearest_vertex(t, z) == int(np.argmin(d))


# ------------------------------------------------------------------ rectangles

def test_exterior_approx_on_grid():
    t = geom.grid_triangulation(10, 10, h=0.1)
    r = geom.Rect((0.5, 0.5), 0.3, 0.3)
    cr = geom.exterior_discrete_approx(t, r)
    inside = np.nonzero(r.contains(t.vertices))[0]
    expect = set(inside.tolist())
    for v in inside:
        expect |= set(t.adjacency[v].tolist())
    assert set(cr.vertex_subset.tolist()) == expect
    cyc = cr.sub_index[cr.sub.boundary_cycle]
    joined = np.concatenate([p[:-1] for p in cr.side_paths])
    assert sorted(joined.tolist()) == sorted(cyc.tolist())
    assert set(cr.marked_corners.tolist()) <= expect


def test_exterior_approx_needs_a_vertex():
    t = geom.delaunay(np.array([[0, 0], [1, 0], [0, 1.0]]))
    with pytest.raises(geom.GeometryError):
        geom.exterior_discrete_approx(t, geom.Rect((0.3, 0.3), 0.01, 0.01))


def _sandwich_counts(erode):
    """(inner, outer) success counts over 100 trials at intensity 5000."""
    lam = 5000
    r = geom.Rect((0.5, 0.5), 0.6, 0.4)
    big = r.dilate(0.05)
    shrunk = r.dilate(-erode / math.sqrt(lam))
    inner = outer = 0
    for s in range(100):
        t = geom.delaunay(geom.sample_poisson(UNIT, lam, 900 + s).points)
        try:
            cr = geom.exterior_discrete_approx(t, r)
        except geom.GeometryError:
            continue        # pinched boundary (about 2% of trials) counts as a miss
        poly = cr.sub.vertices[cr.sub.boundary_cycle]
        inner += bool(point_in_polygon(shrunk.corners(), poly).all())
        outer += bool(big.contains(t.vertices[cr.vertex_subset]).all())
    return inner, outer


def test_exterior_approx_sandwich():
    """R minus a one-spacing margin lies in the carrier and the vertex set
    lies in the 0.05-dilation, in >= 95% of trials."""
    inner, outer = _sandwich_counts(1.0)
    assert inner >= 95 and outer >= 95


@pytest.mark.xfail(strict=True, reason="the corner of R lies outside the approximation in about 70% "
                                       "of trials at every intensity; see the decisions ledger")
def test_exterior_approx_contains_literal_rectangle():
    inner, _ = _sandwich_counts(0.0)
    assert inner >= 95


# ------------------------------------------------------------------ property (*)

def test_star_property_three_points():
    t = geom.delaunay(np.array([[0, 0], [1, 0], [0.4, 0.8]]))
    assert geom.verify_star_property(t, 1000, 0) == 0


def test_star_property_random_gabriel_edges():
    t = geom.delaunay(np.random.default_rng(3).random((100, 2)))
    assert geom.verify_star_property(t, 10_000, 1, gabriel_only=True) == 0


def test_star_property_detects_flipped_edge():
    v = np.array([[0, 0], [2, 0], [1, 0.3], [1, -0.3]])
    bad = geom.Triangulation.from_triangles(v, np.array([[0, 3, 1], [0, 1, 2]]))
    assert geom.verify_star_property(bad, 2000, 0) >= 1


def test_domain_polygon_checks():
    with pytest.raises(geom.GeometryError):
        geom.Domain.polygon([[0, 0], [1, 1], [1, 0], [0, 1]])
    d = geom.Domain.polygon([[0, 0], [0, 1], [1, 1], [1, 0]])        # clockwise input
    assert d.area == pytest.approx(1.0)
    assert orient2d_exact(*d.vertices[0], *d.vertices[1], *d.vertices[2]) > 0


def test_extended_rectangle_adds_tangency_nodes():
    t = geom.hex_patch(4)
    rect = geom.Rect((3.0, 0.0), 2.2, 2.2)
    plain = geom.exterior_discrete_approx(t, rect)
    ext = geom.exterior_discrete_approx(t, rect, extended=True)
    assert not plain.extended and ext.extended
    bd = np.intersect1d(t.boundary_cycle, plain.vertex_subset)
    assert np.array_equal(np.sort(ext.tangency_nodes), np.sort(t.n_vertices + bd))
    g, g0 = ext.graph(), plain.graph()
    for a, b, b2, a2 in ext.quads.tolist():
        assert {a, b} <= set(g0[a] + [a]) | set(g0[b] + [b])
        assert a2 in g[a] and b2 in g[b] and b2 in g[a2]
    # the original adjacency is kept
    assert all(set(g0[v]) <= set(g[v]) for v in g0)
    assert len(ext.quads) == len(bd) - 1
