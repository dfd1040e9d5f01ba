import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conflab import geom, modulus as md, packing as pk
from conflab.geom import Domain, Rect
from conftest import exhaustive_modulus, grid_graph, random_graph, random_quadrilateral


# ------------------------------------------------------------------ rectangles

def test_modulus_rectangle_closed_form():
    assert md.modulus_rectangle(1, 1) == 1
    assert md.modulus_rectangle(2, 1) == 0.5
    assert md.modulus_rectangle(2, 1, "horizontal") == 2
    assert md.modulus_rectangle(2, 1) * md.modulus_rectangle(2, 1, "horizontal") == 1
    with pytest.raises(ValueError):
        md.modulus_rectangle(0, 1)


@pytest.mark.parametrize("w,h", [(1, 1), (2, 1), (0.7, 1.9)])
def test_fem_rectangle_exact(w, h):
    q = md.Quadrilateral.rectangle(w, h, marked=1, angle=0.3)
    assert md.modulus_quadrilateral(q).value == pytest.approx(h / w, abs=1e-4)


@pytest.mark.parametrize("seed", range(5))
def test_reciprocity(seed):
    q = random_quadrilateral(np.random.default_rng(seed))
    a = md.modulus_quadrilateral(q).value
    b = md.modulus_quadrilateral(q.conjugate()).value
    assert a * b == pytest.approx(1, abs=1e-3)


def test_l_shape_cross_method():
    fem_val = md.modulus_quadrilateral(md.l_shape()).value
    # grid network error decays like h^(4/3) at the re-entrant corner
    g1, g2 = md.l_shape_grid_modulus(64), md.l_shape_grid_modulus(128)
    r = 2 ** (4 / 3)
    grid_val = g2 + (g2 - g1) / (r - 1)
    assert fem_val == pytest.approx(grid_val, abs=1e-3)


def test_quadrilateral_validation():
    v = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    with pytest.raises(geom.GeometryError):
        md.Quadrilateral(v, (0, 2, 1, 3))
    # clockwise input is reoriented
    q = md.Quadrilateral(v[::-1], (0, 1, 2, 3))
    assert md.modulus_quadrilateral(q).value == pytest.approx(1, abs=1e-4)


# ------------------------------------------------------------------ discrete modulus

@pytest.mark.parametrize("m", [2, 3, 7, 20])
def test_path_graph(m):
    g = {i: [j for j in (i - 1, i + 1) if 0 <= j < m] for i in range(m)}
    r = md.discrete_modulus(g, [0], [m - 1])
    assert r.value == pytest.approx(1 / m, abs=1e-9)
    assert np.allclose(r.metric.rho, 1 / m, atol=1e-9)


def test_two_vertices():
    assert md.discrete_modulus({0: [1], 1: [0]}, [0], [1]).value == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("n", [3, 4])
def test_grid_matches_exhaustive(n):
    g, A, B = grid_graph(n)
    assert md.discrete_modulus(g, A, B).value == pytest.approx(exhaustive_modulus(g, A, B), abs=1e-6)


def test_grid5_matches_exhaustive():
    g, A, B = grid_graph(5)
    assert md.discrete_modulus(g, A, B).value == pytest.approx(exhaustive_modulus(g, A, B), abs=1e-6)


@pytest.mark.parametrize("seed", range(12))
def test_random_graph_matches_exhaustive(seed):
    g, A, B = random_graph(seed, 8 + seed)
    r = md.discrete_modulus(g, A, B)
    assert r.value == pytest.approx(exhaustive_modulus(g, A, B), abs=1e-6)


def test_certificate():
    g, A, B = grid_graph(4)
    r = md.discrete_modulus(g, A, B)
    w = dict(zip(r.metric.vertices.tolist(), r.metric.rho.tolist()))
    d, _ = md.shortest_vertex_path(g, w, A, B)
    assert d >= 1 - 1e-9
    assert r.metric.area == pytest.approx(r.value)


def test_disconnected():
    g = {0: [1], 1: [0], 2: [3], 3: [2]}
    r = md.discrete_modulus(g, [0], [3])
    assert r.value == 0 and r.certificate == {0, 1}


def test_bad_marking():
    g = {0: [1], 1: [0]}
    with pytest.raises(ValueError):
        md.discrete_modulus(g, [], [1])
    with pytest.raises(ValueError):
        md.discrete_modulus(g, [0], [0, 1])


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), extra=st.integers(1, 4))
def test_monotone_under_edge_addition(seed, extra):
    g, A, B = random_graph(seed, 12)
    base = md.discrete_modulus(g, A, B).value
    rng = np.random.default_rng(seed + 1)
    h = {v: list(nb) for v, nb in g.items()}
    for _ in range(extra):
        a, b = rng.choice(12, 2, replace=False).tolist()
        if b not in h[a]:
            h[a].append(b)
            h[b].append(a)
    assert md.discrete_modulus(h, A, B).value >= base - 1e-9


# ------------------------------------------------------------------ metric transfer

def test_transfer_zero_metric(hex_flower):
    t, p = hex_flower
    m = md.transfer_metric(p, {v: 0.0 for v in range(7)}, 6, eta=0.25)
    assert m.area == 0


def test_transfer_single_atom(hex_flower):
    t, p = hex_flower
    eta, w = 0.3, 0.8
    m = md.transfer_metric(p, {0: w}, 6, eta=eta)
    r = p.radii[0]
    assert m.weights[0] == pytest.approx(w / (eta * r))
    assert m.radii[0] == pytest.approx((1 + eta) * r)
    assert m.area == pytest.approx(math.pi * (1 + eta) ** 2 * w ** 2 / eta ** 2)


def test_transfer_hex_flower_area_bound(hex_flower):
    t, p = hex_flower
    rho = md.DiscreteMetric(np.arange(7), np.ones(7))
    m = md.transfer_metric(p, rho, 6, triangulation=t)
    assert m.eta == pytest.approx(0.5)
    assert m.constant == pytest.approx(7 * 9)
    assert m.area / rho.area <= m.constant


def test_transfer_degree_check(hex_flower):
    t, p = hex_flower
    with pytest.raises(ValueError):
        md.transfer_metric(p, {0: 1.0}, 5, eta=0.5)


def test_transfer_admissibility(disk_packing):
    """Polylines through circle centres along crossing vertex paths have
    continuous length >= 1 when the discrete metric is admissible."""
    t, p = disk_packing
    cr = geom.exterior_discrete_approx(t, Rect((0.0, 0.0), 0.8, 0.5))
    dm = md.rectangle_modulus(cr)
    maxdeg = int(t.degree().max())
    rc = md.transfer_metric(p, dm.metric, maxdeg, triangulation=t)
    g = cr.graph()
    A, B = cr.side_paths[1].tolist(), cr.side_paths[3].tolist()
    rng = np.random.default_rng(0)
    for _ in range(30):
        w = {v: float(x) for v, x in zip(g, rng.random(len(g)))}
        _, path = md.shortest_vertex_path(g, w, A, B)
        assert rc.length(p.centers[path]) >= 1 - 1e-6


# ------------------------------------------------------------------ rough qc

def test_rough_qc_identity():
    rep = md.rough_qc_test(lambda z: z, Domain.disk(), 0.3, 5, seed=1)
    assert rep.K == pytest.approx(1, abs=1e-3)


def test_rough_qc_affine_stretch():
    stretch = pk.AffineMap.from_matrix([[2, 0], [0, 1]])
    rep = md.rough_qc_test(stretch, Domain.rectangle((-1, -1), 2, 2), 0.3, 5, seed=2, axis_aligned=True)
    assert rep.K == pytest.approx(2, rel=0.01)


def test_rough_qc_fold_is_infinite():
    fold = lambda z: np.where(np.real(z) > 0, -np.conj(z), z)
    rep = md.rough_qc_test(fold, Domain.disk(), 0.3, 20, seed=3)
    assert rep.K == math.inf and rep.witness is not None


def test_quasisymmetry():
    assert md.quasisymmetry_ratio(lambda z: z, (0.1, 0.2), 0.1) == pytest.approx(1)
    stretch = pk.AffineMap.from_matrix([[2, 0], [0, 1]])
    assert md.quasisymmetry_ratio(stretch, (0.0, 0.0), 0.1, samples=256) == pytest.approx(2, rel=1e-3)


# ------------------------------------------------------------------ square family

def test_square_family_eps_one():
    sq = md.square_family(Domain.rectangle((0, 0), 2, 1), 1.0)
    assert len(sq) == 2
    assert all(s.width == pytest.approx(1) and s.angle % (math.pi / 2) == pytest.approx(0, abs=1e-12)
               for s in sq)


def test_square_family_half():
    dom = Domain.rectangle((0, 0), 1, 1)
    sq = md.square_family(dom, 0.5)
    assert sq
    sides = {round(s.width, 12) for s in sq}
    assert sides <= {0.5, 1.0} and 1.0 in sides
    assert all(s.width * math.sqrt(2) <= math.sqrt(2) + 1e-12 for s in sq)
    assert all(dom.contains(s.corners()).all() or np.allclose(np.clip(s.corners(), 0, 1), s.corners())
               for s in sq)
    # deterministic and duplicate-free
    again = md.square_family(dom, 0.5)
    key = [(round(s.center[0], 9), round(s.center[1], 9), round(s.width, 9), round(s.angle % (math.pi / 2), 9))
           for s in sq]
    assert key == [(round(s.center[0], 9), round(s.center[1], 9), round(s.width, 9),
                    round(s.angle % (math.pi / 2), 9)) for s in again]
    assert len(set(key)) == len(key)
    with pytest.raises(ValueError):
        md.square_family(dom, 0)
