import xml.etree.ElementTree as ET

import numpy as np
import pytest

from conflab import beltrami as bel, geom, io, modulus as md, packing as pk, percolation as pc, svg
from conflab.geom import Domain

NS = "{http://www.w3.org/2000/svg}"


def roundtrip(writer, reader, obj, tmp_path=None):
    text = io.dumps(writer, obj)
    if tmp_path is not None:
        f = tmp_path / "obj.txt"
        writer(obj, f)
        assert f.read_text() == text
        return reader(f), text
    return reader(text), text


def test_points_roundtrip(tmp_path):
    ps = geom.sample_poisson(Domain.disk(), 50, 3)
    back, _ = roundtrip(io.write_points, io.read_points, ps, tmp_path)
    assert np.array_equal(back.points, ps.points)


def test_triangulation_roundtrip():
    t = geom.delaunay(np.random.default_rng(0).random((40, 2)))
    back, text = roundtrip(io.write_triangulation, io.read_triangulation, t)
    assert np.array_equal(back.vertices, t.vertices)
    assert np.array_equal(back.triangles, t.triangles)
    assert io.dumps(io.write_triangulation, back) == text


def test_packing_roundtrip(disk_packing):
    t, p = disk_packing
    back, text = roundtrip(io.write_packing, io.read_packing, p)
    assert np.array_equal(back.centers, p.centers) and np.array_equal(back.radii, p.radii)
    assert np.array_equal(back.boundary, p.boundary)
    assert back.normalization[0] == pytest.approx(p.normalization[0])
    # hyperbolic data is recovered from the Euclidean circles
    assert np.allclose(back.labels[~p.boundary], p.labels[~p.boundary], rtol=1e-8)
    assert np.allclose(back.hcenters, p.hcenters, atol=1e-10)
    assert io.dumps(io.write_packing, back) == text


def test_quadrilateral_roundtrip():
    q = md.l_shape()
    back, _ = roundtrip(io.write_quadrilateral, io.read_quadrilateral, q)
    assert np.array_equal(back.vertices, q.vertices)
    assert back.corners == q.corners and back.marked == q.marked


def test_metric_roundtrip():
    rho = md.DiscreteMetric(np.array([3, 7, 11]), np.array([0.1, 1 / 3, 0.0]))
    back, _ = roundtrip(io.write_metric, io.read_metric, rho)
    assert np.array_equal(back.vertices, rho.vertices) and np.array_equal(back.rho, rho.rho)


def test_coloring_roundtrip(tmp_path):
    c = pc.color_grid(12, 0.3, 42, delta=0.25)
    back, _ = roundtrip(io.write_coloring, io.read_coloring, c, tmp_path)
    assert np.array_equal(back.yellow, c.yellow)
    assert (back.N, back.r, back.seed, back.delta) == (c.N, c.r, c.seed, c.delta)


def test_coloring_rejects_bad_rows():
    text = io.dumps(io.write_coloring, pc.color_grid(2, 0.5, 0))
    lines = text.splitlines()
    lines[3] = "4b"
    with pytest.raises(io.FormatError):
        io.read_coloring("\n".join(lines) + "\n")


def test_field_roundtrip():
    f = bel.sample_field(bel.DilatationLaw.uniform_disk(0.5), 0.25, Domain.disk(), mu0=0.1j, seed=1)
    back, _ = roundtrip(io.write_field, io.read_field, f)
    assert np.array_equal(back.values, f.values)
    assert back.origin == f.origin and back.delta == f.delta and back.mu0 == f.mu0


def test_map_roundtrip():
    f = bel.sample_field(bel.DilatationLaw.two_point(0.3, -0.3), 0.5, Domain.rectangle((-1, -1), 2, 2), seed=2)
    m = bel.solve_beltrami(f, 0.25, 1e-8)
    back, _ = roundtrip(io.write_map, io.read_map, m)
    assert np.array_equal(back["values"], m.values)
    assert back["h"] == m.h and back["origin"] == (m.x0, m.x0)


def test_format_errors():
    with pytest.raises(io.FormatError):
        io.read_triangulation("TRI 3 1\nV 0 0\nV 1 0\n")
    with pytest.raises(io.FormatError):
        io.read_points("PTX 1\nP 0 0\n")


# ------------------------------------------------------------------ SVG

def parse(text):
    return ET.fromstring(text)


def test_hex_flower_svg_has_seven_circles(hex_flower):
    t, p = hex_flower
    root = parse(svg.packing_svg(p))
    assert len(root.findall(f".//{NS}circle")) == 7


def test_svg_deterministic(disk_packing, tmp_path):
    t, p = disk_packing
    a = svg.packing_svg(p)
    assert a == svg.packing_svg(p)
    svg.render_svg(p, tmp_path / "p.svg")
    assert (tmp_path / "p.svg").read_text() == a


def test_empty_coloring_svg():
    root = parse(svg.coloring_svg(pc.color_grid(5, 0.0, 0)))
    rects = root.findall(f".//{NS}rect")
    assert len(rects) == 1            # background only


def test_coloring_svg_runs():
    c = pc.color_grid(10, 0.3, 1)
    root = parse(svg.coloring_svg(c, deep=pc.deep_blue(c, 3)))
    n_runs = sum(sum(1 for a, b in zip(np.r_[False, row[:-1]], row) if b and not a) for row in c.yellow)
    deep = pc.deep_blue(c, 3)
    n_deep = sum(sum(1 for a, b in zip(np.r_[False, row[:-1]], row) if b and not a) for row in deep)
    assert len(root.findall(f".//{NS}rect")) == 1 + n_runs + n_deep


def test_triangulation_and_map_svg(tmp_path):
    t = geom.hex_patch(2)
    assert parse(svg.triangulation_svg(t)).tag == f"{NS}svg"
    m = bel.solve_beltrami(bel.strips_field(0.25, 0.2, 1.0), 1 / 16, 1e-8, n=64)
    root = parse(svg.map_svg(m, lines=5))
    assert len(root.findall(f".//{NS}polyline")) == 10
    svg.render_svg(t, tmp_path / "t.svg")
    assert (tmp_path / "t.svg").exists()
