import math

import cvxpy as cp
import networkx as nx
import numpy as np
import pytest

from conflab import geom, modulus as md, packing as pk
from conflab.experiments import random_disk_triangulation


def brute_force_delaunay_violations(t):
    """Vertices strictly inside some triangle's circumcircle (float test with
    a relative margin; exact ties are allowed)."""
    cc, r = geom.circumcircles(t.vertices, t.triangles)
    bad = 0
    for c, rad, tri in zip(cc, r, t.triangles):
        d = np.linalg.norm(t.vertices - c, axis=1)
        inside = d < rad * (1 - 1e-9)
        inside[tri] = False
        bad += int(inside.sum())
    return bad


def random_quadrilateral(rng, k=None):
    """Star-shaped polygon with 4..9 vertices and four marked corners."""
    k = k or int(rng.integers(4, 10))
    # increasing angles with every gap below pi: a simple polygon, star-shaped about 0
    while True:
        ang = np.sort(rng.uniform(0, 2 * math.pi - 0.5, k)) + np.linspace(0, 0.5, k)
        if np.diff(np.r_[ang, ang[0] + 2 * math.pi]).max() < 0.9 * math.pi:
            break
    rad = rng.uniform(0.5, 1.5, k)
    v = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
    corners = tuple(sorted(rng.choice(k, 4, replace=False).tolist()))
    return md.Quadrilateral(v, corners, marked=0)

def exhaustive_modulus(graph, A, B):
    """min sum rho^2 over rho >= 0 with every crossing path of length >= 1,
    every simple path from A to B enumerated explicitly."""
    G = nx.Graph()
    for v, nb in graph.items():
        G.add_node(v)
        G.add_edges_from((v, u) for u in nb)
    A, B = set(A), set(B)
    nodes = sorted(G.nodes)
    ix = {v: i for i, v in enumerate(nodes)}
    rows = []
    for a in A:
        rows.append([ix[a]] if a in B else None)
        for b in B:
            for p in nx.all_simple_paths(G, a, b):
                # a path through another A or B vertex contains a shorter crossing
                if any(v in A for v in p[1:]) or any(v in B for v in p[:-1]):
                    continue
                rows.append([ix[v] for v in p])
    rows = [r for r in rows if r]
    if not rows:
        return 0.0
    M = np.zeros((len(rows), len(nodes)))
    for i, r in enumerate(rows):
        M[i, r] = 1
    x = cp.Variable(len(nodes))
    prob = cp.Problem(cp.Minimize(cp.sum_squares(x)), [M @ x >= 1, x >= 0])
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    return float(prob.value)

def grid_graph(n):
    g = {}
    for i in range(n):
        for j in range(n):
            v = i * n + j
            g[v] = [(i + di) * n + j + dj for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1))
                    if 0 <= i + di < n and 0 <= j + dj < n]
    return g, [i * n for i in range(n)], [i * n + n - 1 for i in range(n)]

def random_graph(seed, n):
    rng = np.random.default_rng(seed)
    G = nx.gnp_random_graph(n, 3.0 / n, seed=int(rng.integers(1 << 31)))
    g = {v: list(G.neighbors(v)) for v in G.nodes}
    k = max(1, n // 5)
    perm = rng.permutation(n)
    return g, perm[:k].tolist(), perm[k:2 * k].tolist()


@pytest.fixture(scope="session")
def hex_flower():
    t = geom.hex_patch(1)
    return t, pk.max_circle_packing(t)


@pytest.fixture(scope="session")
def disk_packing():
    """A clipped Poisson-Delaunay disk at intensity 300 with its packing
    normalized at the vertices nearest 0 and 1/2."""
    t, _ = random_disk_triangulation(300, 12345)
    p = pk.max_circle_packing(t)
    v1 = geom.nearest_vertex(t, (0, 0))
    v2 = geom.nearest_vertex(t, (0.5, 0))
    return t, pk.normalize_packing(p, v1, v2)


# ------------------------------------------------------------------ acceptance summary

ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """``record(k, passed, detail)`` stores one summary line per criterion."""
    def record(k, passed, detail):
        ACCEPTANCE[k] = (passed, detail)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
