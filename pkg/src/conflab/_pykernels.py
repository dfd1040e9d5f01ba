"""Pure-Python reference kernels.

Every function here has a compiled twin in ``_ckernels.pyx`` with the same
signature and the same results; ``conflab._backend`` picks one at import.
"""
from __future__ import annotations

import math
from collections import deque

import numpy as np

from .predicates import incircle_sos, orient2d

NAME = "python"


class DegenerateInput(ValueError):
    """Fewer than three points, duplicates, or all points collinear."""


# --------------------------------------------------------------------------
# Delaunay triangulation: lexicographic sweep + Lawson flips
# --------------------------------------------------------------------------

def delaunay(xy):
    """Delaunay triangulation of the points ``xy`` (n, 2).

    Returns ``(triangles, neighbors)``; ``neighbors[t, i]`` is the triangle
    across the edge opposite local vertex ``i`` or -1 on the hull.
    """
    xy = np.ascontiguousarray(xy, dtype=np.float64)
    n = len(xy)
    if n < 3:
        raise DegenerateInput("need at least 3 points")
    order = np.lexsort((xy[:, 1], xy[:, 0]))
    srt = xy[order]
    if np.any(np.all(srt[1:] == srt[:-1], axis=1)):
        raise DegenerateInput("duplicate points")
    pts = [(float(x), float(y)) for x, y in xy]
    order = [int(i) for i in order]

    tv: list[list[int]] = []
    tn: list[list[int]] = []
    nxt = [-1] * n
    prv = [-1] * n
    htri = [-1] * n

    def orient(a, b, c):
        pa, pb, pc = pts[a], pts[b], pts[c]
        return orient2d(pa[0], pa[1], pb[0], pb[1], pc[0], pc[1])

    c0, c1 = order[0], order[1]
    k = 2
    while k < n and orient(c0, c1, order[k]) == 0:
        k += 1
    if k == n:
        raise DegenerateInput("all points collinear")
    pm = order[k]
    left = orient(c0, c1, pm) > 0
    for i in range(k - 1):
        a, b = order[i], order[i + 1]
        if left:
            tv.append([a, b, pm])
            tn.append([-1, -1, -1])
        else:
            tv.append([b, a, pm])
            tn.append([-1, -1, -1])
    for i in range(k - 2):
        # triangles i and i+1 share edge (order[i+1], pm)
        if left:
            tn[i][0] = i + 1      # (b, pm) opposite a
            tn[i + 1][1] = i      # (pm, a') opposite b'
        else:
            tn[i][1] = i + 1      # (a, pm) opposite b -> shares with next
            tn[i + 1][0] = i
    for t in range(len(tv)):
        for i in range(3):
            if tn[t][i] == -1:
                u, v = tv[t][(i + 1) % 3], tv[t][(i + 2) % 3]
                nxt[u] = v
                prv[v] = u
                htri[u] = t

    stack: list[tuple[int, int]] = []
    last = pm
    for j in range(k + 1, n):
        p = order[j]
        q = last
        a = q
        while orient(prv[a], a, p) < 0:
            a = prv[a]
        b = q
        while orient(b, nxt[b], p) < 0:
            b = nxt[b]
        first_new = len(tv)
        u = a
        prev_t = -1
        while u != b:
            v = nxt[u]
            t_old = htri[u]
            t = len(tv)
            tv.append([v, u, p])
            tn.append([-1, -1, t_old])
            lo = _local_edge(tv[t_old], u, v)
            tn[t_old][lo] = t
            if prev_t >= 0:
                # prev triangle (u, u_prev, p): edge (p, u) opposite u_prev
                tn[prev_t][1] = t
                tn[t][0] = prev_t
            prev_t = t
            stack.append((t, 2))
            u = v
        nxt[a] = p
        prv[p] = a
        nxt[p] = b
        prv[b] = p
        htri[a] = first_new
        htri[p] = prev_t
        _lawson(pts, tv, tn, htri, stack)
        last = p

    stack = [(t, i) for t in range(len(tv)) for i in range(3)]
    _lawson(pts, tv, tn, htri, stack)
    return np.array(tv, dtype=np.int64), np.array(tn, dtype=np.int64)


def _local_edge(tri, u, v):
    """Local index of the vertex opposite the directed edge u->v."""
    for i in range(3):
        if tri[(i + 1) % 3] == u and tri[(i + 2) % 3] == v:
            return i
    raise RuntimeError("edge not found in triangle")


def _lawson(pts, tv, tn, htri, stack):
    while stack:
        t, i = stack.pop()
        t2 = tn[t][i]
        if t2 < 0:
            continue
        tri = tv[t]
        p, a, b = tri[i], tri[(i + 1) % 3], tri[(i + 2) % 3]
        j = _local_edge(tv[t2], b, a)
        d = tv[t2][j]
        if incircle_sos(pts, p, a, b, d) <= 0:
            continue
        n_bp = tn[t][(i + 1) % 3]
        n_pa = tn[t][(i + 2) % 3]
        n_ad = tn[t2][(j + 1) % 3]   # t2 = (d, b, a): edge (a, d) opposite b
        n_db = tn[t2][(j + 2) % 3]   # edge (d, b) opposite a
        tv[t] = [p, a, d]
        tn[t] = [n_ad, t2, n_pa]
        tv[t2] = [p, d, b]
        tn[t2] = [n_db, n_bp, t]
        if n_ad >= 0:
            tn[n_ad][tn[n_ad].index(t2)] = t
        else:
            htri[a] = t
        if n_bp >= 0:
            tn[n_bp][tn[n_bp].index(t)] = t2
        else:
            htri[b] = t2
        stack.extend(((t, 0), (t2, 0), (t2, 1), (t, 2)))


# --------------------------------------------------------------------------
# point location
# --------------------------------------------------------------------------

def locate(xy, tris, nbrs, queries, start=0):
    """Walk to the triangle containing each query point.

    Returns an int array: triangle index, -1 if the walk left the
    triangulation, -2 if the step cap was hit (caller falls back to a scan).
    """
    m = len(tris)
    out = np.empty(len(queries), dtype=np.int64)
    t = int(start) if 0 <= start < m else 0
    cap = m + 16
    X = xy[:, 0].tolist()
    Y = xy[:, 1].tolist()
    tris = np.asarray(tris).tolist()
    nbrs = np.asarray(nbrs).tolist()
    for k in range(len(queries)):
        qx, qy = float(queries[k, 0]), float(queries[k, 1])
        cur = t
        steps = 0
        res = -2
        rot = 0
        while steps < cap:
            moved = False
            for s in range(3):
                i = (s + rot) % 3
                a = tris[cur][(i + 1) % 3]
                b = tris[cur][(i + 2) % 3]
                if (X[a] - qx) * (Y[b] - qy) - (Y[a] - qy) * (X[b] - qx) < 0.0:
                    nb = nbrs[cur][i]
                    if nb < 0:
                        res = -1
                    else:
                        cur = nb
                        moved = True
                    break
            if res == -1:
                break
            if not moved:
                res = cur
                break
            steps += 1
            rot = (rot + 1) % 3
        out[k] = res
        if res >= 0:
            t = res
    return out


# --------------------------------------------------------------------------
# 0-1 BFS on a square grid with vertex costs
# --------------------------------------------------------------------------

def chem_distance_field(cost, sr, sc):
    """Minimum over 4-neighbour paths of the summed vertex costs (both ends
    included) from (sr, sc) to every site.  ``cost`` holds 0 or 1."""
    cost = np.asarray(cost, dtype=np.uint8)
    H, W = cost.shape
    INF = np.iinfo(np.int32).max
    dist = np.full((H, W), INF, dtype=np.int32)
    c = cost.tolist()
    d = dist.tolist()
    d[sr][sc] = c[sr][sc]
    dq = deque([(sr, sc)])
    while dq:
        r, s = dq.popleft()
        base = d[r][s]
        for rr, ss in ((r - 1, s), (r + 1, s), (r, s - 1), (r, s + 1)):
            if 0 <= rr < H and 0 <= ss < W:
                w = c[rr][ss]
                nd = base + w
                if nd < d[rr][ss]:
                    d[rr][ss] = nd
                    if w:
                        dq.append((rr, ss))
                    else:
                        dq.appendleft((rr, ss))
    return np.array(d, dtype=np.int32)


# --------------------------------------------------------------------------
# circle packing: Gauss-Seidel sweep of exact per-vertex solves
# --------------------------------------------------------------------------

def _angle_sum(xv, xs):
    k = len(xs)
    total = 0.0
    for i in range(k):
        xu = xs[i]
        xw = xs[(i + 1) % k]
        q = xv * (1.0 - xu) * (1.0 - xw) / ((1.0 - xv * xu) * (1.0 - xv * xw))
        if q > 1.0:
            q = 1.0
        total += 2.0 * math.asin(math.sqrt(q))
    return total


def _angle_sum_and_slope(xv, xs):
    k = len(xs)
    total = 0.0
    slope = 0.0
    for i in range(k):
        xu = xs[i]
        xw = xs[(i + 1) % k]
        q = xv * (1.0 - xu) * (1.0 - xw) / ((1.0 - xv * xu) * (1.0 - xv * xw))
        if q >= 1.0:
            q = 1.0 - 1e-16
        half = math.asin(math.sqrt(q))
        total += 2.0 * half
        dlogq = 1.0 / xv + xu / (1.0 - xv * xu) + xw / (1.0 - xv * xw)
        slope += math.tan(half) * dlogq
    return total, slope


def _solve_label(xv, xs, target):
    lo, hi = 0.0, 1.0
    x = min(max(xv, 1e-300), 1.0 - 1e-16)
    for _ in range(100):
        f, df = _angle_sum_and_slope(x, xs)
        f -= target
        if f > 0:
            hi = x
        else:
            lo = x
        if abs(f) < 1e-14:
            break
        step = x - f / df if df > 0 else -1.0
        if not (lo < step < hi):
            step = 0.5 * (lo + hi)
        if abs(step - x) <= 1e-17 * max(x, 1e-300):
            x = step
            break
        x = step
    return x


def pack_sweep(labels, interior, nbr_ptr, nbr_idx, n_sweeps):
    """In-place Gauss-Seidel sweeps; returns the max angle-sum residual
    measured during the last sweep (before each vertex is updated)."""
    two_pi = 2.0 * math.pi
    worst = 0.0
    for _ in range(int(n_sweeps)):
        worst = 0.0
        for v in interior:
            v = int(v)
            xs = [labels[u] for u in nbr_idx[nbr_ptr[v]:nbr_ptr[v + 1]]]
            res = abs(_angle_sum(labels[v], xs) - two_pi)
            if res > worst:
                worst = res
            labels[v] = _solve_label(labels[v], xs, two_pi)
    return worst
