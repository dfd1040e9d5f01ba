# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_pykernels``.

Same signatures, same results.  Geometric predicates use the same floating
filter; uncertain cases are handed to the exact Python predicates.
"""
import numpy as np

from libc.math cimport asin, fabs, sqrt, tan, M_PI
from libcpp.deque cimport deque
from libcpp.vector cimport vector

from .predicates import incircle_sos as _py_incircle_sos
from .predicates import orient2d_exact as _py_orient_exact
from ._pykernels import DegenerateInput

NAME = "cython"

cdef double _EPS = 2.0 ** -53
cdef double _CCW_BOUND = (3.0 + 16.0 * _EPS) * _EPS
cdef double _ICC_BOUND = (10.0 + 96.0 * _EPS) * _EPS


cdef int _orient(double[:, ::1] P, long long a, long long b, long long c) except? -9:
    cdef double ax = P[a, 0], ay = P[a, 1], bx = P[b, 0], by = P[b, 1]
    cdef double cx = P[c, 0], cy = P[c, 1]
    cdef double detleft = (ax - cx) * (by - cy)
    cdef double detright = (ay - cy) * (bx - cx)
    cdef double det = detleft - detright
    cdef double bound = _CCW_BOUND * (fabs(detleft) + fabs(detright))
    if det > bound:
        return 1
    if -det > bound:
        return -1
    return _py_orient_exact(ax, ay, bx, by, cx, cy)


cdef int _incircle(object xyo, double[:, ::1] P, long long a, long long b,
                   long long c, long long d) except? -9:
    cdef double adx = P[a, 0] - P[d, 0], ady = P[a, 1] - P[d, 1]
    cdef double bdx = P[b, 0] - P[d, 0], bdy = P[b, 1] - P[d, 1]
    cdef double cdx = P[c, 0] - P[d, 0], cdy = P[c, 1] - P[d, 1]
    cdef double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy
    cdef double cdxady = cdx * ady, adxcdy = adx * cdy
    cdef double adxbdy = adx * bdy, bdxady = bdx * ady
    cdef double alift = adx * adx + ady * ady
    cdef double blift = bdx * bdx + bdy * bdy
    cdef double clift = cdx * cdx + cdy * cdy
    cdef double det = (alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy)
                       + clift * (adxbdy - bdxady))
    cdef double perm = ((fabs(bdxcdy) + fabs(cdxbdy)) * alift
                        + (fabs(cdxady) + fabs(adxcdy)) * blift
                        + (fabs(adxbdy) + fabs(bdxady)) * clift)
    cdef double bound = _ICC_BOUND * perm
    if det > bound:
        return 1
    if -det > bound:
        return -1
    return _py_incircle_sos(xyo, a, b, c, d)


cdef inline int _local(long long[:, ::1] TV, long long t, long long u, long long v):
    cdef int i
    for i in range(3):
        if TV[t, (i + 1) % 3] == u and TV[t, (i + 2) % 3] == v:
            return i
    return -1


cdef inline void _replace(long long[:, ::1] TN, long long t, long long old, long long new):
    cdef int k
    for k in range(3):
        if TN[t, k] == old:
            TN[t, k] = new
            return


cdef int _lawson(object xyo, double[:, ::1] P, long long[:, ::1] TV,
                 long long[:, ::1] TN, long long[::1] htri,
                 vector[long long]& stk) except -1:
    cdef long long code, t, t2, p, a, b, d, n_bp, n_pa, n_ad, n_db
    cdef int i, j
    while stk.size():
        code = stk.back()
        stk.pop_back()
        t = code // 3
        i = code % 3
        t2 = TN[t, i]
        if t2 < 0:
            continue
        p = TV[t, i]
        a = TV[t, (i + 1) % 3]
        b = TV[t, (i + 2) % 3]
        j = _local(TV, t2, b, a)
        d = TV[t2, j]
        if _incircle(xyo, P, p, a, b, d) <= 0:
            continue
        n_bp = TN[t, (i + 1) % 3]
        n_pa = TN[t, (i + 2) % 3]
        n_ad = TN[t2, (j + 1) % 3]
        n_db = TN[t2, (j + 2) % 3]
        TV[t, 0] = p; TV[t, 1] = a; TV[t, 2] = d
        TN[t, 0] = n_ad; TN[t, 1] = t2; TN[t, 2] = n_pa
        TV[t2, 0] = p; TV[t2, 1] = d; TV[t2, 2] = b
        TN[t2, 0] = n_db; TN[t2, 1] = n_bp; TN[t2, 2] = t
        if n_ad >= 0:
            _replace(TN, n_ad, t2, t)
        else:
            htri[a] = t
        if n_bp >= 0:
            _replace(TN, n_bp, t, t2)
        else:
            htri[b] = t2
        stk.push_back(t * 3 + 0)
        stk.push_back(t2 * 3 + 0)
        stk.push_back(t2 * 3 + 1)
        stk.push_back(t * 3 + 2)
    return 0


def delaunay(xy):
    """Delaunay triangulation of ``xy`` (n, 2); see ``_pykernels.delaunay``."""
    xy = np.ascontiguousarray(xy, dtype=np.float64)
    cdef Py_ssize_t n = xy.shape[0]
    if n < 3:
        raise DegenerateInput("need at least 3 points")
    order_arr = np.lexsort((xy[:, 1], xy[:, 0])).astype(np.int64)
    srt = xy[order_arr]
    if np.any(np.all(srt[1:] == srt[:-1], axis=1)):
        raise DegenerateInput("duplicate points")
    cdef double[:, ::1] P = xy
    cdef long long[::1] order = order_arr
    cdef Py_ssize_t cap = 2 * n + 8
    tv_arr = np.full((cap, 3), -1, dtype=np.int64)
    tn_arr = np.full((cap, 3), -1, dtype=np.int64)
    cdef long long[:, ::1] TV = tv_arr
    cdef long long[:, ::1] TN = tn_arr
    nxt_arr = np.full(n, -1, dtype=np.int64)
    prv_arr = np.full(n, -1, dtype=np.int64)
    htri_arr = np.full(n, -1, dtype=np.int64)
    cdef long long[::1] nxt = nxt_arr, prv = prv_arr, htri = htri_arr
    cdef vector[long long] stk
    cdef Py_ssize_t k, i, j, ntri = 0
    cdef long long c0 = order[0], c1 = order[1], pm, a, b, u, v, p, q, t, t_old, prev_t, first_new
    cdef int lo
    cdef bint left

    k = 2
    while k < n and _orient(P, c0, c1, order[k]) == 0:
        k += 1
    if k == n:
        raise DegenerateInput("all points collinear")
    pm = order[k]
    left = _orient(P, c0, c1, pm) > 0
    for i in range(k - 1):
        a = order[i]
        b = order[i + 1]
        if left:
            TV[ntri, 0] = a; TV[ntri, 1] = b
        else:
            TV[ntri, 0] = b; TV[ntri, 1] = a
        TV[ntri, 2] = pm
        ntri += 1
    for i in range(k - 2):
        if left:
            TN[i, 0] = i + 1
            TN[i + 1, 1] = i
        else:
            TN[i, 1] = i + 1
            TN[i + 1, 0] = i
    for t in range(ntri):
        for i in range(3):
            if TN[t, i] == -1:
                u = TV[t, (i + 1) % 3]
                v = TV[t, (i + 2) % 3]
                nxt[u] = v
                prv[v] = u
                htri[u] = t

    q = pm
    for j in range(k + 1, n):
        p = order[j]
        a = q
        while _orient(P, prv[a], a, p) < 0:
            a = prv[a]
        b = q
        while _orient(P, b, nxt[b], p) < 0:
            b = nxt[b]
        first_new = ntri
        u = a
        prev_t = -1
        while u != b:
            v = nxt[u]
            t_old = htri[u]
            t = ntri
            ntri += 1
            TV[t, 0] = v; TV[t, 1] = u; TV[t, 2] = p
            TN[t, 0] = -1; TN[t, 1] = -1; TN[t, 2] = t_old
            lo = _local(TV, t_old, u, v)
            TN[t_old, lo] = t
            if prev_t >= 0:
                TN[prev_t, 1] = t
                TN[t, 0] = prev_t
            prev_t = t
            stk.push_back(t * 3 + 2)
            u = v
        nxt[a] = p
        prv[p] = a
        nxt[p] = b
        prv[b] = p
        htri[a] = first_new
        htri[p] = prev_t
        _lawson(xy, P, TV, TN, htri, stk)
        q = p

    for t in range(ntri):
        for i in range(3):
            stk.push_back(t * 3 + i)
    _lawson(xy, P, TV, TN, htri, stk)
    return tv_arr[:ntri].copy(), tn_arr[:ntri].copy()


def locate(xy, tris, nbrs, queries, start=0):
    """Walk point location; see ``_pykernels.locate``."""
    cdef double[:, ::1] P = np.ascontiguousarray(xy, dtype=np.float64)
    cdef long long[:, ::1] T = np.ascontiguousarray(tris, dtype=np.int64)
    cdef long long[:, ::1] N = np.ascontiguousarray(nbrs, dtype=np.int64)
    cdef double[:, ::1] Q = np.ascontiguousarray(queries, dtype=np.float64)
    cdef Py_ssize_t m = T.shape[0], nq = Q.shape[0], kq
    out_arr = np.empty(nq, dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef long long t = start if 0 <= start < m else 0
    cdef long long cur, res, nb, a, b, cap = m + 16, steps
    cdef int rot, s, i
    cdef bint moved
    cdef double qx, qy
    for kq in range(nq):
        qx = Q[kq, 0]
        qy = Q[kq, 1]
        cur = t
        steps = 0
        res = -2
        rot = 0
        while steps < cap:
            moved = False
            for s in range(3):
                i = (s + rot) % 3
                a = T[cur, (i + 1) % 3]
                b = T[cur, (i + 2) % 3]
                if (P[a, 0] - qx) * (P[b, 1] - qy) - (P[a, 1] - qy) * (P[b, 0] - qx) < 0.0:
                    nb = N[cur, i]
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
        out[kq] = res
        if res >= 0:
            t = res
    return out_arr


def chem_distance_field(cost, Py_ssize_t sr, Py_ssize_t sc):
    """0-1 BFS with vertex costs; see ``_pykernels.chem_distance_field``."""
    cost_arr = np.ascontiguousarray(cost, dtype=np.uint8)
    cdef unsigned char[:, ::1] c = cost_arr
    cdef Py_ssize_t H = c.shape[0], W = c.shape[1]
    cdef int INF = np.iinfo(np.int32).max
    dist_arr = np.full((H, W), INF, dtype=np.int32)
    cdef int[:, ::1] d = dist_arr
    cdef deque[long long] dq
    cdef long long code
    cdef Py_ssize_t r, s, rr, ss, k
    cdef int base, nd, w
    cdef int dr[4]
    cdef int ds[4]
    dr[:] = [-1, 1, 0, 0]
    ds[:] = [0, 0, -1, 1]
    d[sr, sc] = c[sr, sc]
    dq.push_back(sr * W + sc)
    while dq.size():
        code = dq.front()
        dq.pop_front()
        r = code // W
        s = code % W
        base = d[r, s]
        for k in range(4):
            rr = r + dr[k]
            ss = s + ds[k]
            if 0 <= rr < H and 0 <= ss < W:
                w = c[rr, ss]
                nd = base + w
                if nd < d[rr, ss]:
                    d[rr, ss] = nd
                    if w:
                        dq.push_back(rr * W + ss)
                    else:
                        dq.push_front(rr * W + ss)
    return dist_arr


cdef double _angle_sum(double xv, double[::1] lab, long long[::1] idx,
                       Py_ssize_t lo, Py_ssize_t hi):
    cdef Py_ssize_t k = hi - lo, i
    cdef double total = 0.0, xu, xw, q
    for i in range(k):
        xu = lab[idx[lo + i]]
        xw = lab[idx[lo + (i + 1) % k]]
        q = xv * (1.0 - xu) * (1.0 - xw) / ((1.0 - xv * xu) * (1.0 - xv * xw))
        if q > 1.0:
            q = 1.0
        total += 2.0 * asin(sqrt(q))
    return total


cdef double _solve_label(double xv, double[::1] lab, long long[::1] idx,
                         Py_ssize_t lo, Py_ssize_t hi, double target):
    cdef Py_ssize_t k = hi - lo, i, it
    cdef double a = 0.0, b = 1.0, x, f, df, step, xu, xw, q, half, dlogq
    x = xv
    if x < 1e-300:
        x = 1e-300
    if x > 1.0 - 1e-16:
        x = 1.0 - 1e-16
    for it in range(100):
        f = 0.0
        df = 0.0
        for i in range(k):
            xu = lab[idx[lo + i]]
            xw = lab[idx[lo + (i + 1) % k]]
            q = x * (1.0 - xu) * (1.0 - xw) / ((1.0 - x * xu) * (1.0 - x * xw))
            if q >= 1.0:
                q = 1.0 - 1e-16
            half = asin(sqrt(q))
            f += 2.0 * half
            dlogq = 1.0 / x + xu / (1.0 - x * xu) + xw / (1.0 - x * xw)
            df += tan(half) * dlogq
        f -= target
        if f > 0:
            b = x
        else:
            a = x
        if fabs(f) < 1e-14:
            break
        step = x - f / df if df > 0 else -1.0
        if not (a < step < b):
            step = 0.5 * (a + b)
        if fabs(step - x) <= 1e-17 * (x if x > 1e-300 else 1e-300):
            x = step
            break
        x = step
    return x


def pack_sweep(labels, interior, nbr_ptr, nbr_idx, n_sweeps):
    """In-place Gauss-Seidel sweeps; see ``_pykernels.pack_sweep``."""
    cdef double[::1] lab = labels
    cdef long long[::1] inter = np.ascontiguousarray(interior, dtype=np.int64)
    cdef long long[::1] ptr = np.ascontiguousarray(nbr_ptr, dtype=np.int64)
    cdef long long[::1] idx = np.ascontiguousarray(nbr_idx, dtype=np.int64)
    cdef double two_pi = 2.0 * M_PI, worst = 0.0, res
    cdef Py_ssize_t sweep, kk
    cdef long long v
    for sweep in range(n_sweeps):
        worst = 0.0
        for kk in range(inter.shape[0]):
            v = inter[kk]
            res = fabs(_angle_sum(lab[v], lab, idx, ptr[v], ptr[v + 1]) - two_pi)
            if res > worst:
                worst = res
            lab[v] = _solve_label(lab[v], lab, idx, ptr[v], ptr[v + 1], two_pi)
    return worst
