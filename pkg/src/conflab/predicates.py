"""Exact orientation and in-circle predicates.

Both predicates evaluate a floating-point determinant first and accept its
sign when it clears a forward error bound (the static "A" bounds of
Shewchuk's adaptive predicates).  Otherwise the determinant is recomputed
exactly with rational arithmetic.  Input coordinates are doubles, so the
exact path is always correct.

``incircle_sos`` resolves cocircular quadruples with a symbolic perturbation
of the paraboloid lifting: vertex ``i`` is lifted to ``|p_i|^2 + eps_i`` with
``eps_i >> eps_j`` whenever ``i < j``.  This is a genuine perturbation, so the
flip algorithm converges to one canonical triangulation.
"""
from __future__ import annotations

from fractions import Fraction

_EPS = 2.0 ** -53
_CCW_BOUND = (3.0 + 16.0 * _EPS) * _EPS
_ICC_BOUND = (10.0 + 96.0 * _EPS) * _EPS


def _sign(x) -> int:
    return (x > 0) - (x < 0)


def orient2d_exact(ax, ay, bx, by, cx, cy) -> int:
    ax, ay, bx, by, cx, cy = map(Fraction, (ax, ay, bx, by, cx, cy))
    return _sign((ax - cx) * (by - cy) - (ay - cy) * (bx - cx))


def orient2d(ax, ay, bx, by, cx, cy) -> int:
    """Sign of the signed area of triangle abc: +1 counterclockwise."""
    detleft = (ax - cx) * (by - cy)
    detright = (ay - cy) * (bx - cx)
    det = detleft - detright
    bound = _CCW_BOUND * (abs(detleft) + abs(detright))
    if det > bound:
        return 1
    if -det > bound:
        return -1
    return orient2d_exact(ax, ay, bx, by, cx, cy)


def incircle_exact(ax, ay, bx, by, cx, cy, dx, dy) -> int:
    ax, ay, bx, by, cx, cy, dx, dy = map(Fraction, (ax, ay, bx, by, cx, cy, dx, dy))
    adx, ady = ax - dx, ay - dy
    bdx, bdy = bx - dx, by - dy
    cdx, cdy = cx - dx, cy - dy
    det = ((adx * adx + ady * ady) * (bdx * cdy - cdx * bdy)
           + (bdx * bdx + bdy * bdy) * (cdx * ady - adx * cdy)
           + (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady))
    return _sign(det)


def incircle(ax, ay, bx, by, cx, cy, dx, dy) -> int:
    """+1 if d lies strictly inside the circle through a, b, c (abc ccw)."""
    adx, ady = ax - dx, ay - dy
    bdx, bdy = bx - dx, by - dy
    cdx, cdy = cx - dx, cy - dy
    bdxcdy, cdxbdy = bdx * cdy, cdx * bdy
    cdxady, adxcdy = cdx * ady, adx * cdy
    adxbdy, bdxady = adx * bdy, bdx * ady
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    det = (alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy)
           + clift * (adxbdy - bdxady))
    permanent = ((abs(bdxcdy) + abs(cdxbdy)) * alift
                 + (abs(cdxady) + abs(adxcdy)) * blift
                 + (abs(adxbdy) + abs(bdxady)) * clift)
    bound = _ICC_BOUND * permanent
    if det > bound:
        return 1
    if -det > bound:
        return -1
    return incircle_exact(ax, ay, bx, by, cx, cy, dx, dy)


def incircle_sos(xy, ia: int, ib: int, ic: int, id_: int) -> int:
    """Perturbed in-circle sign for vertex indices into ``xy``; never 0 for
    four distinct points with abc counterclockwise."""
    a, b, c, d = xy[ia], xy[ib], xy[ic], xy[id_]
    s = incircle(a[0], a[1], b[0], b[1], c[0], c[1], d[0], d[1])
    if s:
        return s
    return _perturbed_tiebreak(xy, ia, ib, ic, id_)


def _perturbed_tiebreak(xy, ia, ib, ic, id_) -> int:
    # d/d(eps_k) of the translated in-circle determinant, k in a, b, c, d.
    a, b, c, d = xy[ia], xy[ib], xy[ic], xy[id_]

    def o(p, q, r):
        return orient2d(p[0], p[1], q[0], q[1], r[0], r[1])

    terms = sorted([
        (ia, lambda: o(b, c, d)),
        (ib, lambda: o(c, a, d)),
        (ic, lambda: o(a, b, d)),
        (id_, lambda: -o(a, b, c)),
    ], key=lambda t: t[0])
    for _, coef in terms:
        s = coef()
        if s:
            return s
    return 0
