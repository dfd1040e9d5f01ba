"""Site percolation on square grids: colorings, chemical distances and
deep-blue cells.

Lattice point ``(i, j)`` with ``-N <= i, j <= N`` is stored at
``yellow[i + N, j + N]``.  For continuous lengths the same entry colors the
half-open cell ``[i delta, (i+1) delta) x [j delta, (j+1) delta)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import minimum_filter

from ._backend import kernels


@dataclass(frozen=True)
class GridColoring:
    """Blue/yellow coloring of the lattice points of [-N, N]^2.

    ``uniforms`` keeps the iid field behind an iid coloring, so that the
    same randomness can be recolored at another ``r`` (coupling).
    """
    N: int
    r: float
    yellow: np.ndarray
    seed: int | None = None
    delta: float = 1.0
    uniforms: np.ndarray | None = field(default=None, repr=False)

    @property
    def blue(self) -> np.ndarray:
        return ~self.yellow

    @property
    def shape(self):
        return self.yellow.shape

    def index(self, x) -> tuple:
        i, j = int(x[0]) + self.N, int(x[1]) + self.N
        if not (0 <= i < 2 * self.N + 1 and 0 <= j < 2 * self.N + 1):
            raise ValueError(f"lattice point {tuple(x)} outside [-{self.N}, {self.N}]^2")
        return i, j

    def recolor(self, r: float) -> GridColoring:
        """Same underlying uniforms, new percolation parameter."""
        if self.uniforms is None:
            raise ValueError("coloring carries no underlying uniforms")
        _check_r(r)
        return GridColoring(self.N, r, self.uniforms < r, self.seed, self.delta, self.uniforms)


def _check_r(r):
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"percolation parameter must lie in [0, 1], got {r}")


def color_grid(N: int, r: float, seed, delta: float = 1.0) -> GridColoring:
    """Each site independently yellow with probability r."""
    _check_r(r)
    if N < 0:
        raise ValueError("N must be nonnegative")
    u = np.random.default_rng(seed).random((2 * N + 1, 2 * N + 1))
    return GridColoring(N, r, u < r, seed, delta, u)


def chemical_distance_field(c: GridColoring, x) -> np.ndarray:
    """Chemical distance from ``x`` to every site (see :func:`chemical_distance`)."""
    i, j = c.index(x)
    cost = c.blue.astype(np.uint8)
    D = kernels.chem_distance_field(cost, i, j).astype(float)
    return D - 0.5 * (cost[i, j] + cost)


def chemical_distance(c: GridColoring, x, y) -> float:
    """Minimum number of blue sites on a 4-neighbour lattice path from x to y.

    Interior sites count fully and each endpoint counts one half, so the
    value is symmetric and equals the lattice distance on an all-blue grid.
    """
    i, j = c.index(y)
    return float(chemical_distance_field(c, x)[i, j])


def lattice_distance(x, y) -> int:
    return abs(int(x[0]) - int(y[0])) + abs(int(x[1]) - int(y[1]))


def continuous_chemical_length(c: GridColoring, path) -> float:
    """Length of the part of a polyline lying in blue cells."""
    path = np.asarray(path, dtype=float) / c.delta
    N = c.N
    if np.any(path < -N) or np.any(path > N + 1):
        raise ValueError("path leaves the colored region")
    blue = c.blue
    total = 0.0
    for p, q in zip(path[:-1], path[1:]):
        d = q - p
        L = math.hypot(d[0], d[1])
        if L == 0:
            continue
        ts = [0.0, 1.0]
        for k in range(2):
            if d[k] != 0:
                lo, hi = sorted((p[k], q[k]))
                g = np.arange(math.ceil(lo), math.floor(hi) + 1)
                ts.extend(((g - p[k]) / d[k]).tolist())
        t = np.unique(np.clip(ts, 0.0, 1.0))
        mid = p[None] + 0.5 * (t[1:] + t[:-1])[:, None] * d[None]
        ij = np.floor(mid).astype(np.int64) + N
        ij = np.minimum(ij, 2 * N)              # the far edge x = N + 1 is closed
        seg = np.diff(t) * L
        total += float(np.sum(seg[blue[ij[:, 0], ij[:, 1]]]))
    return total * c.delta


def deep_blue(c: GridColoring, m: int) -> np.ndarray:
    """Sites whose whole m x m block (centred on the site) is blue.

    Blocks leaving the grid are not deep blue.
    """
    if m < 1 or m % 2 == 0:
        raise ValueError("depth m must be an odd integer >= 1")
    return minimum_filter(c.blue.astype(np.uint8), size=m, mode="constant", cval=0).astype(bool)


# --------------------------------------------------------------------------
# Monte Carlo check of the chemical distance lemma
# --------------------------------------------------------------------------

def union_bound(N: int, r: float) -> float:
    """2 (2N+1)^2 sum_{L >= log N} (8 r^{1/10})^L, summed as a geometric
    series (infinite when the ratio is >= 1)."""
    q = 8.0 * r ** 0.1
    if q >= 1.0:
        return math.inf
    L0 = max(math.ceil(math.log(N)), 0) if N > 1 else 0
    return 2.0 * (2 * N + 1) ** 2 * q ** L0 / (1.0 - q)


@dataclass
class PercolationReport:
    N: int
    r: float
    theta: float
    trials: int
    pairs_per_trial: int
    success_fraction: float
    worst_ratio: float
    worst_pair: tuple | None
    union_bound: float
    ratios: list = field(default_factory=list, repr=False)


def sample_pairs(N: int, count: int, rng, min_distance: float):
    """``count`` lattice pairs in [-N, N]^2 with Euclidean distance at least
    ``min_distance`` (rejection sampling)."""
    out = []
    while len(out) < count:
        a = rng.integers(-N, N + 1, size=2)
        b = rng.integers(-N, N + 1, size=2)
        if math.hypot(*(a - b)) >= min_distance:
            out.append((tuple(int(v) for v in a), tuple(int(v) for v in b)))
    return out


def verify_percolation_bound(N: int, r: float, trials: int, theta: float, seed,
                             pairs_per_trial: int = 20) -> PercolationReport:
    """Fraction of trials in which every sampled pair with |x - y| >= log N
    has chemical distance at least ``theta`` times the lattice distance."""
    ss = np.random.SeedSequence(seed)
    ok = 0
    worst, worst_pair = math.inf, None
    ratios = []
    for t in range(trials):
        child = np.random.SeedSequence(ss.entropy, spawn_key=(t,))
        rng = np.random.default_rng(child)
        c = color_grid(N, r, rng.integers(2 ** 63))
        good = True
        tr_worst = math.inf
        for x, y in sample_pairs(N, pairs_per_trial, rng, math.log(max(N, 1))):
            ratio = chemical_distance(c, x, y) / lattice_distance(x, y)
            tr_worst = min(tr_worst, ratio)
            if ratio < theta:
                good = False
            if ratio < worst:
                worst, worst_pair = ratio, (t, x, y)
        ratios.append(tr_worst)
        ok += good
    return PercolationReport(N, r, theta, trials, pairs_per_trial, ok / trials if trials else 1.0,
                             worst, worst_pair, union_bound(N, r), ratios)


# --------------------------------------------------------------------------
# m-dependent colorings
# --------------------------------------------------------------------------

def _rule(rule):
    if callable(rule):
        return rule
    rules = {
        "identity": lambda w: w[..., w.shape[-2] // 2, w.shape[-1] // 2],
        "any": lambda w: w.any(axis=(-2, -1)),
        "all": lambda w: w.all(axis=(-2, -1)),
        "majority": lambda w: 2 * w.sum(axis=(-2, -1)) > w.shape[-1] * w.shape[-2],
    }
    try:
        return rules[rule]
    except KeyError:
        raise ValueError(f"unknown rule {rule!r}; expected one of {sorted(rules)} or a callable") from None


def m_dependent_coloring(N: int, r: float, m: int, rule="identity", seed=None,
                         delta: float = 1.0) -> GridColoring:
    """Coloring where each site's color is ``rule`` applied to the m x m
    window of an iid yellow field (yellow with probability r) centred on it.

    Sites at Chebyshev distance >= m read disjoint windows, so their colors
    are independent.  ``rule`` is a name ("identity", "any", "all",
    "majority") or a callable mapping an array of windows ``(..., m, m)`` to
    booleans.
    """
    _check_r(r)
    if m < 1 or m % 2 == 0:
        raise ValueError("window m must be an odd integer >= 1")
    h = (m - 1) // 2
    base = np.random.default_rng(seed).random((2 * N + 1 + 2 * h, 2 * N + 1 + 2 * h)) < r
    win = sliding_window_view(base, (m, m))
    yellow = np.asarray(_rule(rule)(win), dtype=bool)
    return GridColoring(N, r, yellow, seed, delta, None)
