"""Random Beltrami coefficients and a periodic Fourier solver.

The solver looks for ``w = z + c conj(z) + f`` with ``f`` periodic on a
square supercell.  Writing ``g = dbar w`` the Beltrami equation becomes the
fixed point ``g = mu (1 + S g)``, where ``S`` is the discrete Beurling
transform; its contraction factor is ``sup |mu|``.  The mean of ``g`` is
the affine coefficient ``c`` and the rest is integrated by the discrete
Cauchy transform.  Derivatives are spectral, so ``S`` has the unimodular
symbol conj(xi) / xi, and the reported residual is the residual of the
discrete equation.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .geom import Domain, Rect
from .modulus import image_quadrilateral, modulus_quadrilateral
from .packing import AffineMap

K_MAX = 0.99


class SolverError(RuntimeError):
    """The fixed-point iteration did not reach the tolerance."""

    def __init__(self, msg, residual):
        super().__init__(msg)
        self.residual = residual


# --------------------------------------------------------------------------
# dilatation laws and fields
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DilatationLaw:
    """Probability law on the open unit disk.

    kinds: ``point_mass(mu0)``, ``two_point(mu1, mu2, p)`` (mu1 with
    probability p), ``uniform_disk(k_max)`` (uniform by area), and
    ``radial(profile)`` (modulus ``profile(U)`` for uniform U, independent
    uniform argument).
    """
    kind: str
    params: tuple = ()

    @classmethod
    def point_mass(cls, mu0):
        return cls("point_mass", (complex(mu0),))

    @classmethod
    def two_point(cls, mu1, mu2, p=0.5):
        if not 0 <= p <= 1:
            raise ValueError("p must lie in [0, 1]")
        return cls("two_point", (complex(mu1), complex(mu2), float(p)))

    @classmethod
    def uniform_disk(cls, k_max):
        if not 0 <= k_max < 1:
            raise ValueError("k_max must lie in [0, 1)")
        return cls("uniform_disk", (float(k_max),))

    @classmethod
    def radial(cls, profile):
        return cls("radial", (profile,))

    def __post_init__(self):
        if self.kind not in ("point_mass", "two_point", "uniform_disk", "radial"):
            raise ValueError(f"unknown law {self.kind!r}")
        if self.kind in ("point_mass", "two_point"):
            vals = self.params[:1] if self.kind == "point_mass" else self.params[:2]
            if any(abs(v) >= 1 for v in vals):
                raise ValueError("dilatation values must lie in the open unit disk")

    def sample(self, rng, size) -> np.ndarray:
        if self.kind == "point_mass":
            return np.full(size, self.params[0], dtype=complex)
        if self.kind == "two_point":
            mu1, mu2, p = self.params
            return np.where(rng.random(size) < p, mu1, mu2).astype(complex)
        if self.kind == "uniform_disk":
            rad = self.params[0] * np.sqrt(rng.random(size))
        else:
            rad = np.asarray(self.params[0](rng.random(size)), dtype=float)
        return rad * np.exp(2j * np.pi * rng.random(size))

    def to_dict(self):
        if self.kind == "radial":
            raise ValueError("radial laws with a callable profile are not serializable")
        vals = []
        for v in self.params:
            vals.append([v.real, v.imag] if isinstance(v, complex) else v)
        return {"kind": self.kind, "params": vals}

    @classmethod
    def from_dict(cls, d):
        kind = d["kind"]
        p = d.get("params", [])
        if kind == "point_mass":
            return cls.point_mass(complex(*p[0]) if isinstance(p[0], list) else p[0])
        if kind == "two_point":
            c = [complex(*v) if isinstance(v, list) else v for v in p[:2]]
            return cls.two_point(c[0], c[1], p[2] if len(p) > 2 else 0.5)
        if kind == "uniform_disk":
            return cls.uniform_disk(p[0])
        raise ValueError(f"law {kind!r} cannot be built from a config")


@dataclass
class BeltramiField:
    """Piecewise-constant coefficient on the cells of the delta-grid.

    ``values[i, j]`` lives on ``[x0 + i delta, x0 + (i+1) delta) x
    [y0 + j delta, y0 + (j+1) delta)``; ``mu0`` applies everywhere else.
    """
    delta: float
    origin: tuple
    values: np.ndarray
    mu0: complex = 0j
    metadata: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.values.shape

    @property
    def extent(self):
        x0, y0 = self.origin
        nx, ny = self.values.shape
        return (x0, y0, x0 + nx * self.delta, y0 + ny * self.delta)

    def __call__(self, pts) -> np.ndarray:
        """Coefficient at points given as complex numbers or (n, 2) arrays."""
        pts = np.asarray(pts)
        if np.iscomplexobj(pts):
            x, y = pts.real, pts.imag
        else:
            x, y = pts[..., 0], pts[..., 1]
        i = np.floor((x - self.origin[0]) / self.delta).astype(np.int64)
        j = np.floor((y - self.origin[1]) / self.delta).astype(np.int64)
        nx, ny = self.values.shape
        inside = (i >= 0) & (i < nx) & (j >= 0) & (j < ny)
        out = np.full(np.shape(x), self.mu0, dtype=complex)
        out[inside] = self.values[i[inside], j[inside]]
        return out

    @property
    def sup(self) -> float:
        return float(max(np.abs(self.values).max(initial=0.0), abs(self.mu0)))


def _cells_inside(domain: Domain, x, y, delta):
    """Cells with lower-left corners (x, y) whose closure lies in the open domain."""
    c = np.stack([np.stack([x, y], -1), np.stack([x + delta, y], -1),
                  np.stack([x + delta, y + delta], -1), np.stack([x, y + delta], -1)], axis=-2)
    flat = c.reshape(-1, 2)
    tol = 1e-12 * delta
    ok = domain.contains(flat) & (domain.distance_to_boundary(flat) > tol)
    ok = ok.reshape(c.shape[:-1]).all(axis=-1)
    if domain.kind == "polygon":
        for vx, vy in domain.vertices:
            ok &= ~((vx >= x) & (vx <= x + delta) & (vy >= y) & (vy <= y + delta))
    return ok


def sample_field(law: DilatationLaw, delta: float, domain: Domain, mu0=0j, seed=None) -> BeltramiField:
    """iid cell values on the delta-cells compactly inside ``domain``, ``mu0``
    on the remaining cells of the covering grid."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    if abs(mu0) >= 1:
        raise ValueError("|mu0| must be < 1")
    x0, y0, x1, y1 = domain.bbox
    i0, j0 = math.floor(x0 / delta + 1e-9), math.floor(y0 / delta + 1e-9)
    i1, j1 = math.ceil(x1 / delta - 1e-9), math.ceil(y1 / delta - 1e-9)
    xs = (np.arange(i0, i1)) * delta
    ys = (np.arange(j0, j1)) * delta
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    inside = _cells_inside(domain, X, Y, delta)
    rng = np.random.default_rng(seed)
    draws = law.sample(rng, X.shape)
    vals = np.where(inside, draws, complex(mu0))
    return BeltramiField(delta, (i0 * delta, j0 * delta), vals, complex(mu0),
                         {"law": law.kind, "seed": seed, "cells_sampled": int(inside.sum())})


def strips_field(delta: float, k: float, width_extent: float) -> BeltramiField:
    """Vertical strips of width delta on [-E, E]^2: +k on [i delta, (i+1)
    delta) for even i, -k for odd i.  ``E`` is rounded up to a multiple of
    2 delta so that the pattern is periodic on the square."""
    if not 0 <= k < 1:
        raise ValueError("k must lie in [0, 1)")
    m = math.ceil(width_extent / (2 * delta) - 1e-9)
    i = np.arange(-2 * m, 2 * m)
    col = np.where(i % 2 == 0, k, -k).astype(complex)
    vals = np.repeat(col[:, None], 4 * m, axis=1)
    return BeltramiField(delta, (-2 * m * delta, -2 * m * delta), vals, 0j,
                         {"law": "strips", "k": k})


def affine_for_constant(mu) -> AffineMap:
    """(z + mu conj(z)) / (1 + mu): dilatation mu, fixes 0 and 1."""
    mu = complex(mu)
    if abs(mu) >= 1:
        raise ValueError("|mu| must be < 1")
    return AffineMap(1 / (1 + mu), mu / (1 + mu), 0j)


# --------------------------------------------------------------------------
# solver
# --------------------------------------------------------------------------

@dataclass
class DiscreteMap:
    """Normalized solution ``w = (z + c conj(z) + f(z) - shift) / scale``
    sampled at pixel centres; ``f`` is periodic with period ``n h``.

    Evaluation between nodes is bilinear in ``f``.
    """
    h: float
    x0: float
    n: int
    f: np.ndarray
    c: complex
    shift: complex
    scale: complex
    residual: float
    iterations: int
    metadata: dict = field(default_factory=dict)

    @property
    def nodes(self) -> np.ndarray:
        t = self.x0 + (np.arange(self.n) + 0.5) * self.h
        X, Y = np.meshgrid(t, t, indexing="ij")
        return X + 1j * Y

    @property
    def values(self) -> np.ndarray:
        z = self.nodes
        return (z + self.c * np.conj(z) + self.f - self.shift) / self.scale

    def _raw(self, z):
        z = np.asarray(z, dtype=complex)
        u = (z.real - self.x0) / self.h - 0.5
        v = (z.imag - self.x0) / self.h - 0.5
        i0 = np.floor(u).astype(np.int64)
        j0 = np.floor(v).astype(np.int64)
        a, b = u - i0, v - j0
        n = self.n
        i0m, j0m, i1m, j1m = i0 % n, j0 % n, (i0 + 1) % n, (j0 + 1) % n
        F = self.f
        fz = ((1 - a) * (1 - b) * F[i0m, j0m] + a * (1 - b) * F[i1m, j0m]
              + (1 - a) * b * F[i0m, j1m] + a * b * F[i1m, j1m])
        return z + self.c * np.conj(z) + fz

    def __call__(self, z):
        """Evaluate at complex points (or an (n, 2) real array)."""
        z = np.asarray(z)
        if not np.iscomplexobj(z) and z.ndim >= 1 and z.shape[-1] == 2:
            w = self(z[..., 0] + 1j * z[..., 1])
            return np.stack([w.real, w.imag], -1)
        return (self._raw(z) - self.shift) / self.scale

    def jacobian_signs(self) -> np.ndarray:
        """Signed area of the image of each node quad (two triangles);
        nonpositive entries flag orientation failures."""
        w = self.values
        a, b, c, d = w[:-1, :-1], w[1:, :-1], w[1:, 1:], w[:-1, 1:]

        def area(p, q, r):
            return 0.5 * ((q - p).real * (r - p).imag - (q - p).imag * (r - p).real)
        return np.minimum(area(a, b, c), area(a, c, d))


def _symbols(n, h):
    k = 2 * np.pi * np.fft.fftfreq(n, d=h)
    sx, sy = np.meshgrid(k, k, indexing="ij")
    dbar = 0.5 * (1j * sx - sy)         # spectral d/dzbar
    dz = 0.5 * (1j * sx + sy)           # spectral d/dz
    zero = np.abs(dbar) < 1e-12 / h
    with np.errstate(divide="ignore", invalid="ignore"):
        S = np.where(zero, 0, dz / dbar)
        C = np.where(zero, 0, 1 / dbar)
    return S, C, dbar, dz


def solve_beltrami(field: BeltramiField, resolution: float, tolerance: float = 1e-10,
                   extent: float | None = None, n: int | None = None, max_iterations: int = 5000,
                   k_max: float = K_MAX) -> DiscreteMap:
    """Solve dbar w = mu d w on a periodic supercell and normalize w(0) = 0,
    w(1) = 1.

    The supercell is ``[x0, x0 + n h)^2`` with ``x0 = -(n // 2) h``, so pixel
    edges lie on multiples of ``h = resolution``.  Give either ``n`` or the
    half-width ``extent`` (default: twice the field's half-width, so the
    field occupies the central quarter).
    """
    h = float(resolution)
    if n is None:
        if extent is None:
            x0f, y0f, x1f, y1f = field.extent
            extent = 2 * max(abs(x0f), abs(x1f), abs(y0f), abs(y1f))
        n = int(round(2 * extent / h))
        n += 1 - n % 2      # odd: no unpaired Nyquist mode
    if n < 8:
        raise ValueError("supercell needs at least 8 pixels per side")
    x0 = -(n // 2) * h
    t = x0 + (np.arange(n) + 0.5) * h
    X, Y = np.meshgrid(t, t, indexing="ij")
    mu = field(X + 1j * Y)
    meta = {"n": n, "h": h, "extent": n * h / 2}
    k = np.abs(mu)
    if k.max(initial=0) >= k_max:
        over = k >= k_max
        mu = np.where(over, mu / np.where(over, k, 1) * k_max, mu)
        msg = f"{int(over.sum())} pixels with |mu| >= {k_max} truncated"
        meta["warning"] = msg
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    S, C, dbar, dz = _symbols(n, h)
    g = mu.copy()
    it = 0
    diff = math.inf
    if np.any(mu != 0):
        while it < max_iterations:
            g_new = mu * (1 + np.fft.ifft2(S * np.fft.fft2(g)))
            diff = float(np.max(np.abs(g_new - g)))
            g = g_new
            it += 1
            if diff <= tolerance:
                break
        else:
            raise SolverError(f"no convergence in {max_iterations} iterations (last step {diff:.3e})",
                              diff)
    G = np.fft.fft2(g)
    c = G[0, 0] / (n * n)
    F = C * G
    F[0, 0] = 0
    f = np.fft.ifft2(F)
    # residual of the discrete equation, derivatives recomputed from f
    wbar = c + np.fft.ifft2(dbar * F)
    wz = 1 + np.fft.ifft2(dz * F)
    residual = float(np.max(np.abs(wbar - mu * wz)))
    meta["tolerance"] = tolerance
    m = DiscreteMap(h, x0, n, f, complex(c), 0j, 1 + 0j, residual, it, meta)
    w0, w1 = m._raw(np.array([0j, 1 + 0j]))
    m.shift, m.scale = complex(w0), complex(w1 - w0)
    return m


# --------------------------------------------------------------------------
# affine fitting and statistics
# --------------------------------------------------------------------------

def _grid(K, samples):
    x0, y0, x1, y1 = K
    X, Y = np.meshgrid(np.linspace(x0, x1, samples), np.linspace(y0, y1, samples), indexing="ij")
    return (X + 1j * Y).ravel()


def fit_affine(m, K=(-1.0, -1.0, 1.0, 1.0), samples=65) -> AffineMap:
    """Least-squares z -> a z + b conj(z) + c over a uniform grid on K."""
    z = _grid(K, samples)
    w = m(z)
    A = np.column_stack([z, np.conj(z), np.ones_like(z)])
    coef, *_ = np.linalg.lstsq(A, w, rcond=None)
    return AffineMap(complex(coef[0]), complex(coef[1]), complex(coef[2]))


def sup_distance(m, ref, K=(-1.0, -1.0, 1.0, 1.0), samples=129) -> float:
    """max over a uniform grid on K of |m(z) - ref(z)|."""
    z = _grid(K, samples)
    return float(np.max(np.abs(m(z) - ref(z))))


def stretch_ratio(A: AffineMap) -> float:
    """Horizontal over vertical stretch |A(1) - A(0)| / |A(i) - A(0)|."""
    return abs(A.a + A.b) / abs(A.a - A.b)


@dataclass
class AffineEstimate:
    mean: AffineMap
    fits: list
    dispersion: float
    mu_lambda: complex
    flagged: bool


def estimate_A_lambda(law: DilatationLaw, delta: float, domain: Domain, trials: int, seed,
                      K=(-1.0, -1.0, 1.0, 1.0), pixels_per_cell: int = 4, extent: float | None = None,
                      tolerance: float = 1e-8, dispersion_threshold: float = 0.05) -> AffineEstimate:
    """Trial-averaged least-squares affine fit of w^mu on K."""
    fits = []
    ss = np.random.SeedSequence(seed)
    for t in range(trials):
        child = np.random.SeedSequence(ss.entropy, spawn_key=(t,))
        fld = sample_field(law, delta, domain, seed=child)
        m = solve_beltrami(fld, delta / pixels_per_cell, tolerance, extent=extent)
        fits.append(fit_affine(m, K))
    coef = np.array([[f.a, f.b, f.c] for f in fits])
    mean = coef.mean(axis=0)
    disp = float(np.max(np.abs(coef - mean).max(axis=0))) if trials > 1 else 0.0
    A = AffineMap(complex(mean[0]), complex(mean[1]), complex(mean[2]))
    return AffineEstimate(A, fits, disp, A.mu, disp > dispersion_threshold)


@dataclass
class KstarEstimate:
    theta: np.ndarray
    moduli: np.ndarray           # (len(theta), trials)
    quantiles: dict

    def stderr(self):
        return self.moduli.std(axis=1, ddof=1) / math.sqrt(self.moduli.shape[1])


def estimate_Kstar(law: DilatationLaw, theta, square: Rect, delta: float, trials: int, seed,
                   domain: Domain | None = None, pixels_per_cell: int = 4, extent: float | None = None,
                   tolerance: float = 1e-8, mesh: float = 1 / 16, per_side: int = 24) -> KstarEstimate:
    """Empirical distribution of Mod w^mu(S_theta) over random fields.

    ``S_theta`` is ``square`` rotated by ``theta`` about its centre; the
    modulus is that of the family joining the sides that are horizontal at
    ``theta = 0``, so a horizontal stretch by K gives modulus K.  Returns
    per-theta quantiles (0.5, 0.9, 0.95, 1).
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if domain is None:
        r = 0.5 * math.hypot(square.width, square.height) + 2 * delta
        cx, cy = square.center
        domain = Domain.rectangle((cx - r, cy - r), 2 * r, 2 * r)
    ss = np.random.SeedSequence(seed)
    mods = np.empty((len(theta), trials))
    for t in range(trials):
        child = np.random.SeedSequence(ss.entropy, spawn_key=(t,))
        fld = sample_field(law, delta, domain, seed=child)
        m = solve_beltrami(fld, delta / pixels_per_cell, tolerance, extent=extent)
        for i, th in enumerate(theta):
            rect = Rect(square.center, square.width, square.height, square.angle + th)
            q = image_quadrilateral(m, rect, per_side, marked=0)
            mods[i, t] = modulus_quadrilateral(q, mesh).value
    qs = {p: np.quantile(mods, p, axis=1) for p in (0.5, 0.9, 0.95, 1.0)}
    return KstarEstimate(theta, mods, qs)
