"""Seeded experiments with JSON configs and pass/fail reports.

Every experiment has a default config; user configs may override any key
but unknown keys are rejected.  Pass/fail thresholds live under the
``thresholds`` key.  Trial ``i`` of a run with seed ``s`` draws its
randomness from ``SeedSequence(s, spawn_key=(stage, i))``, so a trial's
result does not depend on which other trials ran or in which order.
"""
from __future__ import annotations

import copy
import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from . import beltrami as bel
from . import geom
from . import packing as pk
from . import percolation as perc
from ._backend import NAME as BACKEND
from .fem import point_in_polygon
from .modulus import image_quadrilateral, modulus_quadrilateral, rough_qc_test


class ConfigError(ValueError):
    pass


def derive_seed(seed: int, *keys: int) -> int:
    """64-bit seed for the stream identified by ``keys``."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0])


# --------------------------------------------------------------------------
# configs
# --------------------------------------------------------------------------

DEFAULTS = {
    "rqc-homogenize": {
        "seed": 0,
        "workers": 1,
        "law": {"kind": "two_point", "params": [1 / 3, -1 / 3, 0.5]},
        "reference": "identity",          # identity | constant | strips | fit
        "strips_k": 1 / 3,
        "deltas": [1 / 8, 1 / 16, 1 / 32],
        "trials": 20,
        "K": [-1.0, -1.0, 1.0, 1.0],
        "domain_half_width": 2.0,
        "extent": 2.0,
        "pixels_per_cell": 4,
        "tolerance": 1e-8,
        "max_iterations": 5000,
        "k_max": 0.99,
        "epsilon": 0.1,
        "thresholds": {"median_strictly_decreasing": True, "final_median_max": 0.05,
                       "residual_over_tolerance_max": 10.0},
    },
    "delaunay-pack": {
        "seed": 0,
        "workers": 1,
        "intensities": [500, 2000, 8000],
        "trials": 20,
        "z1": [0.3, 0.0],
        "z2": [-0.2, 0.1],
        "K_radius": 0.7,
        "fixed_n": False,
        "max_retries": 5,
        "tolerance": 1e-10,
        "thresholds": {"decay_factor_min": 1.5, "final_median_max": 0.08},
    },
    "heschramm-locality": {
        "seed": 0,
        "workers": 1,
        "intensities": [1000, 4000],
        "repetitions": 10,
        "resamplings": 10,
        "center": [0.0, 0.0],
        "S_side": 0.3,
        "S_tilde_side": 0.4,
        "mesh": 1 / 16,
        "per_side": 24,
        "thresholds": {"local_below_full": True, "local_spread_decreasing": True},
    },
    "boundary-coverage": {
        "seed": 0,
        "workers": 1,
        "intensities": [2000, 8000],
        "trials": 20,
        "thresholds": {"coverage_min": 0.9, "coverage_fraction_min": 0.9,
                       "median_nondecreasing": True, "single_triangle_tolerance": 1e-10},
    },
    "modulus-distortion": {
        "seed": 0,
        "workers": 1,
        "intensities": [4000],
        "trials": 20,
        "epsilon": 0.2,
        "rectangles": 8,
        "rect_domain_radius": 0.75,
        "max_side": 0.6,
        "structured": False,
        "mesh": 1 / 16,
        "per_side": 16,
        "cell_C": 3,
        "thresholds": {"finite_fraction_min": 1.0, "yellow_fraction_max": 0.05},
    },
    "percolation-bound": {
        "seed": 0,
        "workers": 1,
        "N": 100,
        "r": 0.01,
        "trials": 200,
        "theta": 0.9,
        "pairs_per_trial": 20,
        "deep": {"N": 200, "r": 0.005, "m": 5, "trials": 40, "min_length_factor": 0.5},
        "thresholds": {"success_fraction_min": 0.99, "deep_crossing_fraction_min": 0.95},
    },
}

EXPERIMENTS = tuple(DEFAULTS)


def _merge(base, over, path):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"unknown config key {path + k!r}")
        if isinstance(base[k], dict) and k != "law":
            if not isinstance(v, dict):
                raise ConfigError(f"config key {path + k!r} must be an object")
            out[k] = _merge(base[k], v, path + k + ".")
        else:
            _check_type(base[k], v, path + k)
            out[k] = v
    return out


def _check_type(default, v, key):
    """Overrides keep the type of the default; thresholds may be null to
    disable a check."""
    if v is None and key.startswith("thresholds."):
        return
    if isinstance(default, bool):
        ok = isinstance(v, bool)
    elif isinstance(default, int):
        ok = isinstance(v, int) and not isinstance(v, bool)
    elif isinstance(default, float):
        ok = isinstance(v, (int, float)) and not isinstance(v, bool)
    elif isinstance(default, list):
        ok = isinstance(v, list)
    else:
        ok = isinstance(v, type(default))
    if not ok:
        raise ConfigError(f"config key {key!r} must be {type(default).__name__}, got {v!r}")


def make_config(name: str, overrides: dict | None = None) -> dict:
    if name not in DEFAULTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    overrides = dict(overrides or {})
    other = overrides.pop("experiment", name)
    if other != name:
        raise ConfigError(f"config is for experiment {other!r}, not {name!r}")
    cfg = _merge(DEFAULTS[name], overrides, "")
    if cfg["seed"] < 0 or cfg["workers"] < 1:
        raise ConfigError("seed must be >= 0 and workers >= 1")
    if name == "rqc-homogenize":
        if cfg["reference"] not in ("identity", "constant", "strips", "fit"):
            raise ConfigError(f"unknown reference {cfg['reference']!r}")
        try:
            bel.DilatationLaw.from_dict(cfg["law"])
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ConfigError(f"bad law: {exc}") from None
    return cfg


def load_config(name: str, path: str | None) -> dict:
    if path is None:
        return make_config(name)
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return make_config(name, data)


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------

@dataclass
class Check:
    name: str
    value: float | bool
    threshold: float | bool | None
    passed: bool


@dataclass
class Report:
    experiment: str
    config: dict
    trials: list
    summary: dict
    checks: list
    provenance: dict
    artifacts: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return _plain(d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        lines = [f"experiment: {self.experiment}",
                 f"seed: {self.config.get('seed')}  version: {self.provenance['version']}"
                 f"  backend: {self.provenance['backend']}", "summary:"]
        for k, v in self.summary.items():
            lines.append(f"  {k}: {_fmt(v)}")
        lines.append("checks:")
        for c in self.checks:
            lines.append(f"  [{'PASS' if c.passed else 'FAIL'}] {c.name}: {_fmt(c.value)}"
                         + ("" if c.threshold is None else f" (threshold {_fmt(c.threshold)})"))
        lines.append(f"result: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, dict):
        return "{" + ", ".join(f"{k}: {_fmt(x)}" for k, x in v.items()) + "}"
    if isinstance(v, list):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _provenance(cfg):
    return {"seed": cfg["seed"], "version": __version__, "backend": BACKEND,
            "seed_scheme": "SeedSequence(seed, spawn_key=(stage, trial))"}


def _quantiles(x):
    x = np.asarray(x, dtype=float)
    if len(x) == 0:
        return {}
    return {"median": float(np.median(x)), "q10": float(np.quantile(x, 0.1)),
            "q90": float(np.quantile(x, 0.9)), "min": float(x.min()), "max": float(x.max())}


def _threshold(cfg, key):
    return cfg["thresholds"].get(key)


def _map_trials(fn, cfg, keys):
    """``[fn(cfg, *k) for k in keys]``, in a process pool when
    ``cfg["workers"] > 1``.  Results come back in key order."""
    workers = int(cfg.get("workers", 1))
    if workers <= 1 or len(keys) <= 1:
        return [fn(cfg, *k) for k in keys]
    from concurrent.futures import ProcessPoolExecutor
    with ProcessPoolExecutor(workers) as ex:
        return list(ex.map(fn, [cfg] * len(keys), *zip(*keys)))


# --------------------------------------------------------------------------
# random quasiconformal homogenization
# --------------------------------------------------------------------------

SUP_SAMPLES = 129


def _strips_reference(k):
    s = 0.5 * ((1 + k) / (1 - k) + (1 - k) / (1 + k))
    return pk.AffineMap(0.5 * (1 + 1 / s), 0.5 * (1 - 1 / s), 0j)


def _rqc_solve(cfg, di, t):
    delta = cfg["deltas"][di]
    h = delta / cfg["pixels_per_cell"]
    if cfg["reference"] == "strips":
        fld = bel.strips_field(delta, cfg["strips_k"], cfg["extent"])
        E = -fld.origin[0]
        return bel.solve_beltrami(fld, h, cfg["tolerance"], n=int(round(2 * E / h)),
                                  max_iterations=cfg["max_iterations"], k_max=cfg["k_max"])
    law = bel.DilatationLaw.from_dict(cfg["law"])
    half = cfg["domain_half_width"]
    dom = geom.Domain.rectangle((-half, -half), 2 * half, 2 * half)
    fld = bel.sample_field(law, delta, dom, seed=derive_seed(cfg["seed"], di, t))
    return bel.solve_beltrami(fld, h, cfg["tolerance"], extent=cfg["extent"],
                              max_iterations=cfg["max_iterations"], k_max=cfg["k_max"])


def _rqc_trial(cfg, di, t):
    m = _rqc_solve(cfg, di, t)
    K = tuple(cfg["K"])
    return {"w": m(bel._grid(K, SUP_SAMPLES)), "fit": bel.fit_affine(m, K), "residual": m.residual,
            "iterations": m.iterations}


def _rqc_reference(cfg, fits):
    ref = cfg["reference"]
    if ref == "identity":
        return lambda z: np.asarray(z)
    if ref == "constant":
        law = bel.DilatationLaw.from_dict(cfg["law"])
        if law.kind != "point_mass":
            raise ConfigError("reference 'constant' needs a point_mass law")
        return bel.affine_for_constant(law.params[0])
    if ref == "strips":
        return _strips_reference(cfg["strips_k"])
    if ref == "fit":
        coef = np.mean([[f.a, f.b, f.c] for f in fits], axis=0)
        return pk.AffineMap(complex(coef[0]), complex(coef[1]), complex(coef[2]))
    raise ConfigError(f"unknown reference {ref!r}")


def run_rqc_homogenize(cfg, render_dir=None) -> Report:
    """Sup-distance on K between the solved map and the reference affine
    map, per delta.  The strips field is deterministic and runs once."""
    if cfg["reference"] not in ("identity", "constant", "strips", "fit"):
        raise ConfigError(f"unknown reference {cfg['reference']!r}")
    zK = bel._grid(tuple(cfg["K"]), SUP_SAMPLES)
    ntr = 1 if cfg["reference"] == "strips" else cfg["trials"]
    trials, medians, per = [], [], {}
    residual_ratio = 0.0
    for di, delta in enumerate(cfg["deltas"]):
        res = _map_trials(_rqc_trial, cfg, [(di, t) for t in range(ntr)])
        fits = [r["fit"] for r in res]
        ref = _rqc_reference(cfg, fits)
        errs = []
        for t, r in enumerate(res):
            e = float(np.max(np.abs(r["w"] - ref(zK))))
            errs.append(e)
            residual_ratio = max(residual_ratio, r["residual"] / cfg["tolerance"])
            trials.append({"delta": delta, "trial": t, "sup_distance": e, "residual": r["residual"],
                           "iterations": r["iterations"], "fit_mu": complex(r["fit"].mu),
                           "fit_stretch": bel.stretch_ratio(r["fit"])})
        medians.append(float(np.median(errs)))
        per[str(delta)] = {**_quantiles(errs),
                           "p_close": float(np.mean(np.asarray(errs) <= cfg["epsilon"])),
                           "mean_fit_stretch": float(np.mean([bel.stretch_ratio(f) for f in fits]))}
    checks = []
    if _threshold(cfg, "median_strictly_decreasing"):
        ok = all(b < a for a, b in zip(medians, medians[1:]))
        checks.append(Check("median sup-distance strictly decreasing in delta", ok, True, ok))
    v = _threshold(cfg, "final_median_max")
    if v is not None:
        checks.append(Check("median sup-distance at the smallest delta", medians[-1], v, medians[-1] <= v))
    v = _threshold(cfg, "residual_over_tolerance_max")
    if v is not None:
        checks.append(Check("max solver residual / tolerance", residual_ratio, v, residual_ratio <= v))
    summary = {"medians": medians, "per_delta": per, "reference": cfg["reference"]}
    if cfg["reference"] == "strips":
        summary["target_stretch"] = bel.stretch_ratio(_strips_reference(cfg["strips_k"]))
    rep = Report("rqc-homogenize", cfg, trials, summary, checks, _provenance(cfg))
    if render_dir:
        from .svg import render_svg
        m = _rqc_solve(cfg, len(cfg["deltas"]) - 1, 0)
        rep.artifacts["map"] = render_svg(m, os.path.join(render_dir, "rqc_map.svg"), box=tuple(cfg["K"]))
    return rep


# --------------------------------------------------------------------------
# circle packings of random Delaunay triangulations
# --------------------------------------------------------------------------

def disk_automorphism(z1: complex, z2: complex):
    """The automorphism phi of the unit disk with phi(z1) = 0 and
    phi(z2) in (0, 1)."""
    a = complex(z1)
    w2 = (z2 - a) / (1 - a.conjugate() * z2)
    theta = -float(np.angle(w2))
    return lambda z: pk.mobius(a, theta, np.asarray(z, dtype=complex))


def disk_triangulation(points) -> geom.Triangulation:
    """Delaunay triangulation of ``points`` clipped to the unit disk.

    Raises GeometryError unless the clipped complex is a closed disk with
    at least one interior vertex.
    """
    t = geom.clip_to_domain(geom.delaunay(points), geom.Domain.disk())
    if not t.is_disk or not np.any(~t.boundary_flags):
        raise geom.GeometryError("clipped complex is not a closed disk with interior vertices")
    return t


def random_disk_triangulation(intensity, seed, fixed_n=False, max_retries=5):
    """Poisson sample on the unit disk, Delaunay, clip.  Attempt ``k > 0``
    uses ``derive_seed(seed, k)``.  Returns ``(triangulation, retries)``."""
    dom = geom.Domain.disk()
    for attempt in range(max_retries + 1):
        s = seed if attempt == 0 else derive_seed(seed, attempt)
        try:
            return disk_triangulation(geom.sample_poisson(dom, intensity, s, fixed_n=fixed_n).points), attempt
        except geom.GeometryError:
            continue
    raise geom.GeometryError(f"no disk triangulation after {max_retries} retries")


def normalized_packing(t, z1, z2, tolerance=1e-10):
    """Maximal packing normalized at the vertices nearest to z1 and z2."""
    p = pk.max_circle_packing(t, tolerance=tolerance)
    v1 = geom.nearest_vertex(t, (z1.real, z1.imag))
    v2 = geom.nearest_vertex(t, (z2.real, z2.imag))
    return pk.normalize_packing(p, v1, v2)


def disk_samples(radius, nr=40, nt=96):
    """Polar sample of the closed disk of the given radius (boundary included)."""
    r = radius * np.sqrt(np.linspace(0, 1, nr))
    th = 2 * np.pi * np.arange(nt) / nt
    return np.concatenate([[0j], (r[1:, None] * np.exp(1j * th[None])).ravel()])


def _pack_trial(cfg, li, t):
    z1, z2 = complex(*cfg["z1"]), complex(*cfg["z2"])
    K = disk_samples(cfg["K_radius"])
    ref = disk_automorphism(z1, z2)(K)
    seed = derive_seed(cfg["seed"], li, t)
    retries = 0
    while True:
        tri, r0 = random_disk_triangulation(cfg["intensities"][li], seed, cfg["fixed_n"], cfg["max_retries"])
        retries += r0
        p = normalized_packing(tri, z1, z2, cfg["tolerance"])
        try:
            err = float(np.max(np.abs(pk.packing_map(tri, p)(K) - ref)))
            break
        except pk.OutOfCarrier:
            # K is not inside the carrier: counted as a retry
            retries += 1
            if retries > cfg["max_retries"]:
                raise
            seed = derive_seed(seed, 1000 + retries)
    return {"intensity": cfg["intensities"][li], "trial": t, "sup_error": err,
            "vertices": tri.n_vertices, "retries": retries, "angle_residual": p.tolerance_achieved,
            "tangency_residual": p.tangency_residual}


def run_delaunay_pack(cfg, render_dir=None) -> Report:
    trials, medians, per = [], [], {}
    for li, lam in enumerate(cfg["intensities"]):
        res = _map_trials(_pack_trial, cfg, [(li, t) for t in range(cfg["trials"])])
        errs = [r["sup_error"] for r in res]
        trials.extend(res)
        medians.append(float(np.median(errs)))
        per[str(lam)] = {**_quantiles(errs), "retries": int(sum(r["retries"] for r in res))}
    checks = []
    v = _threshold(cfg, "decay_factor_min")
    if v is not None and len(medians) > 1:
        fac = medians[0] / medians[-1]
        checks.append(Check("median error decay factor, first to last intensity", fac, v, fac >= v))
    v = _threshold(cfg, "final_median_max")
    if v is not None:
        checks.append(Check("median sup error at the last intensity", medians[-1], v, medians[-1] <= v))
    rep = Report("delaunay-pack", cfg, trials, {"medians": medians, "per_intensity": per}, checks,
                 _provenance(cfg))
    if render_dir:
        from .svg import render_svg
        tri, _ = random_disk_triangulation(cfg["intensities"][0], derive_seed(cfg["seed"], 0, 0),
                                           cfg["fixed_n"], cfg["max_retries"])
        p = normalized_packing(tri, complex(*cfg["z1"]), complex(*cfg["z2"]), cfg["tolerance"])
        rep.artifacts["packing"] = render_svg(p, os.path.join(render_dir, "packing.svg"))
        rep.artifacts["triangulation"] = render_svg(tri, os.path.join(render_dir, "triangulation.svg"))
    return rep


# --------------------------------------------------------------------------
# locality of the packing modulus
# --------------------------------------------------------------------------

def square_image_modulus(points, square: geom.Rect, mesh=1 / 16, per_side=24) -> float:
    """Modulus of phi_P(square) for the packing map of the clipped Delaunay
    triangulation of ``points`` (sides 1 and 3 of the square marked)."""
    tri = disk_triangulation(points)
    p = normalized_packing(tri, 0j, 0.5 + 0j)
    q = image_quadrilateral(pk.packing_map(tri, p), square, per_side, marked=1)
    return modulus_quadrilateral(q, mesh).value


def _locality_repetition(cfg, li, rep_i):
    lam = cfg["intensities"][li]
    dom = geom.Domain.disk()
    S = geom.Rect(tuple(cfg["center"]), cfg["S_side"], cfg["S_side"])
    St = geom.Rect(tuple(cfg["center"]), cfg["S_tilde_side"], cfg["S_tilde_side"])
    base = geom.sample_poisson(dom, lam, derive_seed(cfg["seed"], li, rep_i, 0)).points
    inside = base[St.contains(base)]
    local, full = [], []
    for j in range(cfg["resamplings"]):
        fresh = geom.sample_poisson(dom, lam, derive_seed(cfg["seed"], li, rep_i, 1, j)).points
        pts = np.concatenate([inside, fresh[~St.contains(fresh)]])
        local.append(square_image_modulus(pts, S, cfg["mesh"], cfg["per_side"]))
        other = geom.sample_poisson(dom, lam, derive_seed(cfg["seed"], li, rep_i, 2, j)).points
        full.append(square_image_modulus(other, S, cfg["mesh"], cfg["per_side"]))
    return {"intensity": lam, "repetition": rep_i, "local_spread": float(np.ptp(local)),
            "full_spread": float(np.ptp(full)), "local_moduli": local, "full_moduli": full}


def run_heschramm_locality(cfg, render_dir=None) -> Report:
    """Spread (max - min) of Mod phi_P(S) when only the points outside S~
    are resampled, against resampling everything."""
    trials, per = [], {}
    local_medians, full_medians = [], []
    for li, lam in enumerate(cfg["intensities"]):
        res = _map_trials(_locality_repetition, cfg, [(li, r) for r in range(cfg["repetitions"])])
        trials.extend(res)
        ls = [r["local_spread"] for r in res]
        fs = [r["full_spread"] for r in res]
        local_medians.append(float(np.median(ls)))
        full_medians.append(float(np.median(fs)))
        per[str(lam)] = {"local_spread": _quantiles(ls), "full_spread": _quantiles(fs)}
    checks = []
    if _threshold(cfg, "local_below_full"):
        for lam, a, b in zip(cfg["intensities"], local_medians, full_medians):
            checks.append(Check(f"median local spread below median full spread at intensity {lam}",
                                a, b, a < b))
    if _threshold(cfg, "local_spread_decreasing") and len(local_medians) > 1:
        ok = all(b < a for a, b in zip(local_medians, local_medians[1:]))
        checks.append(Check("median local spread decreasing in intensity", ok, True, ok))
    rep = Report("heschramm-locality", cfg, trials,
                 {"local_medians": local_medians, "full_medians": full_medians, "per_intensity": per},
                 checks, _provenance(cfg))
    if render_dir:
        from .svg import render_svg
        pts = geom.sample_poisson(geom.Domain.disk(), cfg["intensities"][-1],
                                  derive_seed(cfg["seed"], len(cfg["intensities"]) - 1, 0, 0)).points
        tri = disk_triangulation(pts)
        rep.artifacts["packing"] = render_svg(normalized_packing(tri, 0j, 0.5 + 0j),
                                              os.path.join(render_dir, "locality_packing.svg"))
    return rep


# --------------------------------------------------------------------------
# boundary coverage
# --------------------------------------------------------------------------

def _polygon_distance_to_origin(poly: np.ndarray) -> float:
    a = poly
    ab = np.roll(poly, -1, axis=0) - a
    s = np.clip(-np.einsum("ij,ij->i", a, ab) / np.einsum("ij,ij->i", ab, ab), 0, 1)
    return float(np.min(np.linalg.norm(a + s[:, None] * ab, axis=1)))


def coverage_radius(t: geom.Triangulation, p: pk.CirclePacking) -> float:
    """Radius of the largest disk about 0 inside the image of the carrier
    under the packing map (0 when 0 is not covered)."""
    poly = p.centers[t.boundary_cycle]
    if not point_in_polygon(np.zeros((1, 2)), poly)[0]:
        return 0.0
    return _polygon_distance_to_origin(poly)


def extended_coverage_radius(t: geom.Triangulation, p: pk.CirclePacking) -> float:
    """Coverage radius after adding, for each boundary edge vw, the region
    bounded by the centres of v and w and the points where their circles
    touch the unit circle.  The outer boundary is then the polygon through
    those touching points."""
    z = p.hcenters[t.boundary_cycle]
    return _polygon_distance_to_origin(np.column_stack([z.real, z.imag]))


def single_triangle_coverage():
    """(computed, exact) coverage radius of the one-triangle complex: three
    mutually tangent horocycles of radius r = 2 sqrt 3 - 3 whose centres lie
    at distance 1 - r from 0, so the centre triangle has inradius (1 - r)/2."""
    v = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3) / 2]])
    t = geom.Triangulation.from_triangles(v, np.array([[0, 1, 2]]))
    p = pk.max_circle_packing(t)
    r = 2 * math.sqrt(3) - 3
    return coverage_radius(t, p), (1 - r) / 2


def _coverage_trial(cfg, li, t):
    tri, retries = random_disk_triangulation(cfg["intensities"][li], derive_seed(cfg["seed"], li, t))
    p = normalized_packing(tri, 0j, 0.5 + 0j)
    return {"intensity": cfg["intensities"][li], "trial": t, "coverage_radius": coverage_radius(tri, p),
            "extended_coverage_radius": extended_coverage_radius(tri, p), "retries": retries}


def run_boundary_coverage(cfg, render_dir=None) -> Report:
    trials, med, per = [], [], {}
    cmin = _threshold(cfg, "coverage_min")
    for li, lam in enumerate(cfg["intensities"]):
        res = _map_trials(_coverage_trial, cfg, [(li, t) for t in range(cfg["trials"])])
        trials.extend(res)
        cov = np.array([r["coverage_radius"] for r in res])
        med.append(float(np.median(cov)))
        per[str(lam)] = {**_quantiles(cov),
                         "extended": _quantiles([r["extended_coverage_radius"] for r in res])}
        if cmin is not None:
            per[str(lam)]["fraction_at_least_min"] = float(np.mean(cov >= cmin))
    got, exact = single_triangle_coverage()
    checks = []
    v = _threshold(cfg, "coverage_fraction_min")
    if v is not None and cmin is not None:
        lam = cfg["intensities"][-1]
        frac = per[str(lam)]["fraction_at_least_min"]
        checks.append(Check(f"fraction of trials with coverage >= {cmin} at intensity {lam}", frac, v, frac >= v))
    if _threshold(cfg, "median_nondecreasing"):
        ok = all(b >= a for a, b in zip(med, med[1:]))
        checks.append(Check("median coverage non-decreasing in intensity", ok, True, ok))
    v = _threshold(cfg, "single_triangle_tolerance")
    if v is not None:
        checks.append(Check("single triangle coverage error", abs(got - exact), v, abs(got - exact) <= v))
    rep = Report("boundary-coverage", cfg, trials,
                 {"medians": med, "per_intensity": per, "single_triangle": {"computed": got, "exact": exact}},
                 checks, _provenance(cfg))
    if render_dir:
        from .svg import render_svg
        tri, _ = random_disk_triangulation(cfg["intensities"][0], derive_seed(cfg["seed"], 0, 0))
        rep.artifacts["packing"] = render_svg(normalized_packing(tri, 0j, 0.5 + 0j),
                                              os.path.join(render_dir, "coverage_packing.svg"))
    return rep


# --------------------------------------------------------------------------
# modulus distortion of packing maps
# --------------------------------------------------------------------------

def hex_lattice_disk(intensity: float) -> np.ndarray:
    """Triangular lattice with ``intensity`` points per unit area, centred at
    0 and clipped to the open unit disk."""
    s = math.sqrt(2 / (math.sqrt(3) * intensity))
    k = int(math.ceil(1 / s)) + 2
    i, j = np.meshgrid(np.arange(-k, k + 1), np.arange(-k, k + 1), indexing="ij")
    pts = np.column_stack([((i + 0.5 * j) * s).ravel(), (j * s * math.sqrt(3) / 2).ravel()])
    return pts[np.linalg.norm(pts, axis=1) < 1 - 1e-9]


def cell_count_yellow_fraction(points, domain: geom.Domain, intensity: float, C: float) -> float:
    """Fraction of grid cells of side C / sqrt(intensity) lying inside the
    domain whose point count falls outside [1, C^3]."""
    delta = C / math.sqrt(intensity)
    x0, y0, x1, y1 = domain.bbox
    i0, j0 = math.floor(x0 / delta), math.floor(y0 / delta)
    nx, ny = math.ceil(x1 / delta) - i0, math.ceil(y1 / delta) - j0
    X, Y = np.meshgrid((i0 + np.arange(nx)) * delta, (j0 + np.arange(ny)) * delta, indexing="ij")
    corners = np.stack([np.stack([X + a * delta, Y + b * delta], -1) for a in (0, 1) for b in (0, 1)], -2)
    inside = domain.contains(corners.reshape(-1, 2)).reshape(corners.shape[:-1]).all(-1)
    ii = np.floor(points[:, 0] / delta).astype(int) - i0
    jj = np.floor(points[:, 1] / delta).astype(int) - j0
    ok = (ii >= 0) & (ii < nx) & (jj >= 0) & (jj < ny)
    counts = np.zeros((nx, ny), dtype=int)
    np.add.at(counts, (ii[ok], jj[ok]), 1)
    c = counts[inside]
    if len(c) == 0:
        return 0.0
    return float(np.mean((c < 1) | (c > C ** 3)))


def _distortion_trial(cfg, li, t):
    lam = cfg["intensities"][li]
    seed = derive_seed(cfg["seed"], li, t)
    dom = geom.Domain.disk()
    pts = hex_lattice_disk(lam) if cfg["structured"] else geom.sample_poisson(dom, lam, seed).points
    tri = disk_triangulation(pts)
    f = pk.packing_map(tri, normalized_packing(tri, 0j, 0.5 + 0j))
    rq = rough_qc_test(f, geom.Domain.disk(radius=cfg["rect_domain_radius"]), cfg["epsilon"],
                       cfg["rectangles"], derive_seed(seed, 1), max_side=cfg["max_side"],
                       mesh=cfg["mesh"], per_side=cfg["per_side"])
    w = rq.witness
    return {"intensity": lam, "trial": t, "K": rq.K, "ratios": list(rq.ratios),
            "cell_yellow_fraction": cell_count_yellow_fraction(pts, dom, lam, cfg["cell_C"]),
            "witness": None if w is None else [list(w.center), w.width, w.height, w.angle]}


def run_modulus_distortion(cfg, render_dir=None) -> Report:
    """Rough quasiconformality of phi_P: the largest modulus distortion over
    sampled rectangles of side >= epsilon, per trial."""
    trials, per = [], {}
    finite, yellow = [], []
    ntr = 1 if cfg["structured"] else cfg["trials"]
    for li, lam in enumerate(cfg["intensities"]):
        res = _map_trials(_distortion_trial, cfg, [(li, t) for t in range(ntr)])
        trials.extend(res)
        Ks = np.array([r["K"] for r in res])
        finite.append(float(np.mean(np.isfinite(Ks))))
        yellow.append(max(r["cell_yellow_fraction"] for r in res))
        per[str(lam)] = {"K": _quantiles(Ks[np.isfinite(Ks)]), "finite_fraction": finite[-1],
                         "max_cell_yellow_fraction": yellow[-1]}
    checks = []
    v = _threshold(cfg, "finite_fraction_min")
    if v is not None:
        checks.append(Check("fraction of trials with finite K (worst intensity)", min(finite), v,
                            min(finite) >= v))
    v = _threshold(cfg, "yellow_fraction_max")
    if v is not None:
        checks.append(Check(f"cell-count yellow fraction at the last intensity (C = {cfg['cell_C']})",
                            yellow[-1], v, yellow[-1] <= v))
    rep = Report("modulus-distortion", cfg, trials, {"per_intensity": per}, checks, _provenance(cfg))
    if render_dir:
        from .svg import render_svg
        lam = cfg["intensities"][0]
        pts = hex_lattice_disk(lam) if cfg["structured"] else \
            geom.sample_poisson(geom.Domain.disk(), lam, derive_seed(cfg["seed"], 0, 0)).points
        tri = disk_triangulation(pts)
        rep.artifacts["packing"] = render_svg(normalized_packing(tri, 0j, 0.5 + 0j),
                                              os.path.join(render_dir, "distortion_packing.svg"))
    return rep


# --------------------------------------------------------------------------
# percolation
# --------------------------------------------------------------------------

def _deep_crossing(cfg, t):
    dp = cfg["deep"]
    N = dp["N"]
    s = derive_seed(cfg["seed"], 9, t)
    c = perc.color_grid(N, dp["r"], s)
    mask = perc.GridColoring(N, dp["r"], ~perc.deep_blue(c, dp["m"]), None, c.delta)
    rng = np.random.default_rng(derive_seed(s, 1))
    y = float(rng.integers(-N, N + 1)) + 0.5
    path = [(-N, y), (N + 1, y)] if rng.random() < 0.5 else [(y, -N), (y, N + 1)]
    return perc.continuous_chemical_length(mask, path)


def run_percolation_bound(cfg, render_dir=None) -> Report:
    """Monte Carlo check of d_chem >= theta d_Z2 for far-apart pairs, the
    union bound, and the deep-blue length of straight crossings."""
    rp = perc.verify_percolation_bound(cfg["N"], cfg["r"], cfg["trials"], cfg["theta"], cfg["seed"],
                                       cfg["pairs_per_trial"])
    dp = cfg["deep"]
    lengths = _map_trials(_deep_crossing, cfg, [(t,) for t in range(dp["trials"])])
    need = dp["min_length_factor"] * dp["N"]
    deep_frac = float(np.mean(np.asarray(lengths) >= need))
    checks = []
    v = _threshold(cfg, "success_fraction_min")
    if v is not None:
        checks.append(Check(f"fraction of trials with d_chem >= {cfg['theta']} d_Z2 on every pair",
                            rp.success_fraction, v, rp.success_fraction >= v))
    v = _threshold(cfg, "deep_crossing_fraction_min")
    if v is not None:
        checks.append(Check(f"fraction of crossings with deep-blue length >= {need:g}", deep_frac, v,
                            deep_frac >= v))
    trials = [{"trial": i, "min_ratio": x} for i, x in enumerate(rp.ratios)]
    trials += [{"crossing": i, "deep_blue_length": x} for i, x in enumerate(lengths)]
    summary = {"success_fraction": rp.success_fraction, "worst_ratio": rp.worst_ratio,
               "worst_pair": rp.worst_pair, "union_bound": rp.union_bound,
               "union_bound_ratio": 8 * cfg["r"] ** 0.1, "deep_crossing_fraction": deep_frac,
               "deep_length": _quantiles(lengths)}
    rep = Report("percolation-bound", cfg, trials, summary, checks, _provenance(cfg))
    if render_dir:
        from .svg import render_svg
        c = perc.color_grid(dp["N"], dp["r"], derive_seed(cfg["seed"], 9, 0))
        rep.artifacts["coloring"] = render_svg(c, os.path.join(render_dir, "coloring.svg"),
                                               deep=perc.deep_blue(c, dp["m"]))
    return rep


RUNNERS = {
    "rqc-homogenize": run_rqc_homogenize,
    "delaunay-pack": run_delaunay_pack,
    "heschramm-locality": run_heschramm_locality,
    "boundary-coverage": run_boundary_coverage,
    "modulus-distortion": run_modulus_distortion,
    "percolation-bound": run_percolation_bound,
}


def run(name: str, cfg: dict, out_dir: str | None = None, render: bool = False) -> Report:
    """Run an experiment.  With ``out_dir``, write ``<name>.json`` and
    ``<name>.txt`` there, plus SVG figures when ``render`` is set."""
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    rep = RUNNERS[name](cfg, out_dir if (render and out_dir) else None)
    if out_dir:
        with open(os.path.join(out_dir, f"{name}.json"), "w", encoding="utf-8") as fh:
            fh.write(rep.to_json())
        with open(os.path.join(out_dir, f"{name}.txt"), "w", encoding="utf-8") as fh:
            fh.write(rep.to_text())
    return rep
