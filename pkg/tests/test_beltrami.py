import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conflab import beltrami as bel
from conflab.geom import Domain, Rect


def constant_field(mu):
    """mu everywhere (empty cell array, constant background)."""
    return bel.BeltramiField(1.0, (0.0, 0.0), np.zeros((0, 0), dtype=complex), complex(mu))


# ------------------------------------------------------------------ laws and fields

def test_point_mass_zero_field():
    f = bel.sample_field(bel.DilatationLaw.point_mass(0), 0.25, Domain.disk(), seed=0)
    assert not f.values.any()


def test_two_point_mean():
    law = bel.DilatationLaw.two_point(1 / 3, -1 / 3, 0.5)
    v = law.sample(np.random.default_rng(0), 10_000)
    assert set(np.unique(v.real).round(12)) == {-0.333333333333, 0.333333333333}
    sigma = (1 / 3) / math.sqrt(10_000)
    assert abs(v.mean()) < 3 * sigma


def test_uniform_disk_support():
    v = bel.DilatationLaw.uniform_disk(0.5).sample(np.random.default_rng(1), 10_000)
    assert np.abs(v).max() <= 0.5


def test_law_validation_and_roundtrip():
    with pytest.raises(ValueError):
        bel.DilatationLaw.point_mass(1.0)
    with pytest.raises(ValueError):
        bel.DilatationLaw.two_point(0.1, 0.2, 1.5)
    for law in (bel.DilatationLaw.point_mass(0.2 + 0.1j), bel.DilatationLaw.two_point(0.5, -0.5, 0.3),
                bel.DilatationLaw.uniform_disk(0.7)):
        assert bel.DilatationLaw.from_dict(law.to_dict()) == law


def test_field_constant_on_cells():
    law = bel.DilatationLaw.uniform_disk(0.5)
    f = bel.sample_field(law, 0.25, Domain.rectangle((-1, -1), 2, 2), seed=3)
    rng = np.random.default_rng(4)
    i, j = 3, 5
    x0 = f.origin[0] + i * 0.25
    y0 = f.origin[1] + j * 0.25
    pts = np.column_stack([x0 + 0.25 * rng.random(50), y0 + 0.25 * rng.random(50)])
    assert np.all(f(pts) == f.values[i, j])


def test_field_boundary_cells_get_mu0():
    law = bel.DilatationLaw.point_mass(0.5)
    f = bel.sample_field(law, 0.25, Domain.disk(), mu0=0.1, seed=0)
    # a cell touching the unit circle is not compactly inside
    assert f(np.array([[0.95, 0.05]]))[0] == 0.1
    assert f(np.array([[0.1, 0.1]]))[0] == 0.5
    assert f(np.array([[5.0, 5.0]]))[0] == 0.1


def test_reproducible_field():
    law = bel.DilatationLaw.two_point(1 / 3, -1 / 3)
    a = bel.sample_field(law, 0.125, Domain.disk(), seed=11)
    b = bel.sample_field(law, 0.125, Domain.disk(), seed=11)
    assert np.array_equal(a.values, b.values)


# ------------------------------------------------------------------ strips

def test_strips_zero_and_assignment():
    assert not bel.strips_field(0.1, 0.0, 1.0).values.any()
    d = 1 / 16
    f = bel.strips_field(d, 1 / 3, 1.0)
    assert f(np.array([[0.5 * d, 0.3]]))[0] == pytest.approx(1 / 3)
    assert f(np.array([[1.5 * d, -0.7]]))[0] == pytest.approx(-1 / 3)


@pytest.mark.parametrize("delta", [1 / 8, 1 / 32, 1 / 128])
def test_strips_weak_limit(delta):
    f = bel.strips_field(delta, 1 / 3, 1.0)
    # average over the fixed square [0.1, 0.6]^2 on a fine grid
    t = np.linspace(0.1, 0.6, 2001)
    X, Y = np.meshgrid(t, t)
    avg = abs(f(X + 1j * Y).mean())
    assert avg <= 1.1 * delta / 0.5 * (1 / 3)


def test_strips_stretch_ratio():
    f = bel.strips_field(1 / 16, 1 / 3, 1.0)
    m = bel.solve_beltrami(f, 1 / 64, 1e-10, n=128)
    assert bel.stretch_ratio(bel.fit_affine(m)) == pytest.approx(1.25, rel=0.02)


# ------------------------------------------------------------------ solver

def test_zero_field_identity():
    m = bel.solve_beltrami(constant_field(0), 1 / 32, extent=1.0)
    z = np.array([0.3 + 0.2j, -0.7 + 0.5j, 0.1j])
    assert np.abs(m(z) - z).max() <= 1e-10
    assert m.iterations == 0


@pytest.mark.parametrize("mu", [1 / 3, 0.5j, -0.4 + 0.2j])
def test_constant_field_affine(mu):
    m = bel.solve_beltrami(constant_field(mu), 1 / 32, 1e-12, extent=2.0)
    A = bel.affine_for_constant(mu)
    assert bel.sup_distance(m, A) <= 1e-9
    assert m.residual <= 10 * 1e-12


def test_constant_k_formula():
    k = 0.25
    m = bel.solve_beltrami(constant_field(k), 1 / 32, 1e-12, extent=2.0)
    z = np.array([0.3 + 0.4j, -0.5 - 0.2j])
    # w0 = z + k conj(z) fixes 0; normalized by w0(1) = 1 + k
    assert np.allclose(m(z), (z.real + 1j * z.imag * (1 - k) / (1 + k)), atol=1e-9)


def test_normalization_exact():
    law = bel.DilatationLaw.two_point(1 / 3, -1 / 3)
    f = bel.sample_field(law, 0.25, Domain.rectangle((-1, -1), 2, 2), seed=5)
    m = bel.solve_beltrami(f, 1 / 16, 1e-10)
    w = m(np.array([0j, 1 + 0j]))
    assert w[0] == 0 and w[1] == 1
    assert m.residual <= 10 * 1e-10
    assert (m.jacobian_signs() > 0).all()


def test_truncation_warns():
    f = bel.sample_field(bel.DilatationLaw.point_mass(0.995), 0.25, Domain.rectangle((-1, -1), 2, 2), seed=0)
    with pytest.warns(RuntimeWarning):
        m = bel.solve_beltrami(f, 1 / 8, 1e-8)
    assert "warning" in m.metadata


def test_solver_error_carries_residual():
    f = bel.sample_field(bel.DilatationLaw.uniform_disk(0.9), 0.25, Domain.rectangle((-1, -1), 2, 2), seed=0)
    with pytest.raises(bel.SolverError) as exc:
        bel.solve_beltrami(f, 1 / 8, 1e-12, max_iterations=3)
    assert exc.value.residual > 1e-12


def test_beurling_multiplier_on_smooth_field():
    n, h = 256, 4 / 256
    x0 = -(n // 2) * h
    t = x0 + (np.arange(n) + 0.5) * h
    X, Y = np.meshgrid(t, t, indexing="ij")
    z = X + 1j * Y
    s = 0.2
    g = np.exp(-np.abs(z) ** 2 / s)
    # f = z^2 g:  df/dz = 2 z g - z^2 conj(z) g / s,  df/dzbar = -z^3 g / s
    fz = 2 * z * g - z ** 2 * np.conj(z) * g / s
    fzbar = -z ** 3 * g / s
    S, *_ = bel._symbols(n, h)
    got = np.fft.ifft2(S * np.fft.fft2(fzbar))
    assert np.abs(got - fz).max() <= 1e-2 * np.abs(fz).max()


@settings(max_examples=10, deadline=None)
@given(mu=st.complex_numbers(max_magnitude=0.8, allow_nan=False, allow_infinity=False))
def test_affine_for_constant_property(mu):
    A = bel.affine_for_constant(mu)
    assert A(0) == 0 and A(1) == pytest.approx(1)
    assert A.mu == pytest.approx(mu, abs=1e-12)


def test_affine_for_constant_examples():
    A = bel.affine_for_constant(0)
    assert A.a == 1 and A.b == 0
    B = bel.affine_for_constant(1 / 3)
    assert B.b / B.a == pytest.approx(1 / 3, abs=1e-15)
    assert B.K == pytest.approx(2)
    assert B(1j) == pytest.approx((1j - 1j / 3) * 0.75)


# ------------------------------------------------------------------ statistics

def test_estimate_point_mass():
    law = bel.DilatationLaw.point_mass(0.2 + 0.1j)
    est = bel.estimate_A_lambda(law, 0.25, Domain.rectangle((-3, -3), 6, 6), 2, seed=0,
                                tolerance=1e-10, extent=2.0)
    ref = bel.affine_for_constant(0.2 + 0.1j)
    assert est.mu_lambda == pytest.approx(0.2 + 0.1j, abs=1e-6)
    assert abs(est.mean.a - ref.a) < 1e-6 and abs(est.mean.c) < 1e-6
    assert not est.flagged


def test_kstar_point_mass():
    mu0 = 0.3
    est = bel.estimate_Kstar(bel.DilatationLaw.point_mass(mu0), [0.0], Rect((0.0, 0.0), 0.5, 0.5),
                             0.125, 2, seed=0, domain=Domain.rectangle((-2, -2), 4, 4), extent=2.0)
    assert np.allclose(est.moduli, (1 + mu0) / (1 - mu0), rtol=1e-3)


def test_kstar_symmetric_law_rotation():
    law = bel.DilatationLaw.two_point(1 / 3, -1 / 3)
    est = bel.estimate_Kstar(law, [0.0, math.pi / 4, math.pi / 2], Rect((0.0, 0.0), 0.5, 0.5), 0.125, 16,
                             seed=1, mesh=1 / 8, per_side=8)
    se = est.stderr()
    m = est.moduli.mean(axis=1)
    # the lattice is invariant under multiplication by i: Mod w(S_0) and
    # Mod w(S_pi/2) have the same law
    assert abs(m[0] - m[2]) <= 3 * math.hypot(se[0], se[2])
    # continuity in theta: neighbouring grid values differ by at most 3x the error
    for a, b in ((0, 1), (1, 2)):
        assert abs(m[a] - m[b]) <= 3 * math.hypot(se[a], se[b])
