import math

import numpy as np
import pytest

from oracles import gaussian_radial_integral
from virial_nogo.lattice_fields import (
    BoundaryContaminationError,
    FunctionalSet,
    GaugeGroup,
    GridSpec,
    ScalarGaugeConfig,
    check_decay,
    compute_functionals,
    covariant_derivative,
    field_strength,
)
from virial_nogo.potential_dsl import parse_potential
from virial_nogo.samples import gaussian, gaussian_a0_config, random_scalar_config

PI_A0_EXACT = 0.75 * math.pi * math.sqrt(math.pi / 2)


# -- groups and grids --------------------------------------------------------


def test_builtin_groups_consistent():
    assert GaugeGroup.u1().check() == []
    su2 = GaugeGroup.su2(0.7)
    assert su2.check() == []
    assert su2.dim_adjoint == 3 and su2.n_rep == 2
    # [T^a, T^b] = i eps^{abc} T^c
    T = su2.generators
    comm = np.einsum("aij,bjk->abik", T, T) - np.einsum("bij,ajk->abik", T, T)
    np.testing.assert_allclose(comm, 1j * np.einsum("abc,cik->abik", su2.structure_constants, T), atol=1e-15)


def test_group_check_catches_bad_data():
    C = np.zeros((2, 2, 2))
    C[0, 1, 0] = 1.0
    T = np.array([[[0, 1], [0, 0]], [[1, 0], [0, 1]]], dtype=complex)
    problems = GaugeGroup("bad", C, T).check()
    assert any("antisymmetric" in p for p in problems)
    assert any("Hermitian" in p for p in problems)


@pytest.mark.parametrize("kw", [dict(n_t=3, n_x=16), dict(n_t=8, n_x=7)])
def test_grid_validation(kw):
    with pytest.raises(ValueError):
        GridSpec(1.0, 8.0, **kw)


def test_grid_geometry():
    g = GridSpec(2.0, 8.0, 8, 16)
    assert g.dt == 0.25 and g.dx == 0.5
    assert g.coords[0] == -4.0 and 0.0 in g.coords
    x, y, z = g.mesh()
    assert x.shape == (1, 1, 16) and z.shape == (16, 1, 1)


def test_config_shape_and_immutability():
    g = GridSpec(1.0, 8.0, 4, 8)
    cfg = ScalarGaugeConfig.zeros(g, GaugeGroup.su2())
    assert cfg.phi.shape == (4, 8, 8, 8, 2) and cfg.A.shape == (4, 3, 4, 8, 8, 8)
    with pytest.raises(ValueError):
        cfg.phi[0, 0, 0, 0, 0] = 1.0
    with pytest.raises(ValueError):
        ScalarGaugeConfig(g, GaugeGroup.u1(), np.zeros((4, 8, 8, 8, 2)), np.zeros((4, 1, 4, 8, 8, 8)))


# -- covariant derivative -----------------------------------------------------


def test_constant_field_zero_derivative():
    g = GridSpec(1.0, 8.0, 4, 8)
    cfg = ScalarGaugeConfig.zeros(g, GaugeGroup.u1())
    cfg = cfg.with_fields(phi=np.full(cfg.phi.shape, 0.3 - 0.2j))
    for mu in range(4):
        assert np.max(np.abs(covariant_derivative(cfg, mu))) < 1e-13


def test_constant_connection_term():
    g = GridSpec(1.0, 8.0, 4, 8)
    grp = GaugeGroup.u1(coupling=1.3)
    cfg = ScalarGaugeConfig.zeros(g, grp)
    c, a0 = 0.4 + 0.1j, 0.7
    A = np.zeros(cfg.A.shape)
    A[0] = a0
    cfg = cfg.with_fields(phi=np.full(cfg.phi.shape, c), A=A)
    np.testing.assert_allclose(covariant_derivative(cfg, 0), -1j * 1.3 * a0 * c, atol=1e-13)


@pytest.mark.parametrize("n_t", [8, 16, 32])
def test_time_derivative_of_rotating_gaussian(n_t):
    T = 2.0
    omega = 2 * math.pi / T
    g = GridSpec(T, 8.0, n_t, 16)
    phase = np.exp(1j * omega * g.times)[:, None, None, None]
    phi = (phase * gaussian(g)[None])[..., None]
    cfg = ScalarGaugeConfig(g, GaugeGroup.u1(), phi, np.zeros((4, 1, n_t, 16, 16, 16)))
    d0 = covariant_derivative(cfg, 0)
    centre = np.abs(d0[:, 8, 8, 8, 0])
    # 4th-order central difference of e^{i w t}: w (8 sin(w dt) - sin(2 w dt)) / (6 w dt)
    wdt = omega * g.dt
    expect = omega * (8 * math.sin(wdt) - math.sin(2 * wdt)) / (6 * wdt)
    np.testing.assert_allclose(centre, expect, rtol=1e-13)
    assert abs(expect - omega) / omega < 0.05 * wdt ** 4


# -- field strength -----------------------------------------------------------


def _pure_gauge_max_F(n_x):
    g = GridSpec(1.0, 8.0, 4, n_x)
    x, y, z = g.mesh()
    chi = np.exp(-(x * x + 2 * y * y + z * z) / 2)
    grads = [np.zeros_like(chi), -x * chi, -2 * y * chi, -z * chi]
    A = np.stack([np.broadcast_to(gr, (4, n_x, n_x, n_x))[None] for gr in grads])
    cfg = ScalarGaugeConfig.zeros(g, GaugeGroup.u1()).with_fields(A=A)
    return max(np.max(np.abs(field_strength(cfg, mu, nu))) for mu in range(4) for nu in range(4))


def test_pure_gauge_u1():
    coarse, fine = _pure_gauge_max_F(32), _pure_gauge_max_F(64)
    assert fine < 5e-4
    assert coarse / fine > 4.0  # at least the O(dx^2) the cancellation needs


def test_pure_gauge_time_component():
    g = GridSpec(1.0, 8.0, 32, 32)
    x, y, z = g.mesh()
    t = g.times[:, None, None, None]
    env = np.exp(-(x * x + y * y + z * z))
    A = np.zeros((4, 1, 32, 32, 32, 32))
    A[0, 0] = -2 * math.pi * env * np.sin(2 * math.pi * t)  # d_t of env cos(2 pi t)
    A[1, 0] = -2 * x * env * np.cos(2 * math.pi * t)
    cfg = ScalarGaugeConfig.zeros(g, GaugeGroup.u1()).with_fields(A=A)
    F01 = field_strength(cfg, 0, 1)
    assert np.max(np.abs(F01)) < 1e-2 * np.max(np.abs(A[0]))


def test_su2_constant_commutator():
    g = GridSpec(1.0, 8.0, 4, 8)
    grp = GaugeGroup.su2(coupling=0.8)
    cfg = ScalarGaugeConfig.zeros(g, grp)
    A = np.zeros(cfg.A.shape)
    a, b = 0.6, -1.7
    A[1, 0] = a  # A^1_1
    A[2, 1] = b  # A^2_2
    cfg = cfg.with_fields(A=A)
    F = field_strength(cfg, 1, 2)
    np.testing.assert_allclose(F[2], 0.8 * a * b, atol=1e-13)
    np.testing.assert_allclose(F[:2], 0.0, atol=1e-13)


def test_field_strength_antisymmetry():
    rng = np.random.default_rng(5)
    g = GridSpec(2 * math.pi, 12.0, 4, 16)
    cfg = random_scalar_config(rng, g, GaugeGroup.su2())
    for mu in range(4):
        assert not np.any(field_strength(cfg, mu, mu))
        for nu in range(4):
            assert np.array_equal(field_strength(cfg, mu, nu), -field_strength(cfg, nu, mu))


# -- functionals --------------------------------------------------------------


def test_zero_config_functionals():
    g = GridSpec(1.0, 8.0, 4, 16)
    fns = compute_functionals(ScalarGaugeConfig.zeros(g, GaugeGroup.su2()), parse_potential("s^2 - s"))
    assert np.all(fns.values() == 0.0) and fns.is_static


def test_gaussian_a0_functional():
    # analytic oracle, cross-checked by radial quadrature of |grad e^{-r^2}|^2 / 2
    radial = gaussian_radial_integral(lambda r: 0.5 * (2 * r * math.exp(-r * r)) ** 2)
    assert radial == pytest.approx(PI_A0_EXACT, rel=1e-10)
    fns = compute_functionals(gaussian_a0_config(GridSpec(1.0, 16.0, 4, 64)))
    assert fns.piA0 == pytest.approx(PI_A0_EXACT, rel=5e-3)
    assert fns.pi0 == fns.pi1 == fns.piA1 == 0.0


def test_gaussian_a0_convergence_order():
    errs = [abs(compute_functionals(gaussian_a0_config(GridSpec(1.0, 16.0, 4, n))).piA0 - PI_A0_EXACT)
            for n in (32, 64)]
    assert errs[0] / errs[1] >= 4.0  # at least 2nd order


def test_rotating_profile_against_radial_quadrature():
    T = 2 * math.pi / 1.3
    omega = 1.3
    g = GridSpec(T, 14.0, 32, 64)
    x, y, z = g.mesh()
    r2 = x * x + y * y + z * z
    f = (1 + 0.5 * r2) * np.exp(-r2 / 1.5)
    phase = np.exp(1j * omega * g.times)[:, None, None, None]
    phi = (phase * f[None])[..., None]
    cfg = ScalarGaugeConfig(g, GaugeGroup.u1(), phi, np.zeros((4, 1, 32, 64, 64, 64)))
    fns = compute_functionals(cfg, parse_potential("s^2"))

    def prof(r):
        return (1 + 0.5 * r * r) * math.exp(-r * r / 1.5)

    def dprof(r):
        return (r - (1 + 0.5 * r * r) * 2 * r / 1.5) * math.exp(-r * r / 1.5)

    pi0 = T * omega ** 2 * gaussian_radial_integral(lambda r: prof(r) ** 2)
    pi1 = T * gaussian_radial_integral(lambda r: dprof(r) ** 2)
    intv = T * gaussian_radial_integral(lambda r: prof(r) ** 4)
    # time stencil error enters pi0 as (w dt)^4 / 30-ish
    assert fns.pi0 == pytest.approx(pi0, rel=2e-4)
    assert fns.pi1 == pytest.approx(pi1, rel=2e-3)
    assert fns.int_V == pytest.approx(intv, rel=1e-4)
    assert fns.int_Vp_s == pytest.approx(2 * intv, rel=1e-4)


def test_nonnegativity_random():
    rng = np.random.default_rng(11)
    g = GridSpec(2 * math.pi, 12.0, 4, 16)
    for k in range(100):
        grp = GaugeGroup.su2() if k % 2 else GaugeGroup.u1()
        fns = compute_functionals(random_scalar_config(rng, g, grp), parse_potential("s^2 - s"))
        assert min(fns.pi0, fns.pi1, fns.piA0, fns.piA1) >= 0.0


def test_gauge_covariance_u1():
    gcoup = 0.9
    g = GridSpec(2 * math.pi, 12.0, 32, 48)
    rng = np.random.default_rng(2)
    base = random_scalar_config(rng, g, GaugeGroup.u1(coupling=gcoup))
    x, y, z = g.mesh()
    t = g.times[:, None, None, None]
    env = np.exp(-(x * x + y * y + z * z) / 2)
    chi = 0.8 * env * np.cos(t)
    dchi = [-0.8 * env * np.sin(t), -x * chi, -y * chi, -z * chi]
    phi2 = np.exp(1j * gcoup * chi)[..., None] * base.phi
    A2 = base.A + np.stack([d[None] for d in dchi])
    fa = compute_functionals(base)
    fb = compute_functionals(base.with_fields(phi=phi2, A=A2))
    for name in ("pi0", "pi1", "piA0", "piA1"):
        a, b = getattr(fa, name), getattr(fb, name)
        assert abs(a - b) <= 2e-3 * max(abs(a), 1.0), name


def test_su2_abelian_embedding_matches_u1():
    rng = np.random.default_rng(4)
    g = GridSpec(2 * math.pi, 12.0, 4, 16)
    u1cfg = random_scalar_config(rng, g, GaugeGroup.u1(charge=0.5, coupling=1.1))
    su2 = GaugeGroup.su2(coupling=1.1)
    phi = np.zeros(u1cfg.phi.shape[:-1] + (2,), complex)
    phi[..., 0] = u1cfg.phi[..., 0]
    A = np.zeros((4, 3) + u1cfg.A.shape[2:])
    A[:, 2] = u1cfg.A[:, 0]  # T^3 = sigma_3 / 2 acts on the upper component with charge 1/2
    embedded = ScalarGaugeConfig(g, su2, phi, A)
    pot = parse_potential("s^2 - s")
    np.testing.assert_allclose(
        compute_functionals(embedded, pot).values(), compute_functionals(u1cfg, pot).values(), rtol=1e-12
    )
    # generic path of a custom abelian group (C = 0) agrees too
    custom = GaugeGroup("custom", np.zeros((1, 1, 1)), np.full((1, 1, 1), 0.5 + 0j), 1.1)
    c2 = ScalarGaugeConfig(g, custom, u1cfg.phi, u1cfg.A)
    np.testing.assert_array_equal(compute_functionals(c2, pot).values(), compute_functionals(u1cfg, pot).values())


def test_thread_count_bit_identical():
    rng = np.random.default_rng(9)
    cfg = random_scalar_config(rng, GridSpec(2 * math.pi, 12.0, 8, 16), GaugeGroup.su2())
    pot = parse_potential("s^4 - s^2")
    a = compute_functionals(cfg, pot, threads=1).values()
    b = compute_functionals(cfg, pot, threads=4).values()
    assert np.array_equal(a, b)


def test_functional_set_algebra():
    a = FunctionalSet(1, 2, 3, 4, 5, 6, is_static=True)
    b = 2 * a + a
    np.testing.assert_array_equal(b.values(), 3 * a.values())
    assert a.int_g_gamma(1.5) == 3 * 6 - 3 * 5
    assert a.action() == 1 - 2 - 5 + 3 - 4


# -- decay ------------------------------------------------------------------------


def test_decay_gaussian_passes():
    cfg = gaussian_a0_config(GridSpec(1.0, 16.0, 4, 32))
    rep = check_decay(cfg)
    assert rep.passed and rep.A_boundary_ratio < 1e-12


def test_decay_constant_fails():
    g = GridSpec(1.0, 8.0, 4, 8)
    cfg = ScalarGaugeConfig.zeros(g, GaugeGroup.u1())
    cfg = cfg.with_fields(phi=np.ones(cfg.phi.shape))
    rep = check_decay(cfg)
    assert not rep.passed and rep.phi_boundary_ratio == 1.0
    with pytest.raises(BoundaryContaminationError):
        compute_functionals(cfg)


def test_decay_small_box_ratio():
    g = GridSpec(1.0, 4.0, 4, 16)
    x, y, z = g.mesh()
    f = np.exp(-(x * x + y * y + z * z) / 2)
    cfg = ScalarGaugeConfig.zeros(g, GaugeGroup.u1()).with_fields(phi=np.broadcast_to(f[None, ..., None], (4, 16, 16, 16, 1)))
    rep = check_decay(cfg)
    # lattice points run from -L/2 to L/2 - dx, so the closest shell point is the
    # face centre at r = L/2 - dx; the ratio sits near e^{-2} ~ 0.135 either way
    r_face = g.box_L / 2 - g.dx
    assert rep.phi_boundary_ratio == pytest.approx(math.exp(-r_face ** 2 / 2), rel=1e-12)
    assert math.exp(-2.0) <= rep.phi_boundary_ratio < 0.25
    assert not rep.passed
