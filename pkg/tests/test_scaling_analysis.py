import math

import numpy as np
import pytest

from virial_nogo.lattice_fields import FunctionalSet, GaugeGroup, GridSpec, ScalarGaugeConfig, compute_functionals
from virial_nogo.potential_dsl import Verdict, classify, parse_potential
from virial_nogo.qball_solver import exact_log_qball, log_potential, profile_to_config
from virial_nogo.samples import gaussian, random_scalar_config
from virial_nogo.scaling_analysis import (
    TERM_NAMES,
    NonStaticConfigError,
    dispatch_theorem_cases,
    finite_difference_consistency,
    lambda_sweep,
    literal_scaled_action,
    scaled_action,
    static_virial_derivative,
    virial_derivative,
)

V2 = parse_potential("s^2")
GRID = GridSpec(2 * math.pi, 12.0, 8, 24)


@pytest.fixture(scope="module")
def random_cfg():
    return random_scalar_config(np.random.default_rng(21), GRID)


@pytest.fixture(scope="module")
def zero_cfg():
    return ScalarGaugeConfig.zeros(GRID, GaugeGroup.u1())


def _static_config(seed=0, with_A0=True, with_phi=True):
    g = GridSpec(1.0, 12.0, 4, 32)
    rng = np.random.default_rng(seed)
    cfg = ScalarGaugeConfig.zeros(g, GaugeGroup.u1())
    blob = gaussian(g, 1.0, rng.uniform(-1, 1, 3))
    phi = np.zeros(cfg.phi.shape, complex)
    A = np.zeros(cfg.A.shape)
    if with_phi:
        phi[..., 0] = (0.8 + 0.3j) * blob[None]
    if with_A0:
        A[0, 0] = 0.6 * gaussian(g, 0.9, rng.uniform(-1, 1, 3))[None]
    return cfg.with_fields(phi=phi, A=A)


# -- S(lambda) -----------------------------------------------------------------


def test_scaled_action_identity(random_cfg):
    fns = compute_functionals(random_cfg, V2)
    assert scaled_action(fns, V2, random_cfg, 1.2, 1.0) == pytest.approx(fns.action(), rel=1e-13)


def test_scaled_action_zero(zero_cfg):
    fns = compute_functionals(zero_cfg, V2)
    for lam in (0.5, 1.0, 2.0):
        assert scaled_action(fns, V2, zero_cfg, 1.0, lam) == 0.0


def test_potential_term_lambda_independent_at_three_quarters(random_cfg):
    fns = compute_functionals(random_cfg, V2)
    kin = dict(pi0=0.0, pi1=0.0, piA0=0.0, piA1=0.0)
    only_v = FunctionalSet(**kin, int_V=fns.int_V, int_Vp_s=fns.int_Vp_s)
    vals = [scaled_action(only_v, V2, random_cfg, 0.75, lam) for lam in (0.5, 1.0, 2.0)]
    np.testing.assert_allclose(vals, -fns.int_V, rtol=1e-12)


def test_scaled_action_rejects_nonpositive_lambda(random_cfg):
    fns = compute_functionals(random_cfg, V2)
    with pytest.raises(ValueError):
        scaled_action(fns, V2, random_cfg, 1.0, 0.0)


def test_lambda_sweep_rows(random_cfg):
    fns = compute_functionals(random_cfg, V2)
    rows = lambda_sweep(fns, V2, random_cfg, 1.0, [0.9, 1.0, 1.1])
    assert [r["lambda"] for r in rows] == [0.9, 1.0, 1.1]
    for r in rows:
        assert r["S"] == pytest.approx(scaled_action(fns, V2, random_cfg, 1.0, r["lambda"]), rel=1e-13)
        assert set(TERM_NAMES) <= set(r)


# -- closed-form derivative ---------------------------------------------------------


def test_virial_zero(zero_cfg):
    rep = virial_derivative(compute_functionals(zero_cfg, V2), 1.0)
    assert rep.dS_closed == 0.0 and rep.scale == 0.0 and rep.stationary


def test_breakdown_sums_to_total(random_cfg):
    fns = compute_functionals(random_cfg, parse_potential("s^4 - s^2"))
    for g in (0.6, 1.0, 1.5):
        rep = virial_derivative(fns, g)
        assert rep.dS_closed == pytest.approx(sum(rep.term_breakdown.values()), rel=1e-12)
        assert rep.scale == pytest.approx(sum(abs(v) for v in rep.term_breakdown.values()), rel=1e-12)


def test_random_config_strictly_negative(random_cfg):
    rep = virial_derivative(compute_functionals(random_cfg, V2), 1.0)
    assert rep.dS_closed < 0
    assert all(v <= 0 for v in rep.term_breakdown.values())
    assert rep.term_breakdown["term_pi1"] < 0


def test_linearity_in_functionals():
    rng = np.random.default_rng(0)
    f = FunctionalSet(*rng.uniform(0, 5, 6))
    h = FunctionalSet(*rng.uniform(0, 5, 6))
    for g in (0.7, 1.5):
        lhs = virial_derivative(2.5 * f + (-1.5) * h, g).dS_closed
        rhs = 2.5 * virial_derivative(f, g).dS_closed - 1.5 * virial_derivative(h, g).dS_closed
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("text", ["s^2", "s^4 - s^2", "s^2 - s"])
def test_term_signs_under_nogo(text):
    pot = parse_potential(text)
    verdict = classify(pot)
    assert verdict.kind == "NoGo"
    rng = np.random.default_rng(hash(text) % 2 ** 32)
    g = GridSpec(2 * math.pi, 12.0, 4, 16)
    for _ in range(15):
        cfg = random_scalar_config(rng, g, GaugeGroup.su2() if rng.random() < 0.5 else GaugeGroup.u1())
        s_max = float(np.max(cfg.phi_norm_sq()))
        if s_max > verdict.s_max:
            continue
        fns = compute_functionals(cfg, pot)
        rep = virial_derivative(fns, verdict.gamma)
        tb = rep.term_breakdown
        assert tb["term_pi0"] <= 0 and tb["term_pi1"] <= 0 and tb["term_piA0"] <= 0 and tb["term_piA1"] <= 0
        assert tb["term_V"] <= 1e-9 * rep.scale
        assert rep.dS_closed <= 1e-9 * rep.scale


# -- stationarity on an exact solution ------------------------------------------------


@pytest.fixture(scope="module")
def exact_profile():
    return exact_log_qball(1.0, 1.0, 1.0, R=12.0, dr=1e-3)


def _rel(profile, n_x, n_t):
    cfg = profile_to_config(profile, n_x, 16.0, n_t)
    fns = compute_functionals(cfg, log_potential(1.0, 1.0))
    return np.array([virial_derivative(fns, g).rel for g in (0.75, 1.0, 1.5)])


def test_stationarity_converges(exact_profile):
    errs = [_rel(exact_profile, n, n // 2) for n in (32, 48, 64)]
    assert np.all(errs[2] <= 1e-3)
    orders = np.log(errs[0] / errs[2]) / np.log(2.0)
    assert np.all(orders >= 2.0)
    assert np.all(errs[1] < errs[0]) and np.all(errs[2] < errs[1])


def test_stationarity_fine_grid(exact_profile):
    # the 1e-4 level needs n_x = 96 with fourth-order stencils at L = 16
    assert np.all(_rel(exact_profile, 96, 32) <= 1e-4)


# -- static identity -------------------------------------------------------------------


def test_static_zero():
    cfg = _static_config(with_A0=False, with_phi=False)
    assert static_virial_derivative(compute_functionals(cfg, V2), 1.0, -2.0) == 0.0


def test_static_expression_and_sign():
    cfg = _static_config(3)
    fns = compute_functionals(cfg, V2)
    assert fns.is_static
    d = static_virial_derivative(fns, 1.0, -2.0)
    expect = 2 * (1 - 2) * fns.pi0 - 2 * (fns.pi1 + fns.int_Vp_s) + 2 * (-2) * fns.piA0
    assert d == pytest.approx(expect, rel=1e-14)
    assert d < 0


def test_static_only_spatial_A_is_zero():
    g = GridSpec(1.0, 12.0, 4, 32)
    cfg = ScalarGaugeConfig.zeros(g, GaugeGroup.u1())
    A = np.zeros(cfg.A.shape)
    A[2, 0] = gaussian(g)[None]
    fns = compute_functionals(cfg.with_fields(A=A), V2)
    assert fns.piA1 > 0
    assert static_virial_derivative(fns, 1.0, -2.0) == 0.0


def test_static_rejects_time_dependence(random_cfg):
    with pytest.raises(NonStaticConfigError):
        static_virial_derivative(compute_functionals(random_cfg, V2), 1.0, -2.0)


@pytest.mark.parametrize("gamma,beta", [(0.0, -2.0), (1.0, -1.0), (1.0, -0.5)])
def test_static_rejects_bad_exponents(gamma, beta):
    fns = compute_functionals(_static_config(), V2)
    with pytest.raises(ValueError):
        static_virial_derivative(fns, gamma, beta)


# -- certificates -------------------------------------------------------------------------


def test_certificate_nogo(random_cfg):
    fns = compute_functionals(random_cfg, V2)
    cert = dispatch_theorem_cases(fns, classify(V2))
    assert cert.case == "gamma_three_halves" and cert.excludes_solution and cert.derivative < 0
    assert not cert.vacuous and cert.forced_zero == ["pi1", "piA0", "piA1"]


def test_certificate_interior_gamma(random_cfg):
    pot = parse_potential("s^4 - s^2")
    fns = compute_functionals(random_cfg, pot)
    cert = dispatch_theorem_cases(fns, classify(pot))
    assert cert.case == "interior_gamma" and 0.5 < cert.gamma < 1.5
    assert cert.forced_zero == ["pi0", "pi1", "piA0", "piA1"]


def test_certificate_inconclusive_on_solution():
    from virial_nogo.qball_solver import shoot

    pot = parse_potential("s - s^2")
    prof = shoot(pot, 0.8, (0.5, 5.0), dr=1e-2)
    cfg = profile_to_config(prof, 64, 24.0, 16)
    fns = compute_functionals(cfg, pot, decay_tol=1e-3)
    assert dispatch_theorem_cases(fns, classify(pot)) is None
    assert max(virial_derivative(fns, g).rel for g in (0.75, 1.0, 1.5)) < 1e-2


def test_certificate_vacuous(zero_cfg):
    cert = dispatch_theorem_cases(compute_functionals(zero_cfg, V2), classify(V2))
    assert cert.vacuous and not cert.excludes_solution and cert.nonzero == []


def test_certificate_static_branches():
    fns = compute_functionals(_static_config(1), V2)
    cert = dispatch_theorem_cases(fns, Verdict("NoGoStaticOnly"))
    assert cert.case == "static_only" and cert.excludes_solution
    cert = dispatch_theorem_cases(fns, Verdict("NoGoDerrickStatic", 0.5))
    assert cert.case == "derrick_static" and cert.gamma == 0.5
    moving = FunctionalSet(1, 1, 1, 1, 0, 0, is_static=False)
    cert = dispatch_theorem_cases(moving, Verdict("NoGoStaticOnly"))
    assert not cert.excludes_solution and math.isnan(cert.derivative)


# -- finite differences ---------------------------------------------------------------------


def test_fd_zero(zero_cfg):
    r = finite_difference_consistency(zero_cfg, V2, 1.0)
    assert r.dS_closed == 0.0 and r.dS_fd == 0.0


def test_fd_consistency_and_order(random_cfg):
    fns = compute_functionals(random_cfg, V2)
    r1 = finite_difference_consistency(random_cfg, V2, 1.0, 1e-3, fns)
    r2 = finite_difference_consistency(random_cfg, V2, 1.0, 5e-4, fns)
    assert r1.rel_err <= 1e-5
    assert 3.5 <= r1.rel_err / r2.rel_err <= 4.5


def test_fd_rejects_bad_step(random_cfg):
    with pytest.raises(ValueError):
        finite_difference_consistency(random_cfg, V2, 1.0, 0.2)


# -- literal rescaling -----------------------------------------------------------------------


def test_literal_rescaling_matches_closed_form():
    errs = {}
    for n in (32, 64):
        g = GridSpec(2 * math.pi, 12.0, 4, n)
        cfg = random_scalar_config(np.random.default_rng(1), g, max_center=1.0)
        fns = compute_functionals(cfg, V2)
        scale = sum(abs(v) for v in fns.values()[:5])
        for lam in (0.8, 1.25):
            closed = scaled_action(fns, V2, cfg, 1.0, lam)
            literal = literal_scaled_action(cfg, V2, 1.0, lam)
            errs[n, lam] = abs(closed - literal) / scale
    for lam in (0.8, 1.25):
        assert errs[64, lam] < 0.05
        assert errs[32, lam] / errs[64, lam] > 3.0  # O(dx^2) interpolation error
