"""Scaling (virial) identities of the scalar + Yang-Mills action.

Under phi -> lambda^gamma phi(t, lambda x), A_0 -> A_0(t, lambda x),
A_i -> lambda A_i(t, lambda x) the period-integrated action becomes

    S(lambda) = lambda^(2g-3) Pi0 - lambda^(2g-1) Pi1
                - lambda^-3 int V(lambda^(2g) s) + lambda^-1 PiA0 - lambda PiA1

and on a solution dS/dlambda at lambda = 1 vanishes for every gamma.  Away
from solutions, a potential whose no-go inequality holds makes the derivative
strictly negative, which is the certificate produced here.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.ndimage import map_coordinates

from .lattice_fields import (
    FunctionalSet,
    ScalarGaugeConfig,
    compute_functionals,
    integrate_potential,
)
from .potential_dsl import (
    INCONCLUSIVE,
    NOGO,
    NOGO_DERRICK_STATIC,
    NOGO_STATIC_ONLY,
    PotentialExpr,
    Verdict,
)

DEFAULT_TOL_VIRIAL = 1e-3
TERM_NAMES = ("term_pi0", "term_pi1", "term_V", "term_piA0", "term_piA1")


def scaled_action(
    fns: FunctionalSet,
    potential: PotentialExpr,
    config: ScalarGaugeConfig,
    gamma: float,
    lam: float,
) -> float:
    """S(lambda) in closed form; only the potential term is re-integrated."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    pot = integrate_potential(config, potential, lam ** (2.0 * gamma))
    return (
        lam ** (2.0 * gamma - 3.0) * fns.pi0
        - lam ** (2.0 * gamma - 1.0) * fns.pi1
        - lam ** -3.0 * pot
        + fns.piA0 / lam
        - lam * fns.piA1
    )


def scaled_action_terms(fns, potential, config, gamma, lam) -> dict:
    pot = integrate_potential(config, potential, lam ** (2.0 * gamma))
    return {
        "lambda": lam,
        "term_pi0": lam ** (2.0 * gamma - 3.0) * fns.pi0,
        "term_pi1": -(lam ** (2.0 * gamma - 1.0)) * fns.pi1,
        "term_V": -(lam ** -3.0) * pot,
        "term_piA0": fns.piA0 / lam,
        "term_piA1": -lam * fns.piA1,
    }


@dataclass
class ScalingReport:
    gamma: float
    dS_closed: float
    term_breakdown: dict
    scale: float
    rel: float
    stationary: bool
    tol_virial: float = DEFAULT_TOL_VIRIAL
    lambda_grid: list = field(default_factory=list)
    S_values: list = field(default_factory=list)
    dS_fd: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


def virial_terms(fns: FunctionalSet, gamma: float) -> dict:
    return {
        "term_pi0": (2.0 * gamma - 3.0) * fns.pi0,
        "term_pi1": -(2.0 * gamma - 1.0) * fns.pi1,
        "term_V": -fns.int_g_gamma(gamma),
        "term_piA0": -fns.piA0,
        "term_piA1": -fns.piA1,
    }


def virial_derivative(fns: FunctionalSet, gamma: float, tol_virial: float = DEFAULT_TOL_VIRIAL) -> ScalingReport:
    """dS/dlambda at lambda = 1 with its five contributions."""
    terms = virial_terms(fns, gamma)
    vals = [terms[k] for k in TERM_NAMES]
    ds = math.fsum(vals)
    scale = math.fsum(abs(v) for v in vals)
    rel = abs(ds) / scale if scale > 0 else 0.0
    return ScalingReport(
        gamma=float(gamma),
        dS_closed=ds,
        term_breakdown=terms,
        scale=scale,
        rel=rel,
        stationary=rel <= tol_virial,
        tol_virial=tol_virial,
    )


def lambda_sweep(fns, potential, config, gamma, lambdas: Sequence[float]) -> list[dict]:
    """Rows for the CSV ``lambda,S,term_pi0,term_pi1,term_V,term_piA0,term_piA1``."""
    rows = []
    for lam in lambdas:
        terms = scaled_action_terms(fns, potential, config, gamma, float(lam))
        terms["S"] = math.fsum(terms[k] for k in TERM_NAMES)
        rows.append(terms)
    return rows


class NonStaticConfigError(ValueError):
    pass


def static_virial_derivative(fns: FunctionalSet, gamma: float, beta: float) -> float:
    """Derivative under phi -> lambda^gamma phi, A_0 -> lambda^beta A_0 (static fields, no x scaling).

    2 (gamma + beta) Pi0 - 2 gamma [Pi1 + int s V'] + 2 beta PiA0
    """
    if not fns.is_static:
        raise NonStaticConfigError("static virial identity needs time-independent fields")
    if not (gamma > 0 and beta < -gamma):
        raise ValueError("requires gamma > 0 and beta < -gamma")
    return (
        2.0 * (gamma + beta) * fns.pi0
        - 2.0 * gamma * (fns.pi1 + fns.int_Vp_s)
        + 2.0 * beta * fns.piA0
    )


# ---------------------------------------------------------------------------
# certificates


@dataclass
class Certificate:
    case: str
    gamma: Optional[float]
    derivative: float
    forced_zero: list
    nonzero: list
    excludes_solution: bool
    vacuous: bool
    note: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _nonzero(fns: FunctionalSet, names, tol: float) -> list:
    scale = max(1.0, max(abs(getattr(fns, n)) for n in FunctionalSet.NAMES))
    return [n for n in names if abs(getattr(fns, n)) > tol * scale]


def dispatch_theorem_cases(fns: FunctionalSet, verdict: Verdict, tol: float = 1e-12) -> Optional[Certificate]:
    """Turn a potential verdict plus measured functionals into a no-go certificate.

    Returns None for inconclusive verdicts.  A certificate is ``vacuous`` when
    every functional the identity forces to zero already vanishes (the trivial
    configuration); otherwise the identity is strictly violated and the
    configuration cannot be a solution.
    """
    if verdict.kind == INCONCLUSIVE:
        return None
    if verdict.kind == NOGO:
        gamma = float(verdict.gamma)
        if gamma == 1.5:
            case, forced = "gamma_three_halves", ["pi1", "piA0", "piA1"]
        else:
            case, forced = "interior_gamma", ["pi0", "pi1", "piA0", "piA1"]
        d = virial_derivative(fns, gamma).dS_closed
        note = ""
    elif verdict.kind == NOGO_DERRICK_STATIC:
        gamma = 0.5
        case, forced = "derrick_static", ["pi0", "piA0", "piA1"]
        d = virial_derivative(fns, gamma).dS_closed
        note = "remaining static scalar problem excluded by Derrick's theorem"
    elif verdict.kind == NOGO_STATIC_ONLY:
        gamma = 1.0
        case, forced = "static_only", ["pi0", "pi1", "piA0"]
        if not fns.is_static:
            return Certificate(case, gamma, math.nan, forced, [], False, False,
                               "condition s V' >= 0 only excludes static configurations")
        d = static_virial_derivative(fns, gamma, -2.0)
        note = "static rescaling with gamma = 1, beta = -2"
    else:
        raise ValueError(f"unknown verdict {verdict.kind!r}")
    nz = _nonzero(fns, forced, tol)
    vacuous = not nz
    return Certificate(
        case=case,
        gamma=gamma,
        derivative=d,
        forced_zero=forced,
        nonzero=nz,
        excludes_solution=(not vacuous) and d < 0,
        vacuous=vacuous,
        note=note,
    )


# ---------------------------------------------------------------------------
# cross-checks


@dataclass
class FDConsistency:
    gamma: float
    h: float
    dS_closed: float
    dS_fd: float
    scale: float
    rel_err: float

    def to_dict(self) -> dict:
        return asdict(self)


def finite_difference_consistency(
    config: ScalarGaugeConfig,
    potential: PotentialExpr,
    gamma: float,
    h: float = 1e-3,
    fns: Optional[FunctionalSet] = None,
) -> FDConsistency:
    """Compare the closed-form derivative with a central difference of S(lambda)."""
    if not 0 < h <= 0.1:
        raise ValueError("h must lie in (0, 0.1]")
    fns = fns or compute_functionals(config, potential)
    rep = virial_derivative(fns, gamma)
    sp = scaled_action(fns, potential, config, gamma, 1.0 + h)
    sm = scaled_action(fns, potential, config, gamma, 1.0 - h)
    fd = (sp - sm) / (2.0 * h)
    rel = abs(rep.dS_closed - fd) / rep.scale if rep.scale > 0 else abs(rep.dS_closed - fd)
    return FDConsistency(float(gamma), h, rep.dS_closed, fd, rep.scale, rel)


def rescale_config(config: ScalarGaugeConfig, gamma: float, lam: float, order: int = 1) -> ScalarGaugeConfig:
    """Literally rescaled fields phi'(t,x) = lam^gamma phi(t, lam x), A'_0 = A_0(t, lam x),
    A'_i = lam A_i(t, lam x), by spline interpolation (trilinear for order=1); zero outside the box."""
    g = config.grid
    x = g.coords
    # fractional index of lam * x in the original grid
    idx = (lam * x + 0.5 * g.box_L) / g.dx
    Z, Y, X = np.meshgrid(idx, idx, idx, indexing="ij")
    coords = np.stack([Z, Y, X])

    def warp(field3d):
        return map_coordinates(field3d, coords, order=order, mode="constant", cval=0.0)

    phi = np.empty_like(config.phi)
    for t in range(g.n_t):
        for r in range(config.group.n_rep):
            re = warp(config.phi[t, ..., r].real)
            im = warp(config.phi[t, ..., r].imag)
            phi[t, ..., r] = lam ** gamma * (re + 1j * im)
    A = np.empty_like(config.A)
    for mu in range(4):
        fac = 1.0 if mu == 0 else lam
        for a in range(config.group.dim_adjoint):
            for t in range(g.n_t):
                A[mu, a, t] = fac * warp(config.A[mu, a, t])
    return config.with_fields(phi=phi, A=A)


def literal_scaled_action(config, potential, gamma, lam, order: int = 1) -> float:
    scaled = rescale_config(config, gamma, lam, order)
    return compute_functionals(scaled, potential, check=False).action()
