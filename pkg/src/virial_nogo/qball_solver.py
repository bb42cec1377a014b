"""Stationary spherically symmetric solitons phi = f(r) exp(i omega t) with A = 0.

The radial equation is

    f'' + (2/r) f' + omega^2 f - V'(f^2) f = 0,   f'(0) = 0,  f(inf) = 0,

solved by shooting on f(0) with an adaptive Dormand-Prince 4(5) integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import RK45

from .lattice_fields import GaugeGroup, GridSpec, ScalarGaugeConfig
from .potential_dsl import (
    PotentialDomainError,
    PotentialExpr,
    compile_scalar,
    differentiate,
    evaluate_masked,
    parse_potential,
    to_text,
    validate_admissibility,
)

DEFAULT_DECAY_TOL = 1e-6

OVERSHOOT = 1
UNDERSHOOT = -1
REACHED_END = 0


class NoSignChange(ValueError):
    """Both ends of the f(0) bracket are classified the same way."""


class NonConvergent(RuntimeError):
    """No decaying profile could be produced within the allowed radius/precision."""


@dataclass
class RadialProfile:
    r: np.ndarray
    f: np.ndarray
    omega: float
    f0: float
    potential: PotentialExpr
    node_count: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def dr(self) -> float:
        return float(self.r[1] - self.r[0])

    @property
    def R(self) -> float:
        return float(self.r[-1])

    def __call__(self, radius: np.ndarray) -> np.ndarray:
        """Linear interpolation in r; zero beyond the grid."""
        return np.interp(radius, self.r, self.f, right=0.0)


def _force_array(potential: PotentialExpr, f: np.ndarray, dpot: Optional[PotentialExpr] = None) -> np.ndarray:
    """V'(f^2) f, with the removable singularity at f = 0 set to its limit 0."""
    dpot = dpot or differentiate(potential)
    out = np.zeros_like(f)
    nz = f != 0.0
    vals = evaluate_masked(dpot, f[nz] ** 2) * f[nz]
    if np.isnan(vals).any():
        raise PotentialDomainError("V'(f^2) undefined on part of the profile")
    out[nz] = vals
    return out


def radial_residual(profile: RadialProfile) -> np.ndarray:
    """f'' + 2 f'/r + omega^2 f - V'(f^2) f at nodes 0 .. N-3 with O(dr^4) stencils.

    Node 0 uses the regular limit 2 f'/r -> 2 f''(0), i.e. 3 f''(0).  The even
    extension f(-r) = f(r) supplies the stencil points left of the origin.
    """
    f = np.asarray(profile.f, dtype=np.float64)
    h = profile.dr
    ext = np.concatenate([f[2:0:-1], f])  # f[-2], f[-1], f[0], ...
    c = ext[2:-2]
    d2 = (-ext[4:] + 16.0 * ext[3:-1] - 30.0 * c + 16.0 * ext[1:-3] - ext[:-4]) / (12.0 * h * h)
    d1 = (-ext[4:] + 8.0 * ext[3:-1] - 8.0 * ext[1:-3] + ext[:-4]) / (12.0 * h)
    r = profile.r[: len(c)]
    lap = np.empty_like(c)
    lap[0] = 3.0 * d2[0]
    lap[1:] = d2[1:] + 2.0 * d1[1:] / r[1:]
    return lap + profile.omega ** 2 * c - _force_array(profile.potential, c)


def log_potential(q1: float, q2: float) -> PotentialExpr:
    return parse_potential(f"-{float(q1)!r}*s*ln({float(q2)!r}*s)")


def exact_log_qball(
    q1: float, q2: float, omega: float, R: float = 12.0, dr: float = 1e-3
) -> RadialProfile:
    """Closed-form Gaussian soliton of V = -q1 s ln(q2 s).

    f(r) = A exp(-q1 r^2 / 2),  A^2 = exp(2 - omega^2 / q1) / q2.
    """
    if not (q1 > 0 and q2 > 0):
        raise ValueError("q1 and q2 must be positive")
    amp = math.sqrt(math.exp(2.0 - omega ** 2 / q1) / q2)
    r = np.arange(int(round(R / dr)) + 1) * dr
    f = amp * np.exp(-0.5 * q1 * r * r)
    return RadialProfile(
        r, f, float(omega), amp, log_potential(q1, q2),
        meta={"width_a": 0.5 * q1, "amplitude": amp, "q1": q1, "q2": q2},
    )


# ---------------------------------------------------------------------------
# shooting


@dataclass
class _Shot:
    kind: int
    r_stop: float
    crossings: int
    solutions: list  # dense-output segments (t_old, t, interpolant)


class _RadialODE:
    def __init__(self, potential: PotentialExpr, omega: float):
        self.dvp = compile_scalar(differentiate(potential))
        self.w2 = omega * omega

    def force(self, f: float) -> float:
        if f == 0.0:
            return 0.0
        return self.dvp(f * f) * f

    def __call__(self, r, y):
        f, fp = y
        return np.array([fp, self.force(f) - self.w2 * f - 2.0 * fp / r])

    def start(self, f0: float, r0: float):
        # Taylor start: f''(0) = (V'(f0^2) - omega^2) f0 / 3
        a = (self.force(f0) - self.w2 * f0) / 3.0
        return np.array([f0 + 0.5 * a * r0 * r0, a * r0])


def _integrate(ode: _RadialODE, f0: float, node_count: int, R: float, rtol: float, atol: float,
               keep: bool = False, r0: float = 1e-4) -> _Shot:
    solver = RK45(ode, r0, ode.start(f0, r0), R, rtol=rtol, atol=atol, max_step=max(R / 50.0, 0.05))
    crossings = 0
    segs = []
    blow = 1e3 * max(abs(f0), 1.0)
    f_prev, fp_prev = solver.y
    while solver.status == "running":
        try:
            solver.step()
        except (PotentialDomainError, OverflowError, ZeroDivisionError):
            return _Shot(UNDERSHOOT, solver.t, crossings, segs)
        if solver.status == "failed":
            raise NonConvergent(f"integrator failed at r={solver.t:g}")
        f, fp = solver.y
        if keep:
            segs.append((solver.t_old, solver.t, solver.dense_output()))
        if f == 0.0 or (f > 0) != (f_prev > 0):
            crossings += 1
            if crossings > node_count:
                return _Shot(OVERSHOOT, solver.t, crossings, segs)
        elif f * fp > 0 and f_prev * fp_prev <= 0:
            # |f| passed through a minimum without a zero: turns away from 0
            return _Shot(UNDERSHOOT, solver.t, crossings, segs)
        if abs(f) > blow:
            return _Shot(UNDERSHOOT, solver.t, crossings, segs)
        f_prev, fp_prev = f, fp
    return _Shot(REACHED_END, solver.t, crossings, segs)


def _classify(kind: int, lo_kind: int) -> bool:
    """True if ``kind`` sits on the same side as the lower bracket end."""
    return kind == lo_kind


def default_radius(potential: PotentialExpr, omega: float) -> float:
    """20 decay lengths, the decay length being 1/sqrt(V'(0) - omega^2) when finite."""
    rep = validate_admissibility(potential)
    c = rep.vprime_limit_at_zero
    kappa2 = c - omega ** 2
    if rep.vprime_finite and kappa2 > 1e-6:
        return 20.0 / math.sqrt(kappa2)
    return 20.0


def _sample_segments(segs, r: np.ndarray, r_end: float) -> np.ndarray:
    out = np.full(r.shape, np.nan)
    for t_old, t_new, interp in segs:
        m = (r >= t_old) & (r <= t_new)
        if m.any():
            out[m] = interp(r[m])[0]
    out[r > r_end] = np.nan
    return out


def shoot(
    potential: PotentialExpr,
    omega: float,
    f0_bracket: tuple[float, float],
    R: Optional[float] = None,
    dr: float = 1e-3,
    node_count: int = 0,
    decay_tol: float = DEFAULT_DECAY_TOL,
    rtol: float = 1e-12,
    atol: float = 1e-16,
    max_doublings: int = 4,
) -> RadialProfile:
    """Bisection on f(0) between overshoot (too many zeros) and undershoot (|f| turns back up)."""
    lo, hi = map(float, f0_bracket)
    if not lo < hi:
        raise ValueError("bracket must satisfy lo < hi")
    ode = _RadialODE(potential, omega)
    R = float(R) if R is not None else default_radius(potential, omega)

    for _ in range(max_doublings + 1):
        k_lo = _integrate(ode, lo, node_count, R, rtol, atol).kind
        k_hi = _integrate(ode, hi, node_count, R, rtol, atol).kind
        if k_lo == k_hi:
            if k_lo == REACHED_END:
                R *= 2.0
                continue
            raise NoSignChange(
                f"f0 bracket [{lo:g}, {hi:g}] does not straddle a solution (both ends "
                f"{'overshoot' if k_lo == OVERSHOOT else 'undershoot'})"
            )
        a, b = lo, hi
        for _ in range(200):
            mid = 0.5 * (a + b)
            if mid <= a or mid >= b:
                break
            if _classify(_integrate(ode, mid, node_count, R, rtol, atol).kind, k_lo):
                a = mid
            else:
                b = mid
        shot_a = _integrate(ode, a, node_count, R, rtol, atol, keep=True)
        shot_b = _integrate(ode, b, node_count, R, rtol, atol, keep=True)
        n = int(round(R / dr))
        r = np.arange(n + 1) * dr
        fa = _sample_segments(shot_a.solutions, r, shot_a.r_stop)
        fb = _sample_segments(shot_b.solutions, r, shot_b.r_stop)
        fa[0], fb[0] = a, b
        f0 = 0.5 * (a + b)
        scale = abs(f0)
        # trust the bracketed solution until the two trajectories separate
        agree = np.isfinite(fa) & np.isfinite(fb) & (np.abs(fa - fb) <= 1e-3 * decay_tol * scale)
        bad = np.flatnonzero(~agree)
        cut = bad[0] if bad.size else len(r)
        f = np.zeros_like(r)
        f[:cut] = 0.5 * (fa[:cut] + fb[:cut])
        tail = abs(f[cut - 1]) if cut > 0 else scale
        # a decaying profile is already small well before the cut; a shot that
        # rides an unstable equilibrium and drops only near R is not
        outer = np.abs(f[int(0.8 * cut):cut])
        shape_ok = outer.size > 0 and float(np.max(outer)) <= math.sqrt(decay_tol) * scale
        if tail <= decay_tol * scale and shape_ok:
            if cut < len(r):
                # beyond the separation point the true solution is below the tail value
                f[cut:] = 0.0
            prof = RadialProfile(r, f, float(omega), f0, potential, node_count)
            res = radial_residual(prof)
            prof.meta.update(
                {
                    "bracket": [a, b],
                    "R": R,
                    "r_trusted": float(r[cut - 1]),
                    "tail_ratio": tail / scale,
                    "residual_max": float(np.max(np.abs(res[: max(cut - 3, 1)]))),
                }
            )
            return prof
        if cut == len(r) or not shape_ok:
            R *= 2.0
            continue
        raise NonConvergent(
            f"bracketed solutions separate at r={r[cut]:.3g} while |f|/f0={tail / scale:.2e} "
            f"> decay_tol={decay_tol:g}"
        )
    raise NonConvergent(f"profile does not decay to {decay_tol:g} within R={R:g}")


# ---------------------------------------------------------------------------
# lattice embedding


def profile_to_config(
    profile: RadialProfile,
    n_x: int,
    box_L: float,
    n_t: int = 32,
    group: Optional[GaugeGroup] = None,
) -> ScalarGaugeConfig:
    """phi(t, x) = f(|x|) exp(i omega t) on a lattice with T = 2 pi / omega; A = 0."""
    group = group or GaugeGroup.u1()
    if group.n_rep != 1:
        raise ValueError("profiles embed into a single complex scalar (n_rep = 1)")
    if profile.omega == 0:
        raise ValueError("static profiles (omega = 0) have no period; build the config directly")
    T = 2.0 * math.pi / abs(profile.omega)
    grid = GridSpec(T, box_L, n_t, n_x)
    if 2.0 * math.pi / (abs(profile.omega) * grid.dt) < 16:
        raise ValueError("n_t must resolve the period with at least 16 samples")
    radius = grid.radius()
    fmax = float(np.max(np.abs(profile.f), initial=0.0))
    if radius.max() > profile.R and abs(profile.f[-1]) > DEFAULT_DECAY_TOL * fmax:
        raise ValueError("profile grid does not cover the box diagonal")
    amp = profile(radius)
    phase = np.exp(1j * profile.omega * grid.times)
    phi = phase[:, None, None, None, None] * amp[None, :, :, :, None]
    A = np.zeros((4, group.dim_adjoint, n_t, n_x, n_x, n_x))
    return ScalarGaugeConfig(grid, group, phi, A)


def profile_description(profile: RadialProfile) -> dict:
    res = radial_residual(profile)
    return {
        "omega": profile.omega,
        "f0": profile.f0,
        "potential_text": profile.potential.text or to_text(profile.potential),
        "residual_max": float(profile.meta.get("residual_max", np.max(np.abs(res)))),
        "node_count": profile.node_count,
        "dr": profile.dr,
        "R": profile.R,
    }
