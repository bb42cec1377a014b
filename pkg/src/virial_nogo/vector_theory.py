"""Charged massive vector field W^+_mu coupled to a Maxwell field.

W^- is never stored: it is the complex conjugate of W^+, which is what makes
every integrand below a modulus squared.  Layout ``W[mu, t, z, y, x]``
(complex) and ``A[mu, t, z, y, x]`` (real).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy import fft

from ._stencil import diff_open, diff_periodic, diff_periodic_at, trapezoid_weights_3d
from .lattice_fields import DEFAULT_DECAY_TOL, BoundaryContaminationError, GridSpec, boundary_ratio


@dataclass(frozen=True, eq=False)
class VectorConfig:
    grid: GridSpec
    W: np.ndarray
    A: np.ndarray
    e_charge: float = 1.0
    mass_m: float = 1.0

    def __post_init__(self):
        g = self.grid
        shape = (4, g.n_t, g.n_x, g.n_x, g.n_x)
        if self.W.shape != shape or self.A.shape != shape:
            raise ValueError(f"W and A must have shape {shape}")
        if self.mass_m == 0:
            raise ValueError("mass must be nonzero")
        if np.iscomplexobj(self.A) and np.any(np.imag(self.A) != 0):
            raise ValueError("Maxwell field must be real")
        W = np.array(self.W, dtype=np.complex128)
        A = np.array(np.real(self.A), dtype=np.float64)
        W.flags.writeable = False
        A.flags.writeable = False
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "A", A)

    @classmethod
    def zeros(cls, grid: GridSpec, e_charge: float = 1.0, mass_m: float = 1.0) -> "VectorConfig":
        shape = (4, grid.n_t, grid.n_x, grid.n_x, grid.n_x)
        return cls(grid, np.zeros(shape, np.complex128), np.zeros(shape), e_charge, mass_m)


def _axis(i: int) -> int:
    return 3 - i  # (z, y, x) slice layout


def _d_slice(field: np.ndarray, mu: int, t: int, grid: GridSpec) -> np.ndarray:
    """d_mu of a [t, z, y, x] field at time slice t."""
    if mu == 0:
        return diff_periodic_at(field, t, grid.dt)
    return diff_open(field[t], _axis(mu), grid.dx)


def _d_full(field: np.ndarray, mu: int, grid: GridSpec) -> np.ndarray:
    if mu == 0:
        return diff_periodic(field, 0, grid.dt)
    return diff_open(field, 1 + _axis(mu), grid.dx)


def _cov(config: VectorConfig, mu: int, nu: int, t: Optional[int]) -> np.ndarray:
    """D_mu W^+_nu = d_mu W^+_nu - i e A_mu W^+_nu."""
    g = config.grid
    if t is None:
        d = _d_full(config.W[nu], mu, g)
        return d - 1j * config.e_charge * config.A[mu] * config.W[nu]
    d = _d_slice(config.W[nu], mu, t, g)
    return d - 1j * config.e_charge * config.A[mu, t] * config.W[nu, t]


def _wmn(config, mu, nu, t):
    if mu == nu:
        shape = config.W[0].shape if t is None else config.W[0, 0].shape
        return np.zeros(shape, np.complex128)
    if mu > nu:
        return -_wmn(config, nu, mu, t)
    return _cov(config, mu, nu, t) - _cov(config, nu, mu, t)


def vector_field_strength(config: VectorConfig, mu: int, nu: int) -> np.ndarray:
    """W^+_{mu nu} = D_mu W^+_nu - D_nu W^+_mu on the whole lattice; W^-_{mu nu} is its conjugate."""
    return _wmn(config, mu, nu, None)


def _fmn(config, mu, nu, t):
    if mu == nu:
        shape = config.A[0].shape if t is None else config.A[0, 0].shape
        return np.zeros(shape)
    if mu > nu:
        return -_fmn(config, nu, mu, t)
    g = config.grid
    if t is None:
        return _d_full(config.A[nu], mu, g) - _d_full(config.A[mu], nu, g)
    return _d_slice(config.A[nu], mu, t, g) - _d_slice(config.A[mu], nu, t, g)


def maxwell_field_strength(config: VectorConfig, mu: int, nu: int) -> np.ndarray:
    return _fmn(config, mu, nu, None)


@dataclass
class VectorFunctionalSet:
    piW0: float = 0.0
    piW1: float = 0.0
    v0: float = 0.0
    v1: float = 0.0
    piA0: float = 0.0
    piA1: float = 0.0

    NAMES = ("piW0", "piW1", "v0", "v1", "piA0", "piA1")

    def values(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in self.NAMES])

    def action(self) -> float:
        return self.piW0 - self.piW1 + self.v0 - self.v1 + self.piA0 - self.piA1

    def to_dict(self) -> dict:
        return {n: float(getattr(self, n)) for n in self.NAMES}


def check_vector_decay(config: VectorConfig, decay_tol: float = DEFAULT_DECAY_TOL) -> tuple[float, float, bool]:
    w_mag = np.sqrt(np.sum(np.abs(config.W) ** 2, axis=0))
    a_mag = np.max(np.abs(config.A), axis=0)
    rw, ra = boundary_ratio(w_mag), boundary_ratio(a_mag)
    return rw, ra, (rw <= decay_tol and ra <= decay_tol)


def compute_vector_functionals(
    config: VectorConfig, decay_tol: float = DEFAULT_DECAY_TOL, check: bool = True
) -> VectorFunctionalSet:
    if check:
        rw, ra, ok = check_vector_decay(config, decay_tol)
        if not ok:
            raise BoundaryContaminationError(
                f"boundary/max ratios W={rw:.3e}, A={ra:.3e} exceed decay_tol={decay_tol:g}"
            )
    g = config.grid
    w3 = trapezoid_weights_3d(g.n_x, g.dx)
    m2 = config.mass_m ** 2
    rows = np.zeros((g.n_t, 6))
    for t in range(g.n_t):
        acc = np.zeros((6,) + w3.shape)
        for i in (1, 2, 3):
            acc[0] += np.abs(_wmn(config, 0, i, t)) ** 2
            acc[4] += 0.5 * _fmn(config, 0, i, t) ** 2
            acc[3] += m2 * np.abs(config.W[i, t]) ** 2
            for j in range(i + 1, 4):
                # 1/2 sum_{i,j} = sum_{i<j};  1/4 sum_{i,j} = 1/2 sum_{i<j}
                acc[1] += np.abs(_wmn(config, i, j, t)) ** 2
                acc[5] += 0.5 * _fmn(config, i, j, t) ** 2
        acc[2] = m2 * np.abs(config.W[0, t]) ** 2
        rows[t] = [np.sum(q * w3) for q in acc]
    return VectorFunctionalSet(*map(float, g.dt * np.sum(rows, axis=0)))


@dataclass
class VectorVirialReport:
    beta: float
    coefficients: dict
    terms: dict
    dS: float
    scale: float

    def to_dict(self) -> dict:
        return asdict(self)


def vector_virial_coefficients(beta: float) -> dict:
    return {
        "piW0": 2.0 * beta - 3.0,
        "piW1": -(2.0 * beta - 1.0),
        "v0": 2.0 * beta - 5.0,
        "v1": -(2.0 * beta - 3.0),
        "piA0": -1.0,
        "piA1": -1.0,
    }


def vector_virial_derivative(fns: VectorFunctionalSet, beta: float = 1.5) -> VectorVirialReport:
    """dS/dlambda at 1 under W_0 -> lam^(beta-1) W_0(lam x), W_i -> lam^beta W_i(lam x), A as before.

    At beta = 3/2 the Pi_W0 and V_1 coefficients vanish and the derivative is
    -2 Pi_W1 - 2 V_0 - Pi_A0 - Pi_A1.
    """
    coef = vector_virial_coefficients(beta)
    terms = {k: coef[k] * getattr(fns, k) for k in VectorFunctionalSet.NAMES}
    return VectorVirialReport(
        beta=float(beta),
        coefficients=coef,
        terms=terms,
        dS=math.fsum(terms.values()),
        scale=math.fsum(abs(v) for v in terms.values()),
    )


# ---------------------------------------------------------------------------
# div / curl diagnostics


def _l2(arr: np.ndarray, grid: GridSpec) -> float:
    """sqrt of int_0^T dt int d^3x |arr|^2 for a [t, z, y, x] array."""
    w3 = trapezoid_weights_3d(grid.n_x, grid.dx)
    return math.sqrt(grid.dt * float(np.sum(np.abs(arr) ** 2 * w3)))


def spatial_divergence(config: VectorConfig) -> np.ndarray:
    g = config.grid
    return sum(diff_open(config.W[i], 1 + _axis(i), g.dx) for i in (1, 2, 3))


def spatial_curl(config: VectorConfig) -> np.ndarray:
    """(rot W)_k for k = 1, 2, 3 stacked on axis 0."""
    g = config.grid

    def d(i, comp):
        return diff_open(config.W[comp], 1 + _axis(i), g.dx)

    return np.stack([d(2, 3) - d(3, 2), d(3, 1) - d(1, 3), d(1, 2) - d(2, 1)])


@dataclass
class HelmholtzDiagnostics:
    norm_div: float
    norm_curl: float
    norm_W0: float
    norm_F: float

    def to_dict(self) -> dict:
        return asdict(self)


def helmholtz_diagnostics(config: VectorConfig) -> HelmholtzDiagnostics:
    """L2 norms of div W, rot W, W_0 and the Maxwell field strength over the period and box."""
    if np.any(config.A):
        warnings.warn("A is nonzero; div/rot of W are not the gauge-covariant conditions", stacklevel=2)
    g = config.grid
    curl = spatial_curl(config)
    norm_curl = math.sqrt(sum(_l2(c, g) ** 2 for c in curl))
    norm_F = math.sqrt(
        sum(_l2(_fmn(config, mu, nu, None), g) ** 2 for mu in range(4) for nu in range(mu + 1, 4))
    )
    return HelmholtzDiagnostics(
        norm_div=_l2(spatial_divergence(config), g),
        norm_curl=norm_curl,
        norm_W0=_l2(config.W[0], g),
        norm_F=norm_F,
    )


def solve_dirichlet_poisson(rhs: np.ndarray, dx: float, boundary: Optional[np.ndarray] = None) -> np.ndarray:
    """Solve the 7-point Laplacian problem Lap(u) = rhs on a cube, u = boundary on the outer shell.

    Interior unknowns are diagonalised by the type-I sine transform.  ``rhs``
    and ``boundary`` are full (n, n, n) arrays; only the shell of ``boundary``
    is read.  Complex input is handled component-wise.
    """
    if np.iscomplexobj(rhs) or (boundary is not None and np.iscomplexobj(boundary)):
        bre = None if boundary is None else boundary.real
        bim = None if boundary is None else boundary.imag
        return solve_dirichlet_poisson(rhs.real, dx, bre) + 1j * solve_dirichlet_poisson(rhs.imag, dx, bim)
    n = rhs.shape[0]
    m = n - 2
    u = np.zeros_like(rhs, dtype=np.float64)
    if boundary is not None:
        u[...] = boundary
        u[1:-1, 1:-1, 1:-1] = 0.0
    # move known boundary values to the right-hand side
    lap_b = np.zeros((m, m, m))
    if boundary is not None:
        for ax in range(3):
            lo = [slice(1, -1)] * 3
            hi = [slice(1, -1)] * 3
            lo[ax] = slice(0, 1)
            hi[ax] = slice(n - 1, n)
            tgt_lo = [slice(None)] * 3
            tgt_hi = [slice(None)] * 3
            tgt_lo[ax] = slice(0, 1)
            tgt_hi[ax] = slice(m - 1, m)
            lap_b[tuple(tgt_lo)] += u[tuple(lo)]
            lap_b[tuple(tgt_hi)] += u[tuple(hi)]
        lap_b /= dx * dx
    f = rhs[1:-1, 1:-1, 1:-1] - lap_b
    k = np.arange(1, m + 1)
    lam = (2.0 * np.cos(np.pi * k / (m + 1)) - 2.0) / (dx * dx)
    denom = lam[:, None, None] + lam[None, :, None] + lam[None, None, :]
    fh = fft.dstn(f, type=1)
    u[1:-1, 1:-1, 1:-1] = fft.idstn(fh / denom, type=1)
    return u


def laplacian_7pt(u: np.ndarray, dx: float) -> np.ndarray:
    """Interior 7-point Laplacian (boundary shell returned as 0)."""
    out = np.zeros_like(u)
    c = u[1:-1, 1:-1, 1:-1]
    out[1:-1, 1:-1, 1:-1] = (
        u[2:, 1:-1, 1:-1] + u[:-2, 1:-1, 1:-1]
        + u[1:-1, 2:, 1:-1] + u[1:-1, :-2, 1:-1]
        + u[1:-1, 1:-1, 2:] + u[1:-1, 1:-1, :-2]
        - 6.0 * c
    ) / (dx * dx)
    return out


@dataclass
class RigidityReport:
    precondition_ok: bool
    norm_div: float
    norm_curl: float
    grad_potential_fit_residual: float
    potential_max: float
    max_principle_bound: float
    field_norm: float
    scale: float
    certified_trivial: bool
    counterexample: bool

    def to_dict(self) -> dict:
        return asdict(self)


def harmonic_rigidity_check(
    config: VectorConfig,
    tol: float = 1e-8,
    field_tol: float = 1e-6,
    decay_tol: float = DEFAULT_DECAY_TOL,
) -> RigidityReport:
    """Discrete version of: div W = rot W = 0, W decaying  =>  W = grad(phi), phi harmonic  =>  W = 0.

    Per time slice the potential is fitted by solving Lap(phi) = div W with
    phi = 0 on the boundary (decaying data fix the additive constant).  By the
    discrete maximum principle |phi| <= max|div W| L^2 / 8, so when the
    preconditions hold the fit, and with it W, must be negligible.

    ``scale`` is the L2 norm of a unit-amplitude field over the period and box.
    """
    g = config.grid
    w_mag = np.sqrt(np.sum(np.abs(config.W[1:]) ** 2, axis=0))
    if boundary_ratio(w_mag, reference=1.0) > decay_tol:
        raise ValueError("potential fit is ill-posed: spatial W does not decay at the boundary")
    diag = helmholtz_diagnostics(config)
    ok = diag.norm_div <= tol and diag.norm_curl <= tol
    div = spatial_divergence(config)
    resid_sq = 0.0
    pot_max = 0.0
    w3 = trapezoid_weights_3d(g.n_x, g.dx)
    for t in range(g.n_t):
        phi = solve_dirichlet_poisson(div[t], g.dx)
        pot_max = max(pot_max, float(np.max(np.abs(phi))))
        for i in (1, 2, 3):
            grad_i = diff_open(phi, _axis(i), g.dx)
            resid_sq += g.dt * float(np.sum(np.abs(config.W[i, t] - grad_i) ** 2 * w3))
    field_norm = math.sqrt(sum(_l2(config.W[i], g) ** 2 for i in (1, 2, 3)))
    scale = math.sqrt(g.period_T * g.box_L ** 3)
    bound = float(np.max(np.abs(div), initial=0.0)) * g.box_L ** 2 / 8.0
    certified = ok and field_norm <= field_tol * scale
    return RigidityReport(
        precondition_ok=ok,
        norm_div=diag.norm_div,
        norm_curl=diag.norm_curl,
        grad_potential_fit_residual=math.sqrt(resid_sq),
        potential_max=pot_max,
        max_principle_bound=bound,
        field_norm=field_norm,
        scale=scale,
        certified_trivial=certified,
        counterexample=ok and not certified,
    )
