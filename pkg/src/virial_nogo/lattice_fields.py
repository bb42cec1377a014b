"""Time-periodic lattice configurations of a scalar multiplet coupled to a gauge field.

Layout: ``phi[t, z, y, x, r]`` (complex, r runs over the representation) and
``A[mu, a, t, z, y, x]`` (real, mu = 0..3 with 0 the time direction, a the
adjoint index).  Spatial direction i = 1, 2, 3 is x, y, z.  The time axis is
periodic with period T; space is the box [-L/2, L/2)^3 sampled at
``x_k = -L/2 + k dx`` so that the origin is a lattice point for even n_x.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._stencil import diff_open, diff_periodic, diff_periodic_at, trapezoid_weights_3d
from .potential_dsl import PotentialExpr, differentiate, evaluate, s_times_derivative

THREADS_ENV = "VIRIAL_NOGO_THREADS"
DEFAULT_DECAY_TOL = 1e-6
STATIC_TOL = 1e-12


class BoundaryContaminationError(ValueError):
    """Fields do not decay at the box boundary; box integrals would not approximate R^3 ones."""


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# groups


@dataclass(frozen=True, eq=False)
class GaugeGroup:
    name: str
    structure_constants: np.ndarray  # C[a, b, c]
    generators: np.ndarray  # T[a, i, j], complex
    coupling: float = 1.0

    @property
    def dim_adjoint(self) -> int:
        return self.structure_constants.shape[0]

    @property
    def n_rep(self) -> int:
        return self.generators.shape[1]

    @classmethod
    def u1(cls, charge: float = 1.0, coupling: float = 1.0) -> "GaugeGroup":
        return cls(
            "U(1)",
            np.zeros((1, 1, 1)),
            np.full((1, 1, 1), charge, dtype=np.complex128),
            float(coupling),
        )

    @classmethod
    def su2(cls, coupling: float = 1.0) -> "GaugeGroup":
        eps = np.zeros((3, 3, 3))
        for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
            eps[a, b, c] = 1.0
            eps[a, c, b] = -1.0
        sigma = np.array(
            [[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=np.complex128
        )
        return cls("SU(2)", eps, 0.5 * sigma, float(coupling))

    def check(self, tol: float = 1e-12, jacobi_tol: float = 1e-10) -> list[str]:
        """Return a list of violated invariants (empty when the group data is consistent)."""
        problems = []
        C = self.structure_constants
        n = C.shape[0]
        if C.shape != (n, n, n):
            problems.append(f"structure constants have shape {C.shape}")
            return problems
        if self.generators.shape[0] != n or self.generators.shape[1] != self.generators.shape[2]:
            problems.append(f"generators have shape {self.generators.shape}")
            return problems
        for perm in ((1, 0, 2), (0, 2, 1), (2, 1, 0)):
            if np.max(np.abs(C + C.transpose(perm)), initial=0.0) > tol:
                problems.append("structure constants not totally antisymmetric")
                break
        T = self.generators
        if np.max(np.abs(T - np.conj(T.transpose(0, 2, 1))), initial=0.0) > tol:
            problems.append("generators not Hermitian")
        # sum_d C^{abd} C^{dce} + cyclic(a, b, c) = 0
        jac = (
            np.einsum("abd,dce->abce", C, C)
            + np.einsum("bcd,dae->abce", C, C)
            + np.einsum("cad,dbe->abce", C, C)
        )
        if np.max(np.abs(jac), initial=0.0) > jacobi_tol:
            problems.append("Jacobi identity violated")
        return problems


# ---------------------------------------------------------------------------
# grid and configuration


@dataclass(frozen=True)
class GridSpec:
    period_T: float
    box_L: float
    n_t: int
    n_x: int

    def __post_init__(self):
        if self.n_t < 4:
            raise ValueError("n_t must be >= 4")
        if self.n_x < 8:
            raise ValueError("n_x must be >= 8")
        if not (self.period_T > 0 and self.box_L > 0):
            raise ValueError("period_T and box_L must be positive")

    @property
    def dt(self) -> float:
        return self.period_T / self.n_t

    @property
    def dx(self) -> float:
        return self.box_L / self.n_x

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_t) * self.dt

    @property
    def coords(self) -> np.ndarray:
        return -0.5 * self.box_L + np.arange(self.n_x) * self.dx

    def mesh(self):
        """Broadcastable (x, y, z) arrays in [z, y, x] layout."""
        c = self.coords
        return c[None, None, :], c[None, :, None], c[:, None, None]

    def radius(self) -> np.ndarray:
        x, y, z = self.mesh()
        return np.sqrt(x * x + y * y + z * z)

    def to_dict(self) -> dict:
        return {"period_T": self.period_T, "box_L": self.box_L, "n_t": self.n_t, "n_x": self.n_x}


def _frozen(arr: np.ndarray, dtype) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=dtype)
    if out is arr:
        out = out.copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class ScalarGaugeConfig:
    grid: GridSpec
    group: GaugeGroup
    phi: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        g = self.grid
        nx = g.n_x
        phi_shape = (g.n_t, nx, nx, nx, self.group.n_rep)
        a_shape = (4, self.group.dim_adjoint, g.n_t, nx, nx, nx)
        if self.phi.shape != phi_shape:
            raise ValueError(f"phi has shape {self.phi.shape}, expected {phi_shape}")
        if self.A.shape != a_shape:
            raise ValueError(f"A has shape {self.A.shape}, expected {a_shape}")
        if np.iscomplexobj(self.A) and np.any(np.imag(self.A) != 0):
            raise ValueError("gauge field must be real")
        object.__setattr__(self, "phi", _frozen(self.phi, np.complex128))
        object.__setattr__(self, "A", _frozen(np.real(self.A), np.float64))

    @classmethod
    def zeros(cls, grid: GridSpec, group: GaugeGroup) -> "ScalarGaugeConfig":
        nx = grid.n_x
        return cls(
            grid,
            group,
            np.zeros((grid.n_t, nx, nx, nx, group.n_rep), np.complex128),
            np.zeros((4, group.dim_adjoint, grid.n_t, nx, nx, nx)),
        )

    def with_fields(self, phi=None, A=None) -> "ScalarGaugeConfig":
        return ScalarGaugeConfig(
            self.grid,
            self.group,
            self.phi if phi is None else phi,
            self.A if A is None else A,
        )

    def phi_norm_sq(self) -> np.ndarray:
        """s = phi^dagger phi per site, shape (n_t, n_x, n_x, n_x)."""
        return np.sum(self.phi.real ** 2 + self.phi.imag ** 2, axis=-1)

    def is_static(self, tol: float = STATIC_TOL) -> bool:
        dphi = np.max(np.abs(self.phi - self.phi[:1]), initial=0.0)
        dA = np.max(np.abs(self.A - self.A[:, :, :1]), initial=0.0)
        return bool(dphi <= tol and dA <= tol)


# ---------------------------------------------------------------------------
# derivatives


def _spatial_axis(i: int) -> int:
    # slice layout (z, y, x, ...): x is axis 2
    return 3 - i


def _connection(group: GaugeGroup, A_mu_t: np.ndarray, phi_t: np.ndarray) -> np.ndarray:
    """g T^a A^a phi at every site of one time slice."""
    return group.coupling * np.einsum("azyx,aij,zyxj->zyxi", A_mu_t, group.generators, phi_t)


def _cov_deriv_slice(config: ScalarGaugeConfig, mu: int, t: int) -> np.ndarray:
    g = config.grid
    phi_t = config.phi[t]
    if mu == 0:
        d = diff_periodic_at(config.phi, t, g.dt)
    else:
        d = diff_open(phi_t, _spatial_axis(mu), g.dx)
    return d - 1j * _connection(config.group, config.A[mu, :, t], phi_t)


def covariant_derivative(config: ScalarGaugeConfig, mu: int) -> np.ndarray:
    """D_mu phi = d_mu phi - i g T^a A^a_mu phi on the whole lattice."""
    if mu not in (0, 1, 2, 3):
        raise ValueError("mu must be 0..3")
    g = config.grid
    if mu == 0:
        d = diff_periodic(config.phi, 0, g.dt)
    else:
        d = diff_open(config.phi, 1 + _spatial_axis(mu), g.dx)
    conn = config.group.coupling * np.einsum(
        "atzyx,aij,tzyxj->tzyxi", config.A[mu], config.group.generators, config.phi
    )
    return d - 1j * conn


def _dA(config: ScalarGaugeConfig, mu: int, nu: int, t: Optional[int]) -> np.ndarray:
    """d_mu A_nu, for one time slice (t given) or all times; shape [a, ...]."""
    g = config.grid
    A_nu = config.A[nu]  # (a, t, z, y, x)
    if mu == 0:
        if t is None:
            return diff_periodic(A_nu, 1, g.dt)
        return diff_periodic_at(np.moveaxis(A_nu, 1, 0), t, g.dt)
    src = A_nu if t is None else A_nu[:, t]
    offset = 2 if t is None else 1
    return diff_open(src, offset + _spatial_axis(mu), g.dx)


def _field_strength(config: ScalarGaugeConfig, mu: int, nu: int, t: Optional[int]) -> np.ndarray:
    if mu == nu:
        shape = config.A[0].shape if t is None else config.A[0, :, 0].shape
        return np.zeros(shape)
    if mu > nu:
        return -_field_strength(config, nu, mu, t)
    F = _dA(config, mu, nu, t) - _dA(config, nu, mu, t)
    C = config.group.structure_constants
    if np.any(C):
        Am = config.A[mu] if t is None else config.A[mu, :, t]
        An = config.A[nu] if t is None else config.A[nu, :, t]
        F = F + config.group.coupling * np.einsum("abc,b...,c...->a...", C, Am, An)
    return F


def field_strength(config: ScalarGaugeConfig, mu: int, nu: int) -> np.ndarray:
    """F^a_{mu nu} = d_mu A^a_nu - d_nu A^a_mu + g C^{abc} A^b_mu A^c_nu, shape [a, t, z, y, x]."""
    if mu not in (0, 1, 2, 3) or nu not in (0, 1, 2, 3):
        raise ValueError("mu, nu must be 0..3")
    return _field_strength(config, mu, nu, None)


# ---------------------------------------------------------------------------
# decay


@dataclass
class DecayReport:
    phi_boundary_ratio: float
    A_boundary_ratio: float
    decay_tol: float
    passed: bool


def _shell_mask(n: int) -> np.ndarray:
    m = np.zeros((n, n, n), bool)
    m[0, :, :] = m[-1, :, :] = True
    m[:, 0, :] = m[:, -1, :] = True
    m[:, :, 0] = m[:, :, -1] = True
    return m


def boundary_ratio(magnitude: np.ndarray, reference: Optional[float] = None) -> float:
    """max over the boundary shell / global max of a (..., z, y, x) magnitude array."""
    n = magnitude.shape[-1]
    shell = _shell_mask(n)
    total = float(np.max(magnitude, initial=0.0))
    if reference is not None:
        total = max(total, reference)
    if total == 0.0:
        return 0.0
    return float(np.max(magnitude[..., shell], initial=0.0)) / total


def check_decay(config: ScalarGaugeConfig, decay_tol: float = DEFAULT_DECAY_TOL) -> DecayReport:
    phi_mag = np.sqrt(config.phi_norm_sq())
    A_mag = np.max(np.abs(config.A), axis=(0, 1))
    rp = boundary_ratio(phi_mag)
    ra = boundary_ratio(A_mag)
    return DecayReport(rp, ra, decay_tol, rp <= decay_tol and ra <= decay_tol)


# ---------------------------------------------------------------------------
# functionals


@dataclass
class FunctionalSet:
    """Integrals over one period and the box.

    ``pi0``, ``pi1``, ``piA0``, ``piA1`` are the kinetic, gradient, electric and
    magnetic integrals; ``int_V`` and ``int_Vp_s`` integrate V(s) and s V'(s).
    """

    pi0: float = 0.0
    pi1: float = 0.0
    piA0: float = 0.0
    piA1: float = 0.0
    int_V: float = 0.0
    int_Vp_s: float = 0.0
    is_static: bool = False
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    NAMES = ("pi0", "pi1", "piA0", "piA1", "int_V", "int_Vp_s")

    def int_g_gamma(self, gamma: float) -> float:
        return 2.0 * gamma * self.int_Vp_s - 3.0 * self.int_V

    def action(self) -> float:
        return self.pi0 - self.pi1 - self.int_V + self.piA0 - self.piA1

    def values(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in self.NAMES])

    def __add__(self, other: "FunctionalSet") -> "FunctionalSet":
        v = self.values() + other.values()
        return FunctionalSet(*v, is_static=self.is_static and other.is_static)

    def __mul__(self, a: float) -> "FunctionalSet":
        return FunctionalSet(*(a * self.values()), is_static=self.is_static)

    __rmul__ = __mul__

    def to_dict(self) -> dict:
        out = {n: float(getattr(self, n)) for n in self.NAMES}
        out["is_static"] = self.is_static
        return out


def _slice_integrands(config: ScalarGaugeConfig, potential, dpotential, t: int, w3: np.ndarray):
    phi_t = config.phi[t]
    d0 = _cov_deriv_slice(config, 0, t)
    pi0 = np.sum(np.abs(d0) ** 2, axis=-1)
    pi1 = np.zeros_like(pi0)
    for i in (1, 2, 3):
        pi1 += np.sum(np.abs(_cov_deriv_slice(config, i, t)) ** 2, axis=-1)
    piA0 = np.zeros_like(pi0)
    piA1 = np.zeros_like(pi0)
    for i in (1, 2, 3):
        piA0 += 0.5 * np.sum(_field_strength(config, 0, i, t) ** 2, axis=0)
        for j in range(i + 1, 4):
            # 1/4 sum_{i,j} F_ij^2 = 1/2 sum_{i<j} F_ij^2
            piA1 += 0.5 * np.sum(_field_strength(config, i, j, t) ** 2, axis=0)
    s = np.sum(phi_t.real ** 2 + phi_t.imag ** 2, axis=-1)
    if potential is not None:
        v, svp = s_times_derivative(potential, s, dpotential)
    else:
        v = svp = np.zeros_like(s)
    return np.array([np.sum(q * w3) for q in (pi0, pi1, piA0, piA1, v, svp)])


def compute_functionals(
    config: ScalarGaugeConfig,
    potential: Optional[PotentialExpr] = None,
    decay_tol: float = DEFAULT_DECAY_TOL,
    check: bool = True,
    threads: Optional[int] = None,
) -> FunctionalSet:
    """Trapezoid in space, rectangle (periodic) in time.

    Per-slice sums are reduced in slice order, so the result does not depend
    on ``threads``.
    """
    if check:
        rep = check_decay(config, decay_tol)
        if not rep.passed:
            raise BoundaryContaminationError(
                f"boundary/max ratios phi={rep.phi_boundary_ratio:.3e}, "
                f"A={rep.A_boundary_ratio:.3e} exceed decay_tol={decay_tol:g}"
            )
    g = config.grid
    w3 = trapezoid_weights_3d(g.n_x, g.dx)
    dpot = differentiate(potential) if potential is not None else None
    threads = threads or default_threads()

    def work(t):
        return _slice_integrands(config, potential, dpot, t, w3)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(work, range(g.n_t)))
    else:
        rows = [work(t) for t in range(g.n_t)]
    totals = g.dt * np.sum(np.array(rows), axis=0)
    return FunctionalSet(*map(float, totals), is_static=config.is_static())


def integrate_potential(config: ScalarGaugeConfig, potential: PotentialExpr, arg_scale: float = 1.0) -> float:
    """Integral over the period and box of V(arg_scale * phi^dagger phi)."""
    g = config.grid
    w3 = trapezoid_weights_3d(g.n_x, g.dx)
    s = config.phi_norm_sq()
    total = np.empty(g.n_t)
    for t in range(g.n_t):
        st = arg_scale * s[t]
        v = np.zeros_like(st)
        pos = st != 0.0
        v[pos] = evaluate(potential, st[pos])  # V(0) = 0 for admissible potentials
        total[t] = np.sum(v * w3)
    return float(g.dt * np.sum(total))
