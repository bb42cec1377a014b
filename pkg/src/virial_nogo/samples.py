"""Builders for test and demo configurations (Gaussian blobs, random decaying fields)."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .lattice_fields import GaugeGroup, GridSpec, ScalarGaugeConfig
from .vector_theory import VectorConfig


def gaussian(grid: GridSpec, width: float = 1.0, center=(0.0, 0.0, 0.0)) -> np.ndarray:
    """exp(-|x - c|^2 / width^2) in [z, y, x] layout."""
    x, y, z = grid.mesh()
    cx, cy, cz = center
    return np.exp(-((x - cx) ** 2 + (y - cy) ** 2 + (z - cz) ** 2) / width ** 2)


def _random_blobs(rng, grid: GridSpec, n_blobs: int, complex_valued: bool, max_center: float,
                  width_range=(0.6, 1.0)) -> np.ndarray:
    """Sum of Gaussian blobs with random time harmonics; shape [t, z, y, x]."""
    t = grid.times
    omega = 2.0 * np.pi / grid.period_T
    out = np.zeros((grid.n_t,) + (grid.n_x,) * 3, np.complex128 if complex_valued else np.float64)
    for _ in range(n_blobs):
        c = rng.uniform(-max_center, max_center, 3)
        w = rng.uniform(*width_range)
        k = int(rng.integers(0, 3))
        amp = rng.normal() + (1j * rng.normal() if complex_valued else 0.0)
        phase = rng.uniform(0, 2 * np.pi)
        if complex_valued:
            tdep = np.exp(1j * (k * omega * t + phase))
        else:
            tdep = np.cos(k * omega * t + phase)
        out += amp * tdep[:, None, None, None] * gaussian(grid, w, c)[None]
    return out


def random_scalar_config(
    rng: np.random.Generator,
    grid: GridSpec,
    group: Optional[GaugeGroup] = None,
    n_blobs: int = 3,
    gauge_amplitude: float = 0.5,
    max_center: Optional[float] = None,
) -> ScalarGaugeConfig:
    """Random smooth time-periodic configuration that decays well inside the box."""
    group = group or GaugeGroup.u1()
    max_center = 0.1 * grid.box_L if max_center is None else max_center
    phi = np.stack(
        [_random_blobs(rng, grid, n_blobs, True, max_center) for _ in range(group.n_rep)], axis=-1
    )
    A = np.stack(
        [
            np.stack([gauge_amplitude * _random_blobs(rng, grid, n_blobs, False, max_center)
                      for _ in range(group.dim_adjoint)])
            for _ in range(4)
        ]
    )
    return ScalarGaugeConfig(grid, group, phi, A)


def random_vector_config(
    rng: np.random.Generator,
    grid: GridSpec,
    n_blobs: int = 2,
    e_charge: float = 1.0,
    mass_m: float = 1.0,
    gauge_amplitude: float = 0.5,
) -> VectorConfig:
    max_center = 0.1 * grid.box_L
    W = np.stack([_random_blobs(rng, grid, n_blobs, True, max_center) for _ in range(4)])
    A = np.stack([gauge_amplitude * _random_blobs(rng, grid, n_blobs, False, max_center) for _ in range(4)])
    return VectorConfig(grid, W, A, e_charge, mass_m)


def gaussian_a0_config(grid: GridSpec, group: Optional[GaugeGroup] = None) -> ScalarGaugeConfig:
    """phi = 0, A_0 = exp(-r^2) static in the first adjoint direction."""
    group = group or GaugeGroup.u1()
    cfg = ScalarGaugeConfig.zeros(grid, group)
    A = np.zeros(cfg.A.shape)
    A[0, 0] = gaussian(grid)[None]
    return cfg.with_fields(A=A)
