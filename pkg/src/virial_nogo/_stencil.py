"""Fourth-order finite differences and trapezoid weights shared by the lattice modules."""

from __future__ import annotations

import numpy as np


def diff_open(f: np.ndarray, axis: int, h: float) -> np.ndarray:
    """d/dx along ``axis`` with central interior and one-sided boundary stencils (all O(h^4))."""
    g = np.moveaxis(f, axis, 0)
    n = g.shape[0]
    if n < 5:
        raise ValueError("need at least 5 points along a differentiated axis")
    out = np.empty_like(g)
    out[2:-2] = (g[:-4] - 8.0 * g[1:-3] + 8.0 * g[3:-1] - g[4:]) / (12.0 * h)
    out[0] = (-25.0 * g[0] + 48.0 * g[1] - 36.0 * g[2] + 16.0 * g[3] - 3.0 * g[4]) / (12.0 * h)
    out[1] = (-3.0 * g[0] - 10.0 * g[1] + 18.0 * g[2] - 6.0 * g[3] + g[4]) / (12.0 * h)
    out[-1] = (25.0 * g[-1] - 48.0 * g[-2] + 36.0 * g[-3] - 16.0 * g[-4] + 3.0 * g[-5]) / (12.0 * h)
    out[-2] = (3.0 * g[-1] + 10.0 * g[-2] - 18.0 * g[-3] + 6.0 * g[-4] - g[-5]) / (12.0 * h)
    return np.moveaxis(out, 0, axis)


def diff_periodic_at(f: np.ndarray, k: int, h: float) -> np.ndarray:
    """Central O(h^4) derivative along axis 0 of a periodic array, at index ``k`` only."""
    n = f.shape[0]
    # difference form: exactly zero on time-independent data
    return (8.0 * (f[(k + 1) % n] - f[(k - 1) % n]) - (f[(k + 2) % n] - f[(k - 2) % n])) / (12.0 * h)


def diff_periodic(f: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (
        8.0 * (np.roll(f, -1, axis) - np.roll(f, 1, axis))
        - (np.roll(f, -2, axis) - np.roll(f, 2, axis))
    ) / (12.0 * h)


def trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def trapezoid_weights_3d(n: int, h: float) -> np.ndarray:
    w = trapezoid_weights(n, h)
    return w[:, None, None] * w[None, :, None] * w[None, None, :]
