"""Measurement probes: surface-height columns and Shepard-interpolated
field points. Evaluated between action steps, so plain numpy is fast
enough."""

from __future__ import annotations

import numpy as np

from .kernels import KernelModel, kernel_value


def probe_surface_height(pos: np.ndarray, surface: np.ndarray, x_column: float,
                         half_width: float, dp: float,
                         previous: float | None = None):
    """Highest surface-flagged particle inside the column, plus half a
    particle spacing. An empty column holds the previous value and reports
    a warning flag."""
    pos = np.asarray(pos)
    mask = surface & (np.abs(pos[:, 0] - x_column) <= half_width)
    if not mask.any():
        return (previous if previous is not None else 0.0), False
    return float(pos[mask, 1].max()) + 0.5 * dp, True


def probe_field_point(pos: np.ndarray, vel: np.ndarray, p: np.ndarray, vol: np.ndarray,
                      point, kernel: KernelModel):
    """Shepard-weighted interpolation of velocity and pressure at a point.

    Returns (velocity (2,), pressure, ok); without support in reach the
    values are zeros and ok is False.
    """
    pos = np.asarray(pos)
    point = np.asarray(point, dtype=np.float64)
    d = pos - point
    r2 = d[:, 0] ** 2 + d[:, 1] ** 2
    near = r2 < kernel.cutoff**2
    if not near.any():
        return np.zeros(2), 0.0, False
    w = kernel_value(np.sqrt(r2[near]), kernel) * vol[near]
    denom = w.sum()
    if denom <= 0.0:
        return np.zeros(2), 0.0, False
    v = (np.asarray(vel)[near] * w[:, None]).sum(axis=0) / denom
    pr = float((np.asarray(p)[near] * w).sum() / denom)
    return v, pr, True
