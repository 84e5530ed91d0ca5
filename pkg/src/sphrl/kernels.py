"""Quintic B-spline smoothing kernel and kernel-gradient correction matrices.

Vectors are numpy arrays of shape (2,), matrices of shape (2, 2); particle
sets are structure-of-arrays (positions (N, 2), volumes (N,), ...).

The quintic spline is used because B-splines keep the discrete partition of
unity on a uniform lattice to ~1e-4, which bell-shaped compact kernels with
a 2h cutoff cannot reach at practical h/dp ratios.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Blend threshold of the weighted gradient correction: supports with
# det(A) >= WKGC_ALPHA use the plain inverse, weaker supports blend toward I.
WKGC_ALPHA = 0.5

# Determinants below this are treated as fully degenerate support.
DEGENERATE_DET = 1e-12

# Support radius in units of h.
CUTOFF_RATIO = 3.0

# 2D normalization of the quintic B-spline.
QUINTIC_NORM = 7.0 / (478.0 * math.pi)


@dataclass(frozen=True)
class KernelModel:
    """Quintic B-spline kernel in 2D with compact support of radius 3h.

    W(q) = 7/(478 pi h^2) [ (3-q)^5 - 6 (2-q)^5 + 15 (1-q)^5 ]_+

    (each bracketed power active only while its base is positive). The
    kernel is non-negative, monotonically non-increasing in r, and exactly
    zero at and beyond the cutoff.
    """

    h: float
    cutoff: float = field(init=False)
    norm: float = field(init=False)

    def __post_init__(self):
        if not (self.h > 0.0):
            raise ValueError(f"smoothing length must be positive, got {self.h}")
        object.__setattr__(self, "cutoff", CUTOFF_RATIO * self.h)
        object.__setattr__(self, "norm", QUINTIC_NORM / self.h**2)


def fluid_kernel(dp: float) -> KernelModel:
    """Kernel used by the fluid solver: h = dp (support 3 dp)."""
    return KernelModel(h=dp)


def solid_kernel(dp: float) -> KernelModel:
    """Kernel used by the solid solver: h = 0.9 dp, below the fluid's."""
    return KernelModel(h=0.9 * dp)


def kernel_value(r, kernel: KernelModel):
    """Kernel weight W(r). Accepts scalars or arrays of distances r >= 0."""
    rr = np.asarray(r, dtype=np.float64)
    q = rr / kernel.h
    t3 = np.maximum(3.0 - q, 0.0) ** 5
    t2 = np.maximum(2.0 - q, 0.0) ** 5
    t1 = np.maximum(1.0 - q, 0.0) ** 5
    w = np.where(rr < kernel.cutoff, kernel.norm * (t3 - 6.0 * t2 + 15.0 * t1), 0.0)
    return float(w) if np.isscalar(r) else w


def kernel_derivative(r, kernel: KernelModel):
    """Radial derivative dW/dr (<= 0 inside the support, 0 outside)."""
    rr = np.asarray(r, dtype=np.float64)
    q = rr / kernel.h
    t3 = np.maximum(3.0 - q, 0.0) ** 4
    t2 = np.maximum(2.0 - q, 0.0) ** 4
    t1 = np.maximum(1.0 - q, 0.0) ** 4
    dw = np.where(rr < kernel.cutoff, kernel.norm / kernel.h * (-5.0 * t3 + 30.0 * t2 - 75.0 * t1), 0.0)
    return float(dw) if np.isscalar(r) else dw


def kernel_gradient(rij: np.ndarray, kernel: KernelModel) -> np.ndarray:
    """Gradient of W with respect to r_i for the separation rij = r_i - r_j.

    Returns e_ij * dW/dr. Coincident particles (|rij| = 0) return the zero
    vector, matching the self-contribution convention.
    """
    rij = np.asarray(rij, dtype=np.float64)
    r = float(np.hypot(rij[0], rij[1]))
    if r == 0.0:
        return np.zeros(2)
    return (kernel_derivative(r, kernel) / r) * rij


def consistency_matrix(rij: np.ndarray, vol_j: np.ndarray, kernel: KernelModel) -> np.ndarray:
    """First-order consistency matrix A_i = -sum_j rij (x) gradW_ij V_j.

    ``rij`` holds the separations r_i - r_j of the neighbors (K, 2) and
    ``vol_j`` their volumes (K,). An empty neighborhood yields the zero
    matrix. On a regular interior support A_i is close to the identity.
    """
    rij = np.asarray(rij, dtype=np.float64).reshape(-1, 2)
    vol_j = np.asarray(vol_j, dtype=np.float64).reshape(-1)
    if rij.shape[0] == 0:
        return np.zeros((2, 2))
    r = np.hypot(rij[:, 0], rij[:, 1])
    r = np.where(r == 0.0, 1.0, r)
    coef = kernel_derivative(r, kernel) / r * vol_j
    grad = rij * coef[:, None]
    return -(rij[:, :, None] * grad[:, None, :]).sum(axis=0)


def wkgc_matrix(a: np.ndarray) -> np.ndarray:
    """Weighted kernel gradient correction matrix.

    B = w1 * inv(A) + w2 * I with w1 = det/(det + eps), w2 = eps/(det + eps)
    and eps = max(WKGC_ALPHA - det, 0). Regular supports (det >= alpha) give
    the exact inverse; degenerate supports (|det| < 1e-12) give the identity.
    """
    a = np.asarray(a, dtype=np.float64)
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    if abs(det) < DEGENERATE_DET:
        return np.eye(2)
    eps = max(WKGC_ALPHA - det, 0.0)
    inv = np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]]) / det
    w1 = det / (det + eps)
    w2 = eps / (det + eps)
    return w1 * inv + w2 * np.eye(2)


def reference_kernel_sum(dp: float, kernel: KernelModel) -> float:
    """Full-support lattice sum sum_j W(|r_j|) over a uniform square lattice
    of spacing dp centered on a node, self contribution included.

    Serves as the denominator of density reinitialization.
    """
    n = int(math.ceil(kernel.cutoff / dp)) + 1
    ix = np.arange(-n, n + 1)
    gx, gy = np.meshgrid(ix * dp, ix * dp)
    r = np.hypot(gx, gy).ravel()
    return float(np.sum(kernel_value(r, kernel)))


def lattice_positions(x0: float, y0: float, x1: float, y1: float, dp: float) -> np.ndarray:
    """Lattice of particle centers filling [x0, x1] x [y0, y1], offset dp/2
    from the box edges so each particle represents a dp x dp volume."""
    nx = max(int(round((x1 - x0) / dp)), 0)
    ny = max(int(round((y1 - y0) / dp)), 0)
    xs = x0 + (np.arange(nx) + 0.5) * dp
    ys = y0 + (np.arange(ny) + 0.5) * dp
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])
