"""Total-Lagrangian SPH elastic solid with a Saint Venant-Kirchhoff law and
multiplicative active-strain muscle actuation.

All gradients are taken in the fixed reference configuration; the
deformation gradient is reconstructed from displacement differences so any
uniform affine deformation is recovered exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .fluid import SolverBlowUp
from .grid import pairs_within
from .kernels import KernelModel, kernel_derivative

CFL_SOLID = 0.6

# Material tags of the particle sets.
TAG_RIGID = 0
TAG_BONE = 1
TAG_WHITE_MUSCLE = 2
TAG_RED_MUSCLE = 3


def lame_parameters(youngs_modulus: float, poisson_ratio: float) -> tuple[float, float]:
    """First and second Lame parameters from (E, nu); nu >= 0.5 is the
    incompressible limit and is rejected."""
    if not 0.0 <= poisson_ratio < 0.5:
        raise ValueError(f"Poisson ratio must be in [0, 0.5), got {poisson_ratio}")
    lam = youngs_modulus * poisson_ratio / ((1.0 + poisson_ratio) * (1.0 - 2.0 * poisson_ratio))
    mu = youngs_modulus / (2.0 * (1.0 + poisson_ratio))
    return lam, mu


@dataclass(frozen=True)
class ElasticMaterial:
    youngs_modulus: float
    poisson_ratio: float
    rho0: float
    lame_lambda: float = field(init=False)
    lame_mu: float = field(init=False)
    bulk_modulus: float = field(init=False)
    sound_speed: float = field(init=False)

    def __post_init__(self):
        lam, mu = lame_parameters(self.youngs_modulus, self.poisson_ratio)
        bulk = lam + 2.0 * mu / 3.0
        object.__setattr__(self, "lame_lambda", lam)
        object.__setattr__(self, "lame_mu", mu)
        object.__setattr__(self, "bulk_modulus", bulk)
        object.__setattr__(self, "sound_speed", math.sqrt(bulk / self.rho0))


@dataclass
class SolidState:
    """Structure-of-arrays elastic particle set in total-Lagrangian form."""

    pos0: np.ndarray  # (N, 2) reference positions, immutable
    pos: np.ndarray  # (N, 2)
    vel: np.ndarray  # (N, 2)
    vol0: np.ndarray  # (N,) reference volumes
    rho0: np.ndarray  # (N,) reference densities (per particle: mixed materials)
    rho: np.ndarray  # (N,)
    b0: np.ndarray  # (N, 2, 2) reference correction matrices
    F: np.ndarray  # (N, 2, 2) deformation gradient
    pk1: np.ndarray  # (N, 2, 2) first Piola-Kirchhoff stress
    tag: np.ndarray  # (N,) material tag

    @classmethod
    def from_positions(cls, pos0: np.ndarray, rho0: float, dp: float,
                       tag: int = TAG_RIGID) -> "SolidState":
        pos0 = np.asarray(pos0, dtype=np.float64).reshape(-1, 2).copy()
        n = pos0.shape[0]
        eye = np.tile(np.eye(2), (n, 1, 1))
        return cls(
            pos0=pos0,
            pos=pos0.copy(),
            vel=np.zeros((n, 2)),
            vol0=np.full(n, dp * dp),
            rho0=np.full(n, rho0),
            rho=np.full(n, rho0),
            b0=eye.copy(),
            F=eye.copy(),
            pk1=np.zeros((n, 2, 2)),
            tag=np.full(n, tag, dtype=np.int64),
        )

    @property
    def n(self) -> int:
        return self.pos0.shape[0]


@dataclass
class SolidPairs:
    """Reference-configuration pair structure, built once."""

    i: np.ndarray
    j: np.ndarray
    e0: np.ndarray  # (K, 2) unit vector from j to i in the reference state
    r0: np.ndarray
    wprime0: np.ndarray


def solid_pairs(state: SolidState, kernel: KernelModel) -> SolidPairs:
    idx = pairs_within(state.pos0, kernel.cutoff)
    i, j = idx[:, 0], idx[:, 1]
    d = state.pos0[i] - state.pos0[j]
    r = np.hypot(d[:, 0], d[:, 1])
    e = d / np.where(r == 0.0, 1.0, r)[:, None]
    return SolidPairs(i=i, j=j, e0=e, r0=r, wprime0=kernel_derivative(r, kernel))


def reference_correction(state: SolidState, pairs: SolidPairs) -> np.ndarray:
    """Reference correction matrices B0 = (-sum_j r_ij0 (x) grad0W V0_j)^-1.

    Isolated particles with a singular sum fall back to the identity with a
    warning. Run once after initialization; the result is stored on the
    state and also returned.
    """
    n = state.n
    a = np.zeros((n, 2, 2))
    grad = pairs.e0 * pairs.wprime0[:, None]
    rij = pairs.e0 * pairs.r0[:, None]
    outer_ij = -rij[:, :, None] * grad[:, None, :]
    np.add.at(a, pairs.i, outer_ij * state.vol0[pairs.j, None, None])
    # mirrored contribution: r_ji = -r_ij and grad0W_ji = -grad0W_ij
    np.add.at(a, pairs.j, outer_ij * state.vol0[pairs.i, None, None])
    b0 = np.empty_like(a)
    bad = 0
    for k in range(n):
        det = a[k, 0, 0] * a[k, 1, 1] - a[k, 0, 1] * a[k, 1, 0]
        if abs(det) < 1e-12:
            b0[k] = np.eye(2)
            bad += 1
        else:
            b0[k] = np.array([[a[k, 1, 1], -a[k, 0, 1]], [-a[k, 1, 0], a[k, 0, 0]]]) / det
    if bad:
        warnings.warn(f"{bad} solid particles have degenerate reference support; "
                      "using identity correction", stacklevel=2)
    state.b0 = b0
    return b0


def deformation_gradient(state: SolidState, pairs: SolidPairs) -> np.ndarray:
    """Deformation gradient from displacement differences:
    F = (-sum_j u_ij (x) grad0W V0_j) B0 + I.

    Exact for uniform affine deformations, including boundary particles,
    because the correction matrix inverts the same discrete sum.
    """
    n = state.n
    du = np.zeros((n, 2, 2))
    u = state.pos - state.pos0
    uij = u[pairs.i] - u[pairs.j]
    grad = pairs.e0 * pairs.wprime0[:, None]
    outer_ij = -uij[:, :, None] * grad[:, None, :]
    np.add.at(du, pairs.i, outer_ij * state.vol0[pairs.j, None, None])
    np.add.at(du, pairs.j, outer_ij * state.vol0[pairs.i, None, None])
    F = du @ state.b0 + np.eye(2)
    state.F = F
    return F


def solid_rates(state: SolidState, pairs: SolidPairs, gravity=None, body_accel=None,
                fsi_accel=None):
    """Density from det(F) and the momentum rate of the total-Lagrangian
    discretization. pk1 stresses and F must be current. Returns
    (rho (N,), dv_dt (N, 2)); inverted elements (det F <= 0) abort."""
    detF = state.F[:, 0, 0] * state.F[:, 1, 1] - state.F[:, 0, 1] * state.F[:, 1, 0]
    if np.any(detF <= 0.0):
        raise SolverBlowUp("solid element inversion: det(F) <= 0")
    state.rho = state.rho0 / detF
    n = state.n
    force = np.zeros((n, 2))
    grad = pairs.e0 * pairs.wprime0[:, None]
    pb = state.pk1 @ state.b0  # (N, 2, 2)
    stress_pair = pb[pairs.i] + pb[pairs.j]
    fij = np.einsum("kab,kb->ka", stress_pair, grad) * (state.vol0[pairs.i] * state.vol0[pairs.j])[:, None]
    np.add.at(force, pairs.i, fij)
    np.add.at(force, pairs.j, -fij)
    dv = force / (state.rho * state.vol0)[:, None]
    if gravity is not None:
        dv = dv + np.asarray(gravity, dtype=np.float64)
    if body_accel is not None:
        dv = dv + np.asarray(body_accel, dtype=np.float64)
    if fsi_accel is not None:
        dv = dv + np.asarray(fsi_accel, dtype=np.float64)
    return state.rho.copy(), dv


def integrate_solid_step(state: SolidState, dv_dt: np.ndarray, dt: float,
                         fixed: np.ndarray | None = None) -> None:
    """Kick-drift-kick update of the solid particles with the acceleration
    frozen over the step. ``fixed`` masks clamped particles (velocity zero,
    position held)."""
    state.vel += 0.5 * dt * dv_dt
    if fixed is not None:
        state.vel[fixed] = 0.0
    state.pos += dt * state.vel
    state.vel += 0.5 * dt * dv_dt
    if fixed is not None:
        state.vel[fixed] = 0.0
    if not np.isfinite(state.vel).all():
        raise SolverBlowUp("non-finite solid state after substep")


def green_strain(F: np.ndarray) -> np.ndarray:
    """Green-Lagrange strain (F^T F - I)/2."""
    F = np.asarray(F, dtype=np.float64)
    return 0.5 * (F.T @ F - np.eye(2))


def pk2_stress(strain: np.ndarray, lam: float, mu: float) -> np.ndarray:
    """Saint Venant-Kirchhoff second Piola-Kirchhoff stress
    S = lam tr(E) I + 2 mu E."""
    strain = np.asarray(strain, dtype=np.float64)
    return lam * np.trace(strain) * np.eye(2) + 2.0 * mu * strain


def strain_energy_density(strain: np.ndarray, lam: float, mu: float) -> float:
    """Saint Venant-Kirchhoff energy lam/2 tr(E)^2 + mu tr(E^2)."""
    strain = np.asarray(strain, dtype=np.float64)
    tr = np.trace(strain)
    return 0.5 * lam * tr * tr + mu * np.trace(strain @ strain)


def active_modify(F: np.ndarray, Fa: np.ndarray, S: np.ndarray) -> np.ndarray:
    """Active-strain first Piola-Kirchhoff stress P_t = (F Fa) S Fa*.

    S must be evaluated at the strain of the composed gradient F Fa; Fa*
    is the cofactor det(Fa) (Fa^-1)^T. det(Fa) <= 0 is rejected.
    """
    Fa = np.asarray(Fa, dtype=np.float64)
    det = Fa[0, 0] * Fa[1, 1] - Fa[0, 1] * Fa[1, 0]
    if det <= 0.0:
        raise ValueError(f"active deformation must preserve orientation, det = {det}")
    fa_star = np.array([[Fa[1, 1], -Fa[1, 0]], [-Fa[0, 1], Fa[0, 0]]])
    return (np.asarray(F) @ Fa) @ np.asarray(S) @ fa_star


def active_cofactor(Fa: np.ndarray) -> np.ndarray:
    """Fa* = det(Fa) (Fa^-1)^T."""
    Fa = np.asarray(Fa, dtype=np.float64)
    return np.array([[Fa[1, 1], -Fa[1, 0]], [-Fa[0, 1], Fa[0, 0]]])


def solid_timestep(speed_max: float, accel_max: float, cs: float, kernel: KernelModel) -> float:
    """Stable structure step 0.6 min(h / (c_s + v_max), sqrt(h / a_max))."""
    bound_v = kernel.h / (cs + speed_max)
    bound_a = math.sqrt(kernel.h / accel_max) if accel_max > 0.0 else math.inf
    return CFL_SOLID * min(bound_v, bound_a)
