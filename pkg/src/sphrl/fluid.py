"""Weakly compressible SPH fluid: equation of state, linearised Riemann
fluxes, continuity/momentum rates, dual-criteria time steps, density
reinitialization, transport velocity, free-surface detection and the open
boundary / damping-zone treatments.

These are the reference implementations; the simulation loop runs the
compiled equivalents from :mod:`sphrl.loops`, which are tested against the
functions here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .grid import build_cell_grid, pairs_within
from .kernels import (
    KernelModel,
    kernel_derivative,
    kernel_value,
    reference_kernel_sum,
)

CFL_ADVECTION = 0.25
CFL_ACOUSTIC = 0.6

# Position-divergence threshold of the surface detector: interior particles
# evaluate near the spatial dimension d = 2, surface particles clearly below.
SURFACE_DIVERGENCE_THRESHOLD = 0.75 * 2.0

DAMPING_REDUCTION = 5.0


class SolverBlowUp(RuntimeError):
    """Raised when particle state turns non-finite (simulation blow-up)."""


@dataclass(frozen=True)
class FluidMaterial:
    """Weakly compressible fluid with sound speed pegged to 10x the
    anticipated maximum velocity so density stays within ~1% of rho0."""

    rho0: float
    v_max: float
    dynamic_viscosity: float = 0.0
    sound_speed: float = field(init=False)

    def __post_init__(self):
        if self.rho0 <= 0.0:
            raise ValueError("reference density must be positive")
        if self.dynamic_viscosity < 0.0:
            raise ValueError("viscosity must be non-negative")
        object.__setattr__(self, "sound_speed", 10.0 * self.v_max)

    @property
    def kinematic_viscosity(self) -> float:
        return self.dynamic_viscosity / self.rho0


def sloshing_speed_scale(g: float, depth: float) -> float:
    """Anticipated maximum velocity 2*sqrt(g*h) of the gravity-driven cases."""
    return 2.0 * math.sqrt(g * depth)


@dataclass
class FluidState:
    """Structure-of-arrays particle set for the fluid phase."""

    pos: np.ndarray  # (N, 2) m
    vel: np.ndarray  # (N, 2) m/s
    tv_offset: np.ndarray  # (N, 2) m/s, transport velocity minus velocity
    rho: np.ndarray  # (N,) kg/m^3
    p: np.ndarray  # (N,) Pa
    mass: np.ndarray  # (N,) kg, constant per particle
    surface: np.ndarray  # (N,) bool
    bcorr: np.ndarray  # (N, 2, 2) weighted kernel gradient correction

    @classmethod
    def from_positions(cls, pos: np.ndarray, mat: FluidMaterial, dp: float) -> "FluidState":
        pos = np.asarray(pos, dtype=np.float64).reshape(-1, 2).copy()
        n = pos.shape[0]
        eye = np.tile(np.eye(2), (n, 1, 1))
        return cls(
            pos=pos,
            vel=np.zeros((n, 2)),
            tv_offset=np.zeros((n, 2)),
            rho=np.full(n, mat.rho0),
            p=np.zeros(n),
            mass=np.full(n, mat.rho0 * dp * dp),
            surface=np.zeros(n, dtype=bool),
            bcorr=eye,
        )

    @property
    def n(self) -> int:
        return self.pos.shape[0]

    @property
    def vol(self) -> np.ndarray:
        """Current particle volumes m/rho."""
        return self.mass / self.rho

    @property
    def transport_velocity(self) -> np.ndarray:
        return self.vel + self.tv_offset


@dataclass
class FluidPairs:
    """Precomputed pair geometry for one neighbor configuration."""

    i: np.ndarray  # (K,)
    j: np.ndarray  # (K,)
    e: np.ndarray  # (K, 2) unit vector from j to i
    r: np.ndarray  # (K,) separation
    w: np.ndarray  # (K,) kernel value
    wprime: np.ndarray  # (K,) radial kernel derivative


def fluid_pairs(state: FluidState, kernel: KernelModel) -> FluidPairs:
    """All interacting pairs (i < j) of the current configuration."""
    idx = pairs_within(state.pos, kernel.cutoff)
    i, j = idx[:, 0], idx[:, 1]
    d = state.pos[i] - state.pos[j]
    r = np.hypot(d[:, 0], d[:, 1])
    e = d / np.where(r == 0.0, 1.0, r)[:, None]
    return FluidPairs(i=i, j=j, e=e, r=r, w=kernel_value(r, kernel), wprime=kernel_derivative(r, kernel))


def eos_pressure(rho, mat: FluidMaterial):
    """Artificial equation of state p = c^2 (rho - rho0); may be negative."""
    return mat.sound_speed**2 * (np.asarray(rho, dtype=np.float64) - mat.rho0)


class RiemannFace(NamedTuple):
    """Left/right initial states of the one-dimensional Riemann problem."""

    rhoL: float
    rhoR: float
    UL: float
    UR: float
    PL: float
    PR: float
    cL: float
    cR: float


class RiemannSolution(NamedTuple):
    ustar: float
    pstar: np.ndarray  # (2, 2); scalar pressure times I when both B are I
    beta: float


def linearised_riemann(face: RiemannFace, Bi: np.ndarray | None = None,
                       Bj: np.ndarray | None = None) -> RiemannSolution:
    """Low-dissipation linearised Riemann solution.

    The interface pressure carries the gradient-correction matrices of both
    sides, so it is returned as a 2x2 matrix that later multiplies the
    kernel gradient; with identity corrections it reduces to P* I.
    """
    Bi = np.eye(2) if Bi is None else np.asarray(Bi, dtype=np.float64)
    Bj = np.eye(2) if Bj is None else np.asarray(Bj, dtype=np.float64)
    zL = face.rhoL * face.cL
    zR = face.rhoR * face.cR
    zsum = zL + zR
    cbar = zsum / (face.rhoL + face.rhoR)
    du = face.UL - face.UR
    beta = min(3.0 * max(du, 0.0) / cbar, 1.0)
    ustar = (zL * face.UL + zR * face.UR + face.PL - face.PR) / zsum
    pstar = (zL * face.PR * Bj + zR * face.PL * Bi + zL * zR * beta * du * np.eye(2)) / zsum
    return RiemannSolution(ustar=ustar, pstar=pstar, beta=beta)


def fluid_rates(state: FluidState, pairs: FluidPairs, mat: FluidMaterial,
                body_accel: np.ndarray | None = None,
                fsi_accel: np.ndarray | None = None,
                gravity: np.ndarray | None = None):
    """Continuity and momentum rates of the Riemann-flux discretization.

    Pressures and correction matrices must be current. Returns
    (drho_dt (N,), dv_dt (N, 2)).
    """
    n = state.n
    drho = np.zeros(n)
    force = np.zeros((n, 2))
    vol = state.vol
    c = mat.sound_speed
    mu = mat.dynamic_viscosity
    for k in range(pairs.i.shape[0]):
        i = int(pairs.i[k])
        j = int(pairs.j[k])
        e = pairs.e[k]
        grad = e * pairs.wprime[k]
        face = RiemannFace(
            rhoL=state.rho[i], rhoR=state.rho[j],
            UL=-float(state.vel[i] @ e), UR=-float(state.vel[j] @ e),
            PL=state.p[i], PR=state.p[j], cL=c, cR=c,
        )
        sol = linearised_riemann(face, state.bcorr[i], state.bcorr[j])
        # U projections live along -e_ij: flip the sign when reconstructing
        # the interface velocity vector
        vstar = 0.5 * (state.vel[i] + state.vel[j]) - (sol.ustar - 0.5 * (face.UL + face.UR)) * e
        # force form: antisymmetric exchange, divided by mass afterwards
        fp = -2.0 * (sol.pstar @ grad) * vol[i] * vol[j]
        fv = 2.0 * mu * (state.vel[i] - state.vel[j]) / pairs.r[k] * pairs.wprime[k] * vol[i] * vol[j]
        force[i] += fp + fv
        force[j] -= fp + fv
        drho[i] += 2.0 * state.rho[i] * float((state.vel[i] - vstar) @ grad) * vol[j]
        drho[j] += 2.0 * state.rho[j] * float((state.vel[j] - vstar) @ (-grad)) * vol[i]
    dv = force / state.mass[:, None]
    if gravity is not None:
        dv += np.asarray(gravity, dtype=np.float64)
    if body_accel is not None:
        dv += np.asarray(body_accel, dtype=np.float64)
    if fsi_accel is not None:
        dv += np.asarray(fsi_accel, dtype=np.float64)
    return drho, dv


@dataclass(frozen=True)
class DualTimestep:
    """Advection (outer) and acoustic (inner) step sizes."""

    dt_advection: float
    dt_acoustic: float


def timestep_sizes(state: FluidState, mat: FluidMaterial, kernel: KernelModel) -> DualTimestep:
    """Dual-criteria step sizes; the anticipated v_max and the current peak
    speed both bound the denominators."""
    speed = float(np.max(np.hypot(state.vel[:, 0], state.vel[:, 1]))) if state.n else 0.0
    v = max(mat.v_max, speed)
    nu = mat.kinematic_viscosity
    visc_bound = kernel.h**2 / nu if nu > 0.0 else math.inf
    dt_ad = CFL_ADVECTION * min(kernel.h / v, visc_bound)
    dt_ac = CFL_ACOUSTIC * kernel.h / (mat.sound_speed + v)
    return DualTimestep(dt_advection=dt_ad, dt_acoustic=dt_ac)


def kernel_sums(state: FluidState, pairs: FluidPairs, kernel: KernelModel):
    """Per-particle kernel sum (self included) and position divergence."""
    n = state.n
    wsum = np.full(n, kernel_value(0.0, kernel))
    div = np.zeros(n)
    vol = state.vol
    np.add.at(wsum, pairs.i, pairs.w)
    np.add.at(wsum, pairs.j, pairs.w)
    # (r_j - r_i) . gradW_ij = -r * W'
    contrib = -pairs.r * pairs.wprime
    np.add.at(div, pairs.i, contrib * vol[pairs.j])
    np.add.at(div, pairs.j, contrib * vol[pairs.i])
    return wsum, div


def detect_free_surface(state: FluidState, pairs: FluidPairs, kernel: KernelModel,
                        extra_divergence: np.ndarray | None = None) -> np.ndarray:
    """Flag particles whose position divergence falls below 0.75 d."""
    _, div = kernel_sums(state, pairs, kernel)
    if extra_divergence is not None:
        div = div + extra_divergence
    return div < SURFACE_DIVERGENCE_THRESHOLD


def reinitialize_density(state: FluidState, pairs: FluidPairs, kernel: KernelModel,
                         dp: float, rho0: float, extra_wsum: np.ndarray | None = None,
                         wsum_reference: float | None = None) -> np.ndarray:
    """Density reinitialization at the advection step.

    Inner particles take rho0 * sum(W) / sum(W0); surface particles keep the
    larger of the integrated density and the summation. Returns the
    summation densities (used by the free-stream correction). Surface flags
    must be current.
    """
    if wsum_reference is None:
        wsum_reference = reference_kernel_sum(dp, kernel)
    wsum, _ = kernel_sums(state, pairs, kernel)
    if extra_wsum is not None:
        wsum = wsum + extra_wsum
    rho_sum = rho0 * wsum / wsum_reference
    state.rho = np.where(state.surface, np.maximum(state.rho, rho_sum), rho_sum)
    return rho_sum


def transport_velocity_rate(state: FluidState, pairs: FluidPairs, p0: float) -> np.ndarray:
    """Background-pressure acceleration applied to the advected position
    velocity only; the momentum velocity is untouched."""
    accel = np.zeros((state.n, 2))
    vol = state.vol
    grad = pairs.e * pairs.wprime[:, None]
    np.add.at(accel, pairs.i, -2.0 * p0 * grad * vol[pairs.j, None] / state.rho[pairs.i, None])
    np.add.at(accel, pairs.j, 2.0 * p0 * grad * vol[pairs.i, None] / state.rho[pairs.j, None])
    return accel


def free_stream_correct(state: FluidState, v_in: float, rho_summation: np.ndarray,
                        rho0: float) -> None:
    """Open-boundary correction of surface particles: density blended toward
    the plain summation value, x-velocity relaxed toward the inlet velocity
    with weight min(rho, rho0)/rho0."""
    mask = state.surface
    if not mask.any():
        return
    rho_f = state.rho[mask]
    rho_n = rho_summation[mask]
    state.rho[mask] = rho_n + np.maximum(0.0, rho_f - rho_n) * rho0 / rho_f
    weight = np.minimum(state.rho[mask], rho0) / rho0
    state.vel[mask, 0] += (v_in - state.vel[mask, 0]) * weight


def apply_damping_zone(state: FluidState, x0: float, x1: float, dt_ac: float,
                       alpha: float = DAMPING_REDUCTION) -> None:
    """Velocity reduction ramping from 0 at the zone entrance x0 to its
    maximum at the end wall x1; magnitudes never increase."""
    mask = (state.pos[:, 0] >= x0) & (state.pos[:, 0] <= x1)
    if not mask.any():
        return
    frac = (state.pos[mask, 0] - x0) / (x1 - x0)
    factor = np.maximum(1.0 - alpha * dt_ac * frac, 0.0)
    state.vel[mask] *= factor[:, None]


def acoustic_substep(state: FluidState, drho_dt: np.ndarray, dv_dt: np.ndarray, dt: float) -> None:
    """Kick-drift-kick update of (rho, v, r) with rates frozen over the step;
    positions drift with the transport velocity."""
    state.vel += 0.5 * dt * dv_dt
    state.rho += 0.5 * dt * drho_dt
    state.pos += dt * (state.vel + state.tv_offset)
    state.vel += 0.5 * dt * dv_dt
    state.rho += 0.5 * dt * drho_dt
    if not (np.isfinite(state.vel).all() and np.isfinite(state.rho).all()):
        raise SolverBlowUp("non-finite fluid state after acoustic substep")
