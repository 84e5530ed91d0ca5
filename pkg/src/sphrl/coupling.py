"""Fluid-structure force exchange through the one-sided Riemann wall
treatment, plus the damped revolute hinge that drives the wave-surge flap.

The hinge replaces a general multibody solver: translational degrees of
freedom are locked, the flap rotates about a fixed pivot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fluid import FluidMaterial, RiemannFace, linearised_riemann
from .kernels import KernelModel, kernel_derivative


def wall_extrapolated_pressure(p_i: float, rho_i: float, pos_i, pos_a, normal_a,
                               accel_a, gravity) -> float:
    """Wall pressure of the one-sided Riemann problem.

    Extrapolates the fluid pressure across the gap along the wall normal;
    the clamp removes the term when the wall accelerates away from the
    fluid faster than the effective gravity presses it on (separation).
    ``normal_a`` points from the structure into the fluid.
    """
    n = np.asarray(normal_a, dtype=np.float64)
    g_eff = np.asarray(gravity, dtype=np.float64) - np.asarray(accel_a, dtype=np.float64)
    # projection onto the fluid-to-wall direction (-n): positive when the
    # effective gravity presses the fluid against this wall
    press = max(0.0, -float(g_eff @ n))
    gap = float((np.asarray(pos_i) - np.asarray(pos_a)) @ n)
    return p_i + rho_i * press * gap


def wall_riemann_pressure(p_i: float, rho_i: float, vel_i, pos_i, mat: FluidMaterial,
                          pos_a, normal_a, vbar_a, abar_a, rho_a: float,
                          gravity, Bi: np.ndarray | None = None):
    """One-sided Riemann solution against a wall particle.

    Returns (p_a, solution) where p_a is the extrapolated wall pressure and
    the solution carries U*, the interface pressure matrix and the limiter.
    The wall-side state reflects the fluid velocity about the averaged wall
    velocity; the wall-side correction matrix is the identity.
    """
    n = np.asarray(normal_a, dtype=np.float64)
    vel_i = np.asarray(vel_i, dtype=np.float64)
    vbar_a = np.asarray(vbar_a, dtype=np.float64)
    p_a = wall_extrapolated_pressure(p_i, rho_i, pos_i, pos_a, n, abar_a, gravity)
    # wall ghost state: fluid velocity mirrored about the averaged wall
    # velocity, so an approaching flow meets an approaching wall state
    face = RiemannFace(
        rhoL=rho_i, rhoR=rho_a,
        UL=-float(vel_i @ n),
        UR=-float((2.0 * vbar_a - vel_i) @ n),
        PL=p_i, PR=p_a,
        cL=mat.sound_speed, cR=mat.sound_speed,
    )
    return p_a, linearised_riemann(face, Bi=Bi, Bj=np.eye(2))


def fsi_pair_forces(state_pos_i, state_vel_i, p_i: float, rho_i: float, mass_i: float,
                    mat: FluidMaterial, kernel: KernelModel,
                    solid_pos: np.ndarray, solid_normals: np.ndarray,
                    solid_vbar: np.ndarray, solid_abar: np.ndarray,
                    solid_vol: np.ndarray, solid_rho: np.ndarray,
                    gravity, Bi: np.ndarray | None = None):
    """Structure force on one fluid particle and the exact per-solid-particle
    reactions.

    Returns (a_sf (2,), reaction_pressure (S, 2), reaction_viscous (S, 2)).
    The reactions are the negated pair forces, so fluid and structure sums
    cancel identically.
    """
    pos_i = np.asarray(state_pos_i, dtype=np.float64)
    vel_i = np.asarray(state_vel_i, dtype=np.float64)
    solid_pos = np.asarray(solid_pos, dtype=np.float64).reshape(-1, 2)
    s = solid_pos.shape[0]
    vol_i = mass_i / rho_i
    force = np.zeros(2)
    react_p = np.zeros((s, 2))
    react_v = np.zeros((s, 2))
    for a in range(s):
        d = pos_i - solid_pos[a]
        r = float(np.hypot(d[0], d[1]))
        if r >= kernel.cutoff or r == 0.0:
            continue
        e = d / r
        wp = kernel_derivative(r, kernel)
        grad = e * wp
        _, sol = wall_riemann_pressure(
            p_i, rho_i, vel_i, pos_i, mat, solid_pos[a], solid_normals[a],
            solid_vbar[a], solid_abar[a], solid_rho[a], gravity, Bi=Bi,
        )
        fp = -2.0 * (sol.pstar @ grad) * vol_i * solid_vol[a]
        fv = 2.0 * mat.dynamic_viscosity * (vel_i - solid_vbar[a]) / r * wp * vol_i * solid_vol[a]
        force += fp + fv
        react_p[a] = -fp
        react_v[a] = -fv
    return force / mass_i, react_p, react_v


def wall_continuity_rate(vel_i, rho_i: float, sol_ustar: float, face_UL: float,
                         face_UR: float, vbar_a, normal_a, grad, vol_a: float) -> float:
    """Continuity contribution of one wall pair, using the interface velocity
    reconstructed along the wall normal."""
    n = np.asarray(normal_a, dtype=np.float64)
    vstar = np.asarray(vbar_a, dtype=np.float64) - (sol_ustar - 0.5 * (face_UL + face_UR)) * n
    return 2.0 * rho_i * float((np.asarray(vel_i) - vstar) @ np.asarray(grad)) * vol_a


def averaged_solid_velocity(vel_snapshots: np.ndarray, dt_total: float):
    """Time-mean velocity and mean acceleration over one fluid acoustic step.

    ``vel_snapshots`` holds the S+1 velocity states at the solid substep
    boundaries, shape (S+1, N, 2); substeps are assumed equal length.
    """
    snaps = np.asarray(vel_snapshots, dtype=np.float64)
    if snaps.ndim == 2:
        snaps = snaps[:, None, :]
    if snaps.shape[0] < 2:
        return snaps[0].copy(), np.zeros_like(snaps[0])
    vbar = (0.5 * (snaps[:-1] + snaps[1:])).mean(axis=0)
    abar = (snaps[-1] - snaps[0]) / dt_total
    return vbar, abar


def total_force_torque(forces: np.ndarray, positions: np.ndarray, pivot):
    """Net force and the torque of per-particle forces about a pivot."""
    forces = np.asarray(forces, dtype=np.float64).reshape(-1, 2)
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    pivot = np.asarray(pivot, dtype=np.float64)
    f_net = forces.sum(axis=0)
    arm = positions - pivot
    tau = float(np.sum(arm[:, 0] * forces[:, 1] - arm[:, 1] * forces[:, 0]))
    return f_net, tau


@dataclass
class RigidBodyState:
    """Flap hinged at a fixed pivot with a rotational power-take-off damper."""

    pivot: np.ndarray
    moment_of_inertia: float  # about the pivot
    mass: float
    r_g0: np.ndarray  # center of mass at theta = 0
    k_d: float = 0.0  # N m s / rad
    theta: float = 0.0
    omega: float = 0.0
    dissipated: float = 0.0

    def __post_init__(self):
        self.pivot = np.asarray(self.pivot, dtype=np.float64)
        self.r_g0 = np.asarray(self.r_g0, dtype=np.float64)
        if self.moment_of_inertia <= 0.0:
            raise ValueError("moment of inertia must be positive")
        if self.k_d < 0.0:
            raise ValueError("damping coefficient must be non-negative")

    def center_of_mass(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        rel = self.r_g0 - self.pivot
        return self.pivot + np.array([c * rel[0] - s * rel[1], s * rel[0] + c * rel[1]])

    def gravity_torque(self, gravity) -> float:
        g = np.asarray(gravity, dtype=np.float64)
        arm = self.center_of_mass() - self.pivot
        return self.mass * (arm[0] * g[1] - arm[1] * g[0])


def integrate_hinged_body(body: RigidBodyState, tau_fluid: float, dt: float,
                          gravity=(0.0, 0.0)) -> None:
    """Advance the damped hinge J dOmega/dt = tau - k_d Omega over dt.

    The linear damping part is integrated exactly (matrix exponential of the
    scalar ODE), so free decay matches exp(-k_d t / J) to roundoff; the
    angle follows with the trapezoidal mean of the angular velocity. The
    energy removed by the damper accumulates in ``body.dissipated``.
    """
    tau = tau_fluid + body.gravity_torque(gravity)
    a = body.k_d / body.moment_of_inertia
    b = tau / body.moment_of_inertia
    if a * dt > 1e-12:
        decay = -math.expm1(-a * dt)  # 1 - exp(-a dt)
        omega_new = body.omega * (1.0 - decay) + (b / a) * decay
    else:
        omega_new = body.omega + b * dt
    omega_mid = 0.5 * (body.omega + omega_new)
    body.theta += dt * omega_mid
    body.dissipated += body.k_d * omega_mid * omega_mid * dt
    body.omega = omega_new


def rotate_about(points: np.ndarray, pivot, theta: float) -> np.ndarray:
    """Rigid rotation of points about a pivot."""
    pivot = np.asarray(pivot, dtype=np.float64)
    rel = np.asarray(points, dtype=np.float64) - pivot
    c, s = math.cos(theta), math.sin(theta)
    return pivot + np.column_stack([c * rel[:, 0] - s * rel[:, 1], s * rel[:, 0] + c * rel[:, 1]])


def rigid_velocity(points: np.ndarray, pivot, omega: float) -> np.ndarray:
    """Velocity field omega x (r - pivot) of a body rotating about a pivot."""
    rel = np.asarray(points, dtype=np.float64) - np.asarray(pivot, dtype=np.float64)
    return omega * np.column_stack([-rel[:, 1], rel[:, 0]])
