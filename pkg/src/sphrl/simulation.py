"""Coupled fluid-structure simulation driver.

Owns the particle arrays, the dual-criteria stepping (outer advection steps
that rebuild neighbor configuration, correction matrices and reinitialized
densities; inner acoustic steps that relax pressure, density and positions)
and the per-body solid updates: static and prescribed walls, velocity-
controlled rigid plates, the damped hinged flap and total-Lagrangian
elastic bodies with optional muscle activation.

Hot paths run the compiled kernels from :mod:`sphrl.loops` on flat arrays;
body bookkeeping stays in numpy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import loops
from .coupling import RigidBodyState, integrate_hinged_body, rigid_velocity, rotate_about
from .fluid import CFL_ACOUSTIC, CFL_ADVECTION, FluidMaterial, SolverBlowUp
from .grid import pairs_within
from .kernels import WKGC_ALPHA, fluid_kernel, kernel_derivative, reference_kernel_sum, solid_kernel
from .solid import CFL_SOLID


@dataclass
class FreeStreamSpec:
    """Open-box channel: particles recycle from outlet to inlet and surface
    particles relax toward the inlet velocity."""

    v_in: float
    x0: float
    x1: float
    y0: float
    y1: float


def hydrostatic_column(x0: float, x1: float, y_bottom: float, depth: float, dp: float,
                       g_mag: float, sound_speed: float):
    """Water column pre-compressed to hydrostatic equilibrium.

    Particle rows shift down by the integrated compressive strain
    eps(y) = g (h - y) / c^2, so the summation density read from the lattice
    reproduces the hydrostatic pressure from the first advection step.
    Returns (positions, densities).
    """
    nx = max(int(round((x1 - x0) / dp)), 0)
    ny = max(int(round(depth / dp)), 0)
    xs = x0 + (np.arange(nx) + 0.5) * dp
    eta = (np.arange(ny) + 0.5) * dp  # height above the bottom, uncompressed
    coef = g_mag / sound_speed**2
    eta_c = eta - coef * (depth * eta - 0.5 * eta**2)
    rho_row = 1.0 + coef * (depth - eta)
    gx, gy = np.meshgrid(xs, y_bottom + eta_c, indexing="ij")
    pos = np.column_stack([gx.ravel(), gy.ravel()])
    rho = np.tile(rho_row, nx)
    return pos, rho


class SolidBody:
    """Base of all structure bodies; owns a slice of the global wall arrays."""

    kind = "static"

    def __init__(self, name: str, pos: np.ndarray, dp_s: float, rho_contact: float):
        self.name = name
        self.layout = np.asarray(pos, dtype=np.float64).reshape(-1, 2).copy()
        self.n = self.layout.shape[0]
        self.dp_s = dp_s
        self.rho_contact = rho_contact
        self.start = 0  # assigned by the simulation

    @property
    def sl(self) -> slice:
        return slice(self.start, self.start + self.n)


class StaticBody(SolidBody):
    kind = "static"


class PrescribedBody(SolidBody):
    """Rigid body translated by a prescribed motion(t) -> (disp, vel, acc)."""

    kind = "prescribed"

    def __init__(self, name, pos, dp_s, rho_contact,
                 motion: Callable[[float], tuple[np.ndarray, np.ndarray, np.ndarray]]):
        super().__init__(name, pos, dp_s, rho_contact)
        self.motion = motion


class ControlledBody(SolidBody):
    """Rigid body whose translational velocity is commanded externally
    (the actively moved baffles). velocity_fn(t) returns the commanded
    velocity; while unset the body holds still."""

    kind = "controlled"

    def __init__(self, name, pos, dp_s, rho_contact):
        super().__init__(name, pos, dp_s, rho_contact)
        self.velocity_fn: Callable[[float], np.ndarray] | None = None
        self.displacement = np.zeros(2)


class HingedBody(SolidBody):
    """Rigid flap rotating about a fixed pivot against a controllable
    power-take-off damper."""

    kind = "hinged"

    def __init__(self, name, pos, dp_s, rho_contact, pivot, k_d: float = 0.0):
        super().__init__(name, pos, dp_s, rho_contact)
        mass_per = rho_contact * dp_s * dp_s
        mass = mass_per * self.n
        rel = self.layout - np.asarray(pivot, dtype=np.float64)
        j0 = float(mass_per * np.sum(rel[:, 0] ** 2 + rel[:, 1] ** 2))
        r_g0 = self.layout.mean(axis=0)
        self.rigid = RigidBodyState(pivot=np.asarray(pivot, dtype=np.float64),
                                    moment_of_inertia=j0, mass=mass, r_g0=r_g0, k_d=k_d)
        self.kd_fn: Callable[[float], float] | None = None
        self.normals0: np.ndarray | None = None  # filled at assembly
        self.torque_fluid = 0.0  # last acoustic step, for probes


class ElasticBody(SolidBody):
    """Total-Lagrangian elastic body, optionally muscle-driven."""

    kind = "elastic"

    def __init__(self, name, pos, dp_s, lam, mu, rho0, fixed=None, fiber_axis: int = 0,
                 active_fn: Callable[[float, "ElasticBody"], np.ndarray] | None = None,
                 body_accel_fn: Callable[[float], np.ndarray] | None = None):
        rho0 = np.asarray(rho0, dtype=np.float64) * np.ones(len(pos))
        super().__init__(name, pos, dp_s, float(rho0.max()))
        self.lam = np.asarray(lam, dtype=np.float64) * np.ones(self.n)
        self.mu = np.asarray(mu, dtype=np.float64) * np.ones(self.n)
        self.rho0 = rho0
        self.fixed = np.zeros(self.n, dtype=bool) if fixed is None else np.asarray(fixed, dtype=bool)
        self.fiber_axis = fiber_axis
        self.active_fn = active_fn
        self.body_accel_fn = body_accel_fn
        self.kernel = solid_kernel(dp_s)
        self.vol0 = np.full(self.n, dp_s * dp_s)
        self.mass = self.rho0 * self.vol0
        bulk = self.lam + 2.0 * self.mu / 3.0
        self.cs_max = float(np.sqrt(bulk / rho0).max())
        # reference pair structure
        idx = pairs_within(self.layout, self.kernel.cutoff)
        d = self.layout[idx[:, 0]] - self.layout[idx[:, 1]]
        r = np.hypot(d[:, 0], d[:, 1])
        self.ss_i = np.ascontiguousarray(idx[:, 0])
        self.ss_j = np.ascontiguousarray(idx[:, 1])
        self.e0x = np.ascontiguousarray(d[:, 0] / r)
        self.e0y = np.ascontiguousarray(d[:, 1] / r)
        self.r0 = np.ascontiguousarray(r)
        self.wp0 = np.ascontiguousarray(kernel_derivative(r, self.kernel))
        # reference correction matrices (flat rows)
        self.b0 = np.zeros((self.n, 4))
        a = np.zeros((self.n, 2, 2))
        grad = np.column_stack([self.e0x, self.e0y]) * self.wp0[:, None]
        rij = np.column_stack([self.e0x, self.e0y]) * r[:, None]
        outer = -rij[:, :, None] * grad[:, None, :]
        np.add.at(a, self.ss_i, outer * self.vol0[self.ss_j, None, None])
        np.add.at(a, self.ss_j, outer * self.vol0[self.ss_i, None, None])
        for k in range(self.n):
            det = a[k, 0, 0] * a[k, 1, 1] - a[k, 0, 1] * a[k, 1, 0]
            if abs(det) < 1e-12:
                self.b0[k] = (1.0, 0.0, 0.0, 1.0)
            else:
                self.b0[k] = (a[k, 1, 1] / det, -a[k, 0, 1] / det,
                              -a[k, 1, 0] / det, a[k, 0, 0] / det)
        # work state
        self.F = np.tile(np.array([1.0, 0.0, 0.0, 1.0]), (self.n, 1))
        self.pb = np.zeros((self.n, 4))
        self.detf = np.ones(self.n)
        self.fa1 = np.ones(self.n)
        self.fa2 = np.ones(self.n)
        self.ea = np.zeros(self.n)  # current active strain per particle
        self.accel = np.zeros((self.n, 2))
        self.last_accel_max = 0.0

    def active_gradients(self, t: float) -> None:
        """Refresh the diagonal active deformation from the strain field."""
        if self.active_fn is None:
            return
        ea = self.active_fn(t, self)
        self.ea = ea
        stretch = np.sqrt(np.maximum(1.0 + 2.0 * ea, 1e-6))
        if self.fiber_axis == 0:
            self.fa1, self.fa2 = stretch, np.ones(self.n)
        else:
            self.fa1, self.fa2 = np.ones(self.n), stretch


# debug toggles used while bisecting instabilities; stay True in production
WALL_CONTINUITY = True
USE_WKGC = True
REINIT = True


class Simulation:
    """Weakly compressible SPH fluid coupled to rigid and elastic bodies."""

    def __init__(self, dp: float, mat: FluidMaterial, gravity, fluid_pos: np.ndarray,
                 bodies: list[SolidBody] | None = None,
                 external_accel: Callable[[float], np.ndarray] | None = None,
                 damping_zone: tuple[float, float] | None = None,
                 transport_p0: float = 0.0,
                 free_stream: FreeStreamSpec | None = None,
                 relax_until: float = 0.0, relax_rate: float = 5.0,
                 beta_floor: float = 0.1, reinit_blend: float = 1.0):
        self.dp = dp
        self.mat = mat
        self.gravity = np.asarray(gravity, dtype=np.float64)
        self.kernel = fluid_kernel(dp)
        self.wsum_ref = reference_kernel_sum(dp, self.kernel)
        self.external_accel = external_accel
        self.damping_zone = damping_zone
        self.transport_p0 = transport_p0
        self.free_stream = free_stream
        # start-up relaxation: uniform velocity damping that removes the
        # cold-start acoustic ringing before the physics of interest
        self.relax_until = relax_until
        self.relax_rate = relax_rate
        # minimum interface dissipation of the limited Riemann solver,
        # active on approaching pairs only
        self.beta_floor = beta_floor
        # fraction of the summation-density correction applied per window;
        # below 1 the reinitialization acts as a low-pass filter
        self.reinit_blend = reinit_blend
        self.t = 0.0
        self.n_advection_steps = 0

        fluid_pos = np.asarray(fluid_pos, dtype=np.float64).reshape(-1, 2)
        nf = fluid_pos.shape[0]
        self.nf = nf
        self.f_pos = fluid_pos.copy()
        self.f_vx = np.zeros(nf)
        self.f_vy = np.zeros(nf)
        self.f_tvx = np.zeros(nf)  # transport velocity offset
        self.f_tvy = np.zeros(nf)
        self.f_rho = np.full(nf, mat.rho0)
        self.f_p = np.zeros(nf)
        self.f_mass = np.full(nf, mat.rho0 * dp * dp)
        self.f_vol = self.f_mass / self.f_rho
        self.f_surf = np.zeros(nf, dtype=bool)
        self.f_b = np.tile(np.array([1.0, 0.0, 0.0, 1.0]), (nf, 1))
        if free_stream is not None:
            self.f_vx[:] = free_stream.v_in

        self.bodies = list(bodies or [])
        ns = 0
        for body in self.bodies:
            body.start = ns
            ns += body.n
        self.ns = ns
        self.s_pos = np.zeros((ns, 2))
        self.s_vx = np.zeros(ns)
        self.s_vy = np.zeros(ns)
        self.s_vbx = np.zeros(ns)  # averaged velocity over the last acoustic step
        self.s_vby = np.zeros(ns)
        self.s_abx = np.zeros(ns)  # averaged acceleration
        self.s_aby = np.zeros(ns)
        self.s_nx = np.zeros(ns)
        self.s_ny = np.zeros(ns)
        self.s_vol = np.zeros(ns)
        self.s_rho = np.zeros(ns)  # contact density of the Riemann wall state
        self.react_px = np.zeros(ns)
        self.react_py = np.zeros(ns)
        self.react_vx = np.zeros(ns)
        self.react_vy = np.zeros(ns)
        for body in self.bodies:
            sl = body.sl
            self.s_pos[sl] = body.layout
            self.s_vol[sl] = body.dp_s * body.dp_s
            if isinstance(body, ElasticBody):
                self.s_rho[sl] = body.rho0
            else:
                self.s_rho[sl] = body.rho_contact
        self._init_normals()

        # combined arrays for the pair builder
        ntot = nf + ns
        self.all_pos = np.zeros((ntot, 2))
        self.is_fluid = np.zeros(ntot, dtype=bool)
        self.is_fluid[:nf] = True

        # pair buffers, grown on demand
        self._alloc_pairs(max(64 * nf, 1024), max(16 * nf, 1024))
        self.a_mat = np.zeros((nf, 4))
        self.wsum = np.zeros(nf)
        self.wsum_wall = np.zeros(nf)
        self.div = np.zeros(nf)
        self.force_x = np.zeros(nf)
        self.force_y = np.zeros(nf)
        self.drho = np.zeros(nf)
        self.tv_ax = np.zeros(nf)
        self.tv_ay = np.zeros(nf)
        self.n_ff = 0
        self.n_fs = 0

    # ------------------------------------------------------------------ setup

    def _alloc_pairs(self, cap_ff: int, cap_fs: int) -> None:
        self.ff_i = np.zeros(cap_ff, dtype=np.int64)
        self.ff_j = np.zeros(cap_ff, dtype=np.int64)
        self.ff_ex = np.zeros(cap_ff)
        self.ff_ey = np.zeros(cap_ff)
        self.ff_rr = np.zeros(cap_ff)
        self.ff_w = np.zeros(cap_ff)
        self.ff_wp = np.zeros(cap_ff)
        self.fs_i = np.zeros(cap_fs, dtype=np.int64)
        self.fs_j = np.zeros(cap_fs, dtype=np.int64)
        self.fs_ex = np.zeros(cap_fs)
        self.fs_ey = np.zeros(cap_fs)
        self.fs_rr = np.zeros(cap_fs)
        self.fs_w = np.zeros(cap_fs)
        self.fs_wp = np.zeros(cap_fs)

    def _init_normals(self) -> None:
        """Occupancy normals of every body in its reference layout."""
        for body in self.bodies:
            sl = body.sl
            if body.n == 0:
                continue
            kernel_s = solid_kernel(body.dp_s)
            idx = pairs_within(body.layout, kernel_s.cutoff)
            nx = np.zeros(body.n)
            ny = np.zeros(body.n)
            vol0 = np.full(body.n, body.dp_s**2)
            loops.occupancy_normals(
                np.ascontiguousarray(idx[:, 0]), np.ascontiguousarray(idx[:, 1]),
                idx.shape[0], body.layout, vol0, kernel_s.h, kernel_s.norm, nx, ny)
            self.s_nx[sl] = nx
            self.s_ny[sl] = ny
            if isinstance(body, HingedBody):
                body.normals0 = np.column_stack([nx, ny])

    # --------------------------------------------------------------- stepping

    def fluid_speed_max(self) -> float:
        if self.nf == 0:
            return 0.0
        return float(np.sqrt(self.f_vx**2 + self.f_vy**2).max())

    def dt_advection(self) -> float:
        v = max(self.mat.v_max, self.fluid_speed_max())
        nu = self.mat.kinematic_viscosity
        visc = self.kernel.h**2 / nu if nu > 0.0 else math.inf
        return CFL_ADVECTION * min(self.kernel.h / v, visc)

    def dt_acoustic(self) -> float:
        v = max(self.mat.v_max, self.fluid_speed_max())
        return CFL_ACOUSTIC * self.kernel.h / (self.mat.sound_speed + v)

    def advance_to(self, t_target: float, probe_hook: Callable[["Simulation"], None] | None = None) -> None:
        """Run advection steps until sim time reaches t_target (exactly)."""
        while self.t < t_target - 1e-12:
            self.advection_step(dt_limit=t_target - self.t)
            if probe_hook is not None:
                probe_hook(self)

    def advection_step(self, dt_limit: float = math.inf) -> float:
        """One outer step: recycle, rebuild pairs, refresh corrections and
        densities, then run acoustic substeps filling the window."""
        self._recycle_open_boundary()
        self._rebuild_pairs()
        self._advection_corrections()
        dt_ad = min(self.dt_advection(), dt_limit)
        if self.transport_p0 != 0.0:
            loops.transport_velocity_pass(
                self.ff_i, self.ff_j, self.n_ff, self.ff_ex, self.ff_ey, self.ff_wp,
                self.fs_i, self.fs_j, self.n_fs, self.fs_ex, self.fs_ey, self.fs_wp,
                self.f_rho, self.f_vol, self.s_vol, self.transport_p0,
                self.tv_ax, self.tv_ay)
            self.f_tvx = dt_ad * self.tv_ax
            self.f_tvy = dt_ad * self.tv_ay
        remaining = dt_ad
        while remaining > 1e-14:
            dt = min(self.dt_acoustic(), remaining)
            self.acoustic_step(dt)
            remaining -= dt
        self.n_advection_steps += 1
        return dt_ad

    def _recycle_open_boundary(self) -> None:
        fs = self.free_stream
        if fs is None:
            return
        width = fs.x1 - fs.x0
        out = self.f_pos[:, 0] > fs.x1
        if out.any():
            self.f_pos[out, 0] -= width
            self.f_vx[out] = fs.v_in
            self.f_vy[out] = 0.0
            self.f_rho[out] = self.mat.rho0
            self.f_tvx[out] = 0.0
            self.f_tvy[out] = 0.0
        # stray vertical escape: reseat on the boundary moving with the stream
        low = self.f_pos[:, 1] < fs.y0
        high = self.f_pos[:, 1] > fs.y1
        for mask, edge in ((low, fs.y0), (high, fs.y1)):
            if mask.any():
                self.f_pos[mask, 1] = edge
                self.f_vy[mask] = 0.0

    def _rebuild_pairs(self) -> None:
        self.all_pos[: self.nf] = self.f_pos
        if self.ns:
            self.all_pos[self.nf:] = self.s_pos
        cutoff = self.kernel.cutoff
        xmin = float(self.all_pos[:, 0].min()) - 1e-9
        ymin = float(self.all_pos[:, 1].min()) - 1e-9
        xmax = float(self.all_pos[:, 0].max())
        ymax = float(self.all_pos[:, 1].max())
        ncx = max(int((xmax - xmin) / cutoff) + 1, 1)
        ncy = max(int((ymax - ymin) / cutoff) + 1, 1)
        cell_start, order = loops.bin_particles(self.all_pos, xmin, ymin, cutoff, ncx, ncy)
        while True:
            n_ff, n_fs = loops.build_pairs(
                self.all_pos, self.is_fluid, self.nf, xmin, ymin, cutoff, ncx, ncy,
                cell_start, order, cutoff,
                self.ff_i, self.ff_j, self.fs_i, self.fs_j)
            if n_ff >= 0:
                break
            self._alloc_pairs(2 * self.ff_i.shape[0], 2 * self.fs_i.shape[0])
        self.n_ff = n_ff
        self.n_fs = n_fs
        loops.pair_geometry(self.f_pos, self.f_pos, self.ff_i, self.ff_j, n_ff,
                            self.kernel.h, self.kernel.norm,
                            self.ff_ex, self.ff_ey, self.ff_rr, self.ff_w, self.ff_wp)
        loops.pair_geometry(self.f_pos, self.s_pos, self.fs_i, self.fs_j, n_fs,
                            self.kernel.h, self.kernel.norm,
                            self.fs_ex, self.fs_ey, self.fs_rr, self.fs_w, self.fs_wp)

    def _advection_corrections(self) -> None:
        self.f_vol = self.f_mass / self.f_rho
        loops.advection_sums(
            self.ff_i, self.ff_j, self.n_ff, self.ff_ex, self.ff_ey, self.ff_rr,
            self.ff_w, self.ff_wp,
            self.fs_i, self.fs_j, self.n_fs, self.fs_ex, self.fs_ey, self.fs_rr,
            self.fs_w, self.fs_wp,
            self.f_vol, self.s_vol, float(self.kernel.norm * 66.0),
            self.a_mat, self.wsum, self.wsum_wall, self.div)
        if USE_WKGC:
            loops.wkgc_blend(self.a_mat, self.f_b, WKGC_ALPHA)
        else:
            self.f_b[:, 0] = 1.0
            self.f_b[:, 1] = 0.0
            self.f_b[:, 2] = 0.0
            self.f_b[:, 3] = 1.0
        self.f_surf = self.div < 1.5
        # wall neighbors mirror the fluid particle's own compression (their
        # rigid lattice cannot compress); the factor is clamped so the
        # feedback through the previous density stays bounded
        mirror = np.clip(self.f_rho / self.mat.rho0, 0.9, 1.1)
        rho_sum = self.mat.rho0 * (self.wsum + mirror * self.wsum_wall) / self.wsum_ref
        if REINIT:
            # free-surface reinitialization: the summation reads compression
            # straight from the particle geometry; particles whose support is
            # deficient (surface band) fall back to their integrated density,
            # capped at rho0 so isolated particles cannot accumulate mass
            target = np.maximum(np.minimum(self.f_rho, self.mat.rho0), rho_sum)
            self.f_rho = self.f_rho + self.reinit_blend * (target - self.f_rho)
        if self.free_stream is not None:
            mask = self.f_surf
            if mask.any():
                rho_f = self.f_rho[mask]
                rho_n = rho_sum[mask]
                self.f_rho[mask] = rho_n + np.maximum(0.0, rho_f - rho_n) * self.mat.rho0 / rho_f
                weight = np.minimum(self.f_rho[mask], self.mat.rho0) / self.mat.rho0
                self.f_vx[mask] += (self.free_stream.v_in - self.f_vx[mask]) * weight
        self.f_vol = self.f_mass / self.f_rho

    def acoustic_step(self, dt: float) -> None:
        mat = self.mat
        # time-centered density: finish the previous substep's half update
        # so the pressure below sits midway between continuity evaluations
        self.f_rho += 0.5 * dt * self.drho
        self.f_vol = self.f_mass / self.f_rho
        self.f_p = mat.sound_speed**2 * (self.f_rho - mat.rho0)
        self.force_x[:] = 0.0
        self.force_y[:] = 0.0
        self.react_px[:] = 0.0
        self.react_py[:] = 0.0
        self.react_vx[:] = 0.0
        self.react_vy[:] = 0.0
        loops.momentum_pass_ff(
            self.ff_i, self.ff_j, self.n_ff, self.ff_ex, self.ff_ey, self.ff_rr,
            self.ff_wp, self.f_rho, self.f_p, self.f_vx, self.f_vy, self.f_vol,
            self.f_b, mat.sound_speed, mat.dynamic_viscosity, self.beta_floor,
            self.force_x, self.force_y)
        if self.n_fs:
            loops.momentum_pass_fs(
                self.fs_i, self.fs_j, self.n_fs, self.fs_ex, self.fs_ey, self.fs_rr,
                self.fs_wp, self.f_rho, self.f_p, self.f_vx, self.f_vy,
                self.f_vol, self.f_b, mat.sound_speed, mat.dynamic_viscosity,
                self.beta_floor,
                self.s_nx, self.s_ny, self.s_vbx, self.s_vby, self.s_abx, self.s_aby,
                self.s_rho, self.s_vol, self.gravity[0], self.gravity[1],
                self.force_x, self.force_y,
                self.react_px, self.react_py, self.react_vx, self.react_vy)
        ax = self.force_x / self.f_mass + self.gravity[0]
        ay = self.force_y / self.f_mass + self.gravity[1]
        if self.external_accel is not None:
            ae = self.external_accel(self.t + 0.5 * dt)
            ax = ax + ae[0]
            ay = ay + ae[1]
        # half drift, velocity kick, half drift, then continuity with the
        # fresh velocities; its rate applies half now and half at the start
        # of the next substep (velocity-Verlet arrangement)
        half = 0.5 * dt
        self.f_pos[:, 0] += half * (self.f_vx + self.f_tvx)
        self.f_pos[:, 1] += half * (self.f_vy + self.f_tvy)
        self.f_vx += dt * ax
        self.f_vy += dt * ay
        self.f_pos[:, 0] += half * (self.f_vx + self.f_tvx)
        self.f_pos[:, 1] += half * (self.f_vy + self.f_tvy)
        self.drho[:] = 0.0
        loops.continuity_pass_ff(
            self.ff_i, self.ff_j, self.n_ff, self.ff_ex, self.ff_ey,
            self.ff_wp, self.f_rho, self.f_p, self.f_vx, self.f_vy, self.f_vol,
            self.f_b, mat.sound_speed, self.drho)
        if self.n_fs and WALL_CONTINUITY:
            loops.continuity_pass_fs(
                self.fs_i, self.fs_j, self.n_fs, self.fs_ex, self.fs_ey, self.fs_rr,
                self.fs_wp, self.f_rho, self.f_p, self.f_vx, self.f_vy, self.f_b,
                mat.sound_speed,
                self.s_nx, self.s_ny, self.s_vbx, self.s_vby, self.s_abx, self.s_aby,
                self.s_rho, self.s_vol, self.gravity[0], self.gravity[1], self.drho)
        self.f_rho += 0.5 * dt * self.drho
        self.f_vol = self.f_mass / self.f_rho
        if self.damping_zone is not None:
            x0, x1 = self.damping_zone
            mask = (self.f_pos[:, 0] >= x0) & (self.f_pos[:, 0] <= x1)
            if mask.any():
                factor = np.maximum(1.0 - 5.0 * dt * (self.f_pos[mask, 0] - x0) / (x1 - x0), 0.0)
                self.f_vx[mask] *= factor
                self.f_vy[mask] *= factor
        if self.t < self.relax_until:
            factor = max(1.0 - self.relax_rate * dt, 0.0)
            self.f_vx *= factor
            self.f_vy *= factor
        if not (np.isfinite(self.f_vx).all() and np.isfinite(self.f_rho).all()):
            raise SolverBlowUp(f"non-finite fluid state at t = {self.t:.6f} s")
        if np.any(self.f_rho <= 0.0):
            raise SolverBlowUp(f"non-positive fluid density at t = {self.t:.6f} s")
        self._update_solids(dt)
        self.t += dt

    # ----------------------------------------------------------------- solids

    def _update_solids(self, dt: float) -> None:
        t0 = self.t
        t1 = self.t + dt
        for body in self.bodies:
            sl = body.sl
            if body.kind == "static":
                continue
            if body.kind == "prescribed":
                d0, v0, _ = body.motion(t0)
                d1, v1, a1 = body.motion(t1)
                self.s_pos[sl] = body.layout + d1
                self.s_vx[sl] = v1[0]
                self.s_vy[sl] = v1[1]
                # exact mean velocity over the step from the displacement
                self.s_vbx[sl] = (d1[0] - d0[0]) / dt
                self.s_vby[sl] = (d1[1] - d0[1]) / dt
                self.s_abx[sl] = (v1[0] - v0[0]) / dt
                self.s_aby[sl] = (v1[1] - v0[1]) / dt
            elif body.kind == "controlled":
                v = body.velocity_fn(t0) if body.velocity_fn is not None else np.zeros(2)
                v = np.asarray(v, dtype=np.float64)
                vx_old = self.s_vx[sl][0] if body.n else 0.0
                vy_old = self.s_vy[sl][0] if body.n else 0.0
                body.displacement = body.displacement + v * dt
                self.s_pos[sl] = body.layout + body.displacement
                self.s_vx[sl] = v[0]
                self.s_vy[sl] = v[1]
                self.s_vbx[sl] = v[0]
                self.s_vby[sl] = v[1]
                self.s_abx[sl] = (v[0] - vx_old) / dt
                self.s_aby[sl] = (v[1] - vy_old) / dt
            elif body.kind == "hinged":
                self._update_hinged(body, dt)
            elif body.kind == "elastic":
                self._update_elastic(body, dt)

    def _update_hinged(self, body: HingedBody, dt: float) -> None:
        sl = body.sl
        if body.kd_fn is not None:
            body.rigid.k_d = float(body.kd_fn(self.t))
        forces = np.column_stack([self.react_px[sl] + self.react_vx[sl],
                                  self.react_py[sl] + self.react_vy[sl]])
        arm = self.s_pos[sl] - body.rigid.pivot
        tau = float(np.sum(arm[:, 0] * forces[:, 1] - arm[:, 1] * forces[:, 0]))
        body.torque_fluid = tau
        vx_old = self.s_vx[sl].copy()
        vy_old = self.s_vy[sl].copy()
        integrate_hinged_body(body.rigid, tau, dt, gravity=self.gravity)
        theta = body.rigid.theta
        self.s_pos[sl] = rotate_about(body.layout, body.rigid.pivot, theta)
        vel = rigid_velocity(self.s_pos[sl], body.rigid.pivot, body.rigid.omega)
        self.s_vx[sl] = vel[:, 0]
        self.s_vy[sl] = vel[:, 1]
        c, s = math.cos(theta), math.sin(theta)
        n0 = body.normals0
        self.s_nx[sl] = c * n0[:, 0] - s * n0[:, 1]
        self.s_ny[sl] = s * n0[:, 0] + c * n0[:, 1]
        self.s_vbx[sl] = 0.5 * (vx_old + vel[:, 0])
        self.s_vby[sl] = 0.5 * (vy_old + vel[:, 1])
        self.s_abx[sl] = (vel[:, 0] - vx_old) / dt
        self.s_aby[sl] = (vel[:, 1] - vy_old) / dt

    def _update_elastic(self, body: ElasticBody, dt: float) -> None:
        sl = body.sl
        a_ext_x = (self.react_px[sl] + self.react_vx[sl]) / body.mass + self.gravity[0]
        a_ext_y = (self.react_py[sl] + self.react_vy[sl]) / body.mass + self.gravity[1]
        if self.external_accel is not None:
            ae = self.external_accel(self.t + 0.5 * dt)
            a_ext_x = a_ext_x + ae[0]
            a_ext_y = a_ext_y + ae[1]
        if body.body_accel_fn is not None:
            ab = body.body_accel_fn(self.t + 0.5 * dt)
            a_ext_x = a_ext_x + ab[0]
            a_ext_y = a_ext_y + ab[1]
        speed = float(np.sqrt(self.s_vx[sl] ** 2 + self.s_vy[sl] ** 2).max()) if body.n else 0.0
        bound_v = body.kernel.h / (body.cs_max + speed)
        bound_a = math.sqrt(body.kernel.h / body.last_accel_max) if body.last_accel_max > 0 else math.inf
        # the 0.5 safety absorbs the stiffness amplification of the
        # reference-correction matrices on thin strips
        dt_s_max = 0.5 * CFL_SOLID * min(bound_v, bound_a)
        n_sub = max(int(math.ceil(dt / dt_s_max)), 1)
        dt_s = dt / n_sub
        pos = self.s_pos[sl]
        vx = self.s_vx[sl].copy()
        vy = self.s_vy[sl].copy()
        vx0 = vx.copy()
        vy0 = vy.copy()
        vbx_acc = np.zeros(body.n)
        vby_acc = np.zeros(body.n)
        ux = np.empty(body.n)
        uy = np.empty(body.n)
        free = ~body.fixed
        accel_max = 0.0
        for k in range(n_sub):
            t_sub = self.t + (k + 0.5) * dt_s
            body.active_gradients(t_sub)
            ux[:] = pos[:, 0] - body.layout[:, 0]
            uy[:] = pos[:, 1] - body.layout[:, 1]
            loops.solid_deformation_pass(body.ss_i, body.ss_j, body.ss_i.shape[0],
                                         body.e0x, body.e0y, body.r0, body.wp0,
                                         ux, uy, body.vol0, body.b0, body.F)
            loops.solid_stress_pass(body.F, body.lam, body.mu, body.fa1, body.fa2,
                                    body.b0, body.pb, body.detf)
            if np.any(body.detf <= 0.0):
                raise SolverBlowUp(f"element inversion in body '{body.name}' at t = {self.t:.6f}")
            rho = body.rho0 / body.detf
            loops.solid_accel_pass(body.ss_i, body.ss_j, body.ss_i.shape[0],
                                   body.e0x, body.e0y, body.wp0, body.pb, body.vol0,
                                   rho, body.accel[:, 0], body.accel[:, 1])
            ax = body.accel[:, 0] + a_ext_x
            ay = body.accel[:, 1] + a_ext_y
            accel_max = max(accel_max, float(np.sqrt(ax**2 + ay**2).max()))
            vx_prev = vx.copy()
            vy_prev = vy.copy()
            vx += dt_s * ax
            vy += dt_s * ay
            vx[body.fixed] = 0.0
            vy[body.fixed] = 0.0
            pos[free, 0] += dt_s * 0.5 * (vx_prev[free] + vx[free])
            pos[free, 1] += dt_s * 0.5 * (vy_prev[free] + vy[free])
            vbx_acc += 0.5 * (vx_prev + vx) / n_sub
            vby_acc += 0.5 * (vy_prev + vy) / n_sub
        if not np.isfinite(vx).all():
            raise SolverBlowUp(f"non-finite solid state in body '{body.name}'")
        body.last_accel_max = accel_max
        self.s_pos[sl] = pos
        self.s_vx[sl] = vx
        self.s_vy[sl] = vy
        self.s_vbx[sl] = vbx_acc
        self.s_vby[sl] = vby_acc
        self.s_abx[sl] = (vx - vx0) / dt
        self.s_aby[sl] = (vy - vy0) / dt
        self.s_vol[sl] = body.vol0 * body.detf
        self.s_rho[sl] = body.rho0 / body.detf
        # deformed configuration: refresh outward normals
        nx = np.zeros(body.n)
        ny = np.zeros(body.n)
        loops.occupancy_normals(body.ss_i, body.ss_j, body.ss_i.shape[0], pos,
                                body.vol0, body.kernel.h, body.kernel.norm, nx, ny)
        self.s_nx[sl] = nx
        self.s_ny[sl] = ny

    # ---------------------------------------------------------------- access

    def fluid_velocity(self) -> np.ndarray:
        return np.column_stack([self.f_vx, self.f_vy])

    def body_by_name(self, name: str) -> SolidBody:
        for body in self.bodies:
            if body.name == name:
                return body
        raise KeyError(name)

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Every array needed to restore the simulation bit-exactly at an
        acoustic step boundary."""
        out = {
            "t": np.array([self.t]),
            "n_advection_steps": np.array([self.n_advection_steps], dtype=np.int64),
            "f_pos": self.f_pos, "f_vx": self.f_vx, "f_vy": self.f_vy,
            "f_tvx": self.f_tvx, "f_tvy": self.f_tvy, "f_rho": self.f_rho,
            "f_drho": self.drho, "f_surf": self.f_surf.astype(np.uint8),
            "s_pos": self.s_pos, "s_vx": self.s_vx, "s_vy": self.s_vy,
            "s_vbx": self.s_vbx, "s_vby": self.s_vby,
            "s_abx": self.s_abx, "s_aby": self.s_aby,
            "s_nx": self.s_nx, "s_ny": self.s_ny,
            "s_vol": self.s_vol, "s_rho": self.s_rho,
        }
        for b, body in enumerate(self.bodies):
            if isinstance(body, HingedBody):
                out[f"body{b}_hinge"] = np.array([
                    body.rigid.theta, body.rigid.omega, body.rigid.k_d,
                    body.rigid.dissipated, body.torque_fluid])
            elif isinstance(body, ControlledBody):
                out[f"body{b}_disp"] = body.displacement
            elif isinstance(body, ElasticBody):
                out[f"body{b}_accelmax"] = np.array([body.last_accel_max])
        return out

    def load_state_arrays(self, data: dict[str, np.ndarray]) -> None:
        self.t = float(data["t"][0])
        self.n_advection_steps = int(data["n_advection_steps"][0])
        self.f_pos[:] = data["f_pos"]
        self.f_vx[:] = data["f_vx"]
        self.f_vy[:] = data["f_vy"]
        self.f_tvx[:] = data["f_tvx"]
        self.f_tvy[:] = data["f_tvy"]
        self.f_rho[:] = data["f_rho"]
        self.drho[:] = data["f_drho"]
        self.f_surf = data["f_surf"].astype(bool)
        self.f_vol = self.f_mass / self.f_rho
        self.f_p = self.mat.sound_speed**2 * (self.f_rho - self.mat.rho0)
        self.s_pos[:] = data["s_pos"]
        self.s_vx[:] = data["s_vx"]
        self.s_vy[:] = data["s_vy"]
        self.s_vbx[:] = data["s_vbx"]
        self.s_vby[:] = data["s_vby"]
        self.s_abx[:] = data["s_abx"]
        self.s_aby[:] = data["s_aby"]
        self.s_nx[:] = data["s_nx"]
        self.s_ny[:] = data["s_ny"]
        self.s_vol[:] = data["s_vol"]
        self.s_rho[:] = data["s_rho"]
        for b, body in enumerate(self.bodies):
            if isinstance(body, HingedBody):
                vals = data[f"body{b}_hinge"]
                body.rigid.theta = float(vals[0])
                body.rigid.omega = float(vals[1])
                body.rigid.k_d = float(vals[2])
                body.rigid.dissipated = float(vals[3])
                body.torque_fluid = float(vals[4])
            elif isinstance(body, ControlledBody):
                body.displacement = np.asarray(data[f"body{b}_disp"], dtype=np.float64).copy()
            elif isinstance(body, ElasticBody):
                body.last_accel_max = float(data[f"body{b}_accelmax"][0])
