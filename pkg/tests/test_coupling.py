import math

import numpy as np
import pytest

from sphrl.coupling import (
    RigidBodyState,
    averaged_solid_velocity,
    fsi_pair_forces,
    integrate_hinged_body,
    rigid_velocity,
    rotate_about,
    total_force_torque,
    wall_extrapolated_pressure,
    wall_riemann_pressure,
)
from sphrl.fluid import FluidMaterial
from sphrl.kernels import fluid_kernel

WATER = FluidMaterial(rho0=1000.0, v_max=2.0, dynamic_viscosity=1e-3)
G = np.array([0.0, -9.81])


class TestWallPressure:
    def test_static_wall_zero_gravity(self):
        p_a, sol = wall_riemann_pressure(
            p_i=0.0, rho_i=1000.0, vel_i=[0.0, 0.0], pos_i=[0.0, 0.01], mat=WATER,
            pos_a=[0.0, -0.005], normal_a=[0.0, 1.0], vbar_a=[0.0, 0.0],
            abar_a=[0.0, 0.0], rho_a=1000.0, gravity=[0.0, 0.0])
        assert p_a == 0.0
        assert np.allclose(sol.pstar, 0.0)

    def test_hydrostatic_extrapolation(self):
        # bottom wall below fluid at rest: p_a - p_i = rho g dy
        dy = 0.015
        p_a = wall_extrapolated_pressure(
            p_i=200.0, rho_i=1000.0, pos_i=[0.3, 0.01], pos_a=[0.3, 0.01 - dy],
            normal_a=[0.0, 1.0], accel_a=[0.0, 0.0], gravity=G)
        assert p_a - 200.0 == pytest.approx(1000.0 * 9.81 * dy, rel=1e-12)

    def test_ceiling_clamped(self):
        # fluid below a ceiling: gravity pulls it away, no extrapolation
        p_a = wall_extrapolated_pressure(
            p_i=150.0, rho_i=1000.0, pos_i=[0.0, -0.01], pos_a=[0.0, 0.005],
            normal_a=[0.0, -1.0], accel_a=[0.0, 0.0], gravity=G)
        assert p_a == 150.0

    def test_wall_falling_away_clamped(self):
        # bottom wall accelerating downward faster than g: separation
        p_a = wall_extrapolated_pressure(
            p_i=100.0, rho_i=1000.0, pos_i=[0.0, 0.01], pos_a=[0.0, -0.005],
            normal_a=[0.0, 1.0], accel_a=[0.0, -15.0], gravity=G)
        assert p_a == 100.0

    def test_wall_pushing_up_increases_pressure(self):
        p_a = wall_extrapolated_pressure(
            p_i=0.0, rho_i=1000.0, pos_i=[0.0, 0.01], pos_a=[0.0, -0.005],
            normal_a=[0.0, 1.0], accel_a=[0.0, 3.0], gravity=G)
        assert p_a == pytest.approx(1000.0 * (9.81 + 3.0) * 0.015, rel=1e-12)


class TestFsiForces:
    def _random_config(self, seed):
        rng = np.random.default_rng(seed)
        kernel = fluid_kernel(0.01)
        solid_pos = rng.uniform(-0.02, 0.02, size=(12, 2))
        normals = rng.normal(size=(12, 2))
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        return dict(
            state_pos_i=rng.uniform(-0.01, 0.01, size=2),
            state_vel_i=rng.normal(scale=0.5, size=2),
            p_i=float(rng.uniform(-100, 500)),
            rho_i=float(rng.uniform(980, 1020)),
            mass_i=0.1,
            mat=WATER,
            kernel=kernel,
            solid_pos=solid_pos,
            solid_normals=normals,
            solid_vbar=rng.normal(scale=0.2, size=(12, 2)),
            solid_abar=rng.normal(scale=1.0, size=(12, 2)),
            solid_vol=np.full(12, 1e-4),
            solid_rho=np.full(12, 1250.0),
            gravity=G,
        )

    def test_out_of_range_zero(self):
        cfg = self._random_config(0)
        cfg["solid_pos"] = cfg["solid_pos"] + 10.0
        a_sf, rp, rv = fsi_pair_forces(**cfg)
        assert np.allclose(a_sf, 0.0)
        assert np.allclose(rp, 0.0)
        assert np.allclose(rv, 0.0)

    def test_newton_third_law_exact(self):
        for seed in range(10):
            cfg = self._random_config(seed)
            a_sf, rp, rv = fsi_pair_forces(**cfg)
            fluid_force = a_sf * cfg["mass_i"]
            total = fluid_force + rp.sum(axis=0) + rv.sum(axis=0)
            assert np.abs(total).max() < 1e-12

    def test_pressure_reaction_along_gradient(self):
        cfg = self._random_config(3)
        _, rp, _ = fsi_pair_forces(**cfg)
        assert np.isfinite(rp).all()


class TestAveragedVelocity:
    def test_constant_velocity(self):
        v = np.tile(np.array([0.3, -0.1]), (5, 4, 1))
        vbar, abar = averaged_solid_velocity(v, 1e-3)
        assert np.allclose(vbar, [0.3, -0.1])
        assert np.allclose(abar, 0.0)

    def test_linear_ramp_halves(self):
        n_sub = 10
        ramp = np.linspace(0.0, 1.0, n_sub + 1)[:, None, None] * np.array([[[2.0, 0.0]]])
        vbar, abar = averaged_solid_velocity(ramp, 0.01)
        assert np.allclose(vbar, [1.0, 0.0])
        assert np.allclose(abar, [200.0, 0.0])

    def test_stationary(self):
        v = np.zeros((3, 2, 2))
        vbar, abar = averaged_solid_velocity(v, 1e-3)
        assert np.allclose(vbar, 0.0)
        assert np.allclose(abar, 0.0)


class TestForceTorque:
    def test_single_particle(self):
        f, tau = total_force_torque(np.array([[0.0, 1.0]]), np.array([[1.0, 0.0]]),
                                    pivot=[0.0, 0.0])
        assert np.allclose(f, [0.0, 1.0])
        assert tau == pytest.approx(1.0)

    def test_mirror_symmetry_zero_torque(self):
        pos = np.array([[1.0, 0.0], [-1.0, 0.0]])
        forces = np.array([[0.0, 2.0], [0.0, 2.0]])
        _, tau = total_force_torque(forces, pos, pivot=[0.0, 0.0])
        assert tau == pytest.approx(0.0, abs=1e-15)

    def test_brute_force_random(self):
        rng = np.random.default_rng(9)
        pos = rng.normal(size=(50, 2))
        forces = rng.normal(size=(50, 2))
        pivot = np.array([0.3, -0.2])
        f, tau = total_force_torque(forces, pos, pivot)
        tau_ref = 0.0
        for k in range(50):
            arm = pos[k] - pivot
            tau_ref += arm[0] * forces[k, 1] - arm[1] * forces[k, 0]
        assert tau == pytest.approx(tau_ref, abs=1e-12)
        assert np.allclose(f, forces.sum(axis=0))


class TestHingedBody:
    def _body(self, k_d=0.0):
        return RigidBodyState(pivot=[0.0, 0.0], moment_of_inertia=2.0, mass=5.0,
                              r_g0=[0.0, 0.0], k_d=k_d, omega=1.0)

    def test_free_spin_constant(self):
        body = self._body()
        for _ in range(100):
            integrate_hinged_body(body, 0.0, 1e-3)
        assert body.omega == pytest.approx(1.0, rel=1e-14)
        assert body.theta == pytest.approx(0.1, rel=1e-12)

    def test_damped_decay_matches_exponential(self):
        k_d, j0 = 4.0, 2.0
        body = RigidBodyState(pivot=[0.0, 0.0], moment_of_inertia=j0, mass=1.0,
                              r_g0=[0.0, 0.0], k_d=k_d, omega=1.0)
        tc = j0 / k_d
        dt = tc / 100.0
        steps = int(round(5 * tc / dt))
        for _ in range(steps):
            integrate_hinged_body(body, 0.0, dt)
        assert body.omega == pytest.approx(math.exp(-5.0), rel=1e-2)

    def test_constant_torque_linear_growth(self):
        body = self._body()
        body.omega = 0.0
        tau = 3.0
        for _ in range(1000):
            integrate_hinged_body(body, tau, 1e-3)
        assert body.omega == pytest.approx(tau / 2.0 * 1.0, rel=1e-12)

    def test_dissipation_matches_power_integral(self):
        body = RigidBodyState(pivot=[0.0, 0.0], moment_of_inertia=2.0, mass=1.0,
                              r_g0=[0.0, 0.0], k_d=1.5, omega=2.0)
        dt = 1e-4
        energy0 = 0.5 * body.moment_of_inertia * body.omega**2
        for _ in range(20000):
            integrate_hinged_body(body, 0.0, dt)
        energy1 = 0.5 * body.moment_of_inertia * body.omega**2
        assert body.dissipated == pytest.approx(energy0 - energy1, rel=2e-2)

    def test_gravity_torque_of_offset_mass(self):
        body = RigidBodyState(pivot=[0.0, 0.0], moment_of_inertia=1.0, mass=2.0,
                              r_g0=[0.5, 0.0], k_d=0.0)
        assert body.gravity_torque(G) == pytest.approx(2.0 * 0.5 * -9.81)
        body.theta = math.pi / 2.0  # mass straight above the pivot
        assert body.gravity_torque(G) == pytest.approx(0.0, abs=1e-12)

    def test_invalid_parameters_rejected(self):
        with pytest.raises(ValueError):
            RigidBodyState(pivot=[0, 0], moment_of_inertia=0.0, mass=1.0, r_g0=[0, 0])
        with pytest.raises(ValueError):
            RigidBodyState(pivot=[0, 0], moment_of_inertia=1.0, mass=1.0, r_g0=[0, 0], k_d=-1.0)


class TestRigidKinematics:
    def test_rotation_preserves_distances(self):
        rng = np.random.default_rng(2)
        pts = rng.normal(size=(30, 2))
        rot = rotate_about(pts, [0.2, -0.1], 0.7)
        d0 = np.linalg.norm(pts[:, None] - pts[None, :], axis=-1)
        d1 = np.linalg.norm(rot[:, None] - rot[None, :], axis=-1)
        assert np.abs(d0 - d1).max() < 1e-12

    def test_rigid_velocity_field(self):
        v = rigid_velocity(np.array([[1.0, 0.0]]), [0.0, 0.0], 2.0)
        assert np.allclose(v, [[0.0, 2.0]])
