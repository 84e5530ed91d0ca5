import math

import numpy as np
import pytest

from sphrl.fluid import (
    DualTimestep,
    FluidMaterial,
    FluidState,
    RiemannFace,
    SolverBlowUp,
    acoustic_substep,
    apply_damping_zone,
    detect_free_surface,
    eos_pressure,
    fluid_pairs,
    fluid_rates,
    free_stream_correct,
    kernel_sums,
    linearised_riemann,
    reinitialize_density,
    sloshing_speed_scale,
    timestep_sizes,
    transport_velocity_rate,
)
from sphrl.kernels import KernelModel, fluid_kernel, lattice_positions


WATER = FluidMaterial(rho0=1000.0, v_max=2.0, dynamic_viscosity=1e-3)


def lattice_state(dp=0.01, nx=13, ny=13, mat=WATER):
    pos = lattice_positions(0.0, 0.0, nx * dp, ny * dp, dp)
    return FluidState.from_positions(pos, mat, dp)


class TestEos:
    def test_reference_density_zero(self):
        assert eos_pressure(1000.0, WATER) == 0.0

    def test_hand_value(self):
        # c = 20, rho - rho0 = 10 -> 4000 Pa
        assert eos_pressure(1010.0, WATER) == pytest.approx(4000.0, rel=1e-12)

    def test_negative_pressure_allowed(self):
        assert eos_pressure(995.0, WATER) < 0.0

    def test_case_velocity_scale(self):
        # v_max = 2 sqrt(g h) for the sloshing cases
        assert sloshing_speed_scale(9.81, 0.3) == pytest.approx(2.0 * math.sqrt(9.81 * 0.3))
        mat = FluidMaterial(rho0=1000.0, v_max=sloshing_speed_scale(9.81, 0.3))
        assert mat.sound_speed == pytest.approx(20.0 * math.sqrt(9.81 * 0.3))


class TestLinearisedRiemann:
    def test_identical_states_identity(self):
        face = RiemannFace(rhoL=1000.0, rhoR=1000.0, UL=0.7, UR=0.7,
                           PL=1234.0, PR=1234.0, cL=20.0, cR=20.0)
        sol = linearised_riemann(face)
        assert sol.ustar == pytest.approx(0.7, rel=1e-14)
        assert np.allclose(sol.pstar, 1234.0 * np.eye(2), rtol=1e-14)
        assert sol.beta == 0.0

    def test_hand_case(self):
        face = RiemannFace(rhoL=1000.0, rhoR=1000.0, UL=1.0, UR=-1.0,
                           PL=0.0, PR=0.0, cL=20.0, cR=20.0)
        sol = linearised_riemann(face)
        assert sol.ustar == pytest.approx(0.0, abs=1e-12)
        assert sol.beta == pytest.approx(0.3, abs=1e-12)
        assert sol.pstar[0, 0] == pytest.approx(6000.0, abs=1e-9)
        assert sol.pstar[1, 1] == pytest.approx(6000.0, abs=1e-9)
        assert sol.pstar[0, 1] == 0.0

    def test_expansion_clamps_limiter(self):
        face = RiemannFace(rhoL=1000.0, rhoR=990.0, UL=-1.0, UR=1.0,
                           PL=500.0, PR=300.0, cL=20.0, cR=20.0)
        sol = linearised_riemann(face)
        assert sol.beta == 0.0
        zl, zr = 1000.0 * 20.0, 990.0 * 20.0
        expected = (zl * 300.0 + zr * 500.0) / (zl + zr)
        assert sol.pstar[0, 0] == pytest.approx(expected, rel=1e-14)

    def test_beta_bounded_random(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            face = RiemannFace(
                rhoL=rng.uniform(900, 1100), rhoR=rng.uniform(900, 1100),
                UL=rng.uniform(-30, 30), UR=rng.uniform(-30, 30),
                PL=rng.uniform(-1e4, 1e4), PR=rng.uniform(-1e4, 1e4),
                cL=20.0, cR=20.0)
            sol = linearised_riemann(face)
            assert 0.0 <= sol.beta <= 1.0
            assert np.isfinite(sol.pstar).all()
            assert np.isfinite(sol.ustar)


class TestFluidRates:
    def test_equilibrium_rest(self):
        state = lattice_state()
        pairs = fluid_pairs(state, fluid_kernel(0.01))
        state.p[:] = 500.0  # uniform pressure
        drho, dv = fluid_rates(state, pairs, WATER)
        interior = (
            (state.pos[:, 0] > 3 * 0.01) & (state.pos[:, 0] < 10 * 0.01)
            & (state.pos[:, 1] > 3 * 0.01) & (state.pos[:, 1] < 10 * 0.01)
        )
        assert np.abs(drho[interior]).max() < 1e-9
        assert np.abs(dv[interior]).max() < 1e-6

    def test_force_decomposition(self):
        state = lattice_state(mat=FluidMaterial(rho0=1000.0, v_max=2.0))
        mat = FluidMaterial(rho0=1000.0, v_max=2.0)  # mu = 0
        pairs = fluid_pairs(state, fluid_kernel(0.01))
        g = np.array([0.0, -9.81])
        ext = np.array([0.3, 0.0])
        drho, dv = fluid_rates(state, pairs, mat, body_accel=ext, gravity=g)
        assert np.allclose(dv, g + ext, atol=1e-12)
        assert np.allclose(drho, 0.0, atol=1e-12)

    def test_two_particle_hand_evaluation(self):
        # independent evaluation of the discrete continuity/momentum pair
        dp = 0.01
        kernel = fluid_kernel(dp)
        mat = FluidMaterial(rho0=1000.0, v_max=2.0, dynamic_viscosity=1e-3)
        pos = np.array([[0.0, 0.0], [0.012, 0.0]])
        state = FluidState.from_positions(pos, mat, dp)
        state.vel[0] = [0.4, 0.0]
        state.vel[1] = [-0.2, 0.1]
        state.rho[:] = [1004.0, 997.0]
        state.p = eos_pressure(state.rho, mat)
        pairs = fluid_pairs(state, kernel)
        drho, dv = fluid_rates(state, pairs, mat)

        # hand evaluation (written out from scratch)
        c = mat.sound_speed
        e = np.array([-1.0, 0.0])  # e_ij for i=0, j=1
        r = 0.012
        q = r / kernel.h  # 1.2: only the (3-q) and (2-q) branches are active
        wp = kernel.norm / kernel.h * (-5.0 * (3 - q) ** 4 + 30.0 * (2 - q) ** 4)
        grad = e * wp
        ul = -state.vel[0] @ e
        ur = -state.vel[1] @ e
        zl, zr = state.rho[0] * c, state.rho[1] * c
        cbar = (zl + zr) / (state.rho[0] + state.rho[1])
        beta = min(3.0 * max(ul - ur, 0.0) / cbar, 1.0)
        ustar = (zl * ul + zr * ur + state.p[0] - state.p[1]) / (zl + zr)
        pstar = (zl * state.p[1] + zr * state.p[0] + zl * zr * beta * (ul - ur)) / (zl + zr)
        # U projections are taken along -e_ij, so the reconstruction flips sign
        vstar = 0.5 * (state.vel[0] + state.vel[1]) - (ustar - 0.5 * (ul + ur)) * e
        vol = state.mass / state.rho
        drho0 = 2.0 * state.rho[0] * (state.vel[0] - vstar) @ grad * vol[1]
        dv0 = (-2.0 / state.rho[0]) * pstar * grad * vol[1] \
            + (2.0 / state.rho[0]) * mat.dynamic_viscosity * (state.vel[0] - state.vel[1]) / r * wp * vol[1]
        assert drho[0] == pytest.approx(drho0, rel=1e-12)
        assert np.allclose(dv[0], dv0, rtol=1e-12)
        # antisymmetric exchange: momentum change cancels exactly
        assert np.allclose(dv[0] * state.mass[0] + dv[1] * state.mass[1], 0.0, atol=1e-18)

    def test_momentum_conserved_random_cloud(self):
        rng = np.random.default_rng(3)
        dp = 0.01
        state = lattice_state(dp=dp, nx=10, ny=10)
        state.pos += rng.normal(scale=0.1 * dp, size=state.pos.shape)
        state.vel = rng.normal(scale=0.5, size=state.vel.shape)
        state.rho += rng.normal(scale=5.0, size=state.rho.shape)
        state.p = eos_pressure(state.rho, WATER)
        pairs = fluid_pairs(state, fluid_kernel(dp))
        drho, dv = fluid_rates(state, pairs, WATER)
        drift = np.abs((dv * state.mass[:, None]).sum(axis=0)).max()
        scale = float(np.sum(state.mass)) * WATER.v_max
        assert drift < 1e-10 * scale


class TestTimesteps:
    def test_advection_hand_value(self):
        mat = FluidMaterial(rho0=1000.0, v_max=2.0, dynamic_viscosity=1e-3)
        # nu = 1e-6; h = 0.004 -> dt_ad = 0.25 min(0.002, 16) = 5e-4
        state = FluidState.from_positions(np.zeros((1, 2)), mat, 0.004)
        ts = timestep_sizes(state, mat, KernelModel(h=0.004))
        assert ts.dt_advection == pytest.approx(5.0e-4, rel=1e-12)

    def test_acoustic_hand_value(self):
        mat = FluidMaterial(rho0=1000.0, v_max=2.0)
        state = FluidState.from_positions(np.zeros((1, 2)), mat, 0.004)
        ts = timestep_sizes(state, mat, KernelModel(h=0.004))
        assert ts.dt_acoustic == pytest.approx(0.6 * 0.004 / 22.0, rel=1e-12)

    def test_inviscid_limit(self):
        mat = FluidMaterial(rho0=1000.0, v_max=2.0, dynamic_viscosity=0.0)
        state = FluidState.from_positions(np.zeros((1, 2)), mat, 0.004)
        ts = timestep_sizes(state, mat, KernelModel(h=0.004))
        assert ts.dt_advection == pytest.approx(0.25 * 0.004 / 2.0, rel=1e-12)

    def test_fast_particle_tightens_step(self):
        mat = FluidMaterial(rho0=1000.0, v_max=2.0)
        state = FluidState.from_positions(np.zeros((1, 2)), mat, 0.004)
        state.vel[0, 0] = 8.0
        ts = timestep_sizes(state, mat, KernelModel(h=0.004))
        assert ts.dt_acoustic == pytest.approx(0.6 * 0.004 / 28.0, rel=1e-12)
        assert ts.dt_acoustic <= ts.dt_advection


class TestDensityReinit:
    def test_interior_lattice_unchanged(self):
        dp = 0.01
        state = lattice_state(dp=dp)
        kernel = fluid_kernel(dp)
        pairs = fluid_pairs(state, kernel)
        state.surface = detect_free_surface(state, pairs, kernel)
        before = state.rho.copy()
        reinitialize_density(state, pairs, kernel, dp, rho0=1000.0)
        # full-support interior: farther than the cutoff from the block edge
        lo, hi = kernel.cutoff, 13 * dp - kernel.cutoff
        interior = np.all((state.pos > lo) & (state.pos < hi), axis=1)
        assert interior.any()
        assert np.abs(state.rho[interior] - before[interior]).max() < 1e-3 * 1000.0

    def test_surface_max_branch_holds_density(self):
        dp = 0.01
        state = lattice_state(dp=dp, nx=13, ny=6)
        kernel = fluid_kernel(dp)
        pairs = fluid_pairs(state, kernel)
        state.surface = detect_free_surface(state, pairs, kernel)
        assert state.surface.any()
        reinitialize_density(state, pairs, kernel, dp, rho0=1000.0)
        # deficient support would lower the summation density, so the max
        # branch must keep surface particles at rho0
        assert state.rho[state.surface].min() >= 1000.0 - 1e-9

    def test_compressed_neighborhood_raises_density(self):
        dp = 0.01
        scale = 1.0 / math.sqrt(1.1)  # 10% area compression
        state = lattice_state(dp=dp)
        state.pos *= scale
        kernel = fluid_kernel(dp)
        pairs = fluid_pairs(state, kernel)
        state.surface[:] = False
        reinitialize_density(state, pairs, kernel, dp, rho0=1000.0)
        center = np.argmin(np.linalg.norm(state.pos - state.pos.mean(axis=0), axis=1))
        assert state.rho[center] == pytest.approx(1100.0, rel=0.02)


class TestTransportVelocity:
    def test_zero_background_pressure(self):
        state = lattice_state()
        pairs = fluid_pairs(state, fluid_kernel(0.01))
        accel = transport_velocity_rate(state, pairs, 0.0)
        assert np.allclose(accel, 0.0)

    def test_isolated_particle(self):
        state = FluidState.from_positions(np.zeros((1, 2)), WATER, 0.01)
        pairs = fluid_pairs(state, fluid_kernel(0.01))
        accel = transport_velocity_rate(state, pairs, 100.0)
        assert np.allclose(accel, 0.0)

    def test_interior_lattice_cancels(self):
        state = lattice_state()
        pairs = fluid_pairs(state, fluid_kernel(0.01))
        accel = transport_velocity_rate(state, pairs, 1000.0 * 4.0)
        center = np.argmin(np.linalg.norm(state.pos - state.pos.mean(axis=0), axis=1))
        assert np.abs(accel[center]).max() < 1e-6 * WATER.v_max


class TestFreeSurface:
    def test_interior_divergence_near_two(self):
        state = lattice_state()
        kernel = fluid_kernel(0.01)
        pairs = fluid_pairs(state, kernel)
        _, div = kernel_sums(state, pairs, kernel)
        center = np.argmin(np.linalg.norm(state.pos - state.pos.mean(axis=0), axis=1))
        assert div[center] == pytest.approx(2.0, abs=0.05)
        flags = detect_free_surface(state, pairs, kernel)
        assert not flags[center]

    def test_half_support_flagged_surface(self):
        dp = 0.01
        state = lattice_state(dp=dp, nx=13, ny=6)
        kernel = fluid_kernel(dp)
        pairs = fluid_pairs(state, kernel)
        _, div = kernel_sums(state, pairs, kernel)
        # middle particle of the top row: empty upper half support
        row = state.pos[:, 1] == state.pos[:, 1].max()
        top = np.nonzero(row)[0][6]
        # half-lattice summation oracle: same row and everything below
        from sphrl.kernels import kernel_derivative
        expected = 0.0
        reach = int(math.ceil(kernel.cutoff / dp)) + 1
        for ix in range(-reach, reach + 1):
            for iy in range(-reach, 1):
                if ix == 0 and iy == 0:
                    continue
                r = math.hypot(ix * dp, iy * dp)
                if r < kernel.cutoff:
                    expected += -r * kernel_derivative(r, kernel) * dp * dp
        assert div[top] == pytest.approx(expected, rel=1e-3)
        assert expected < 1.5  # below the 0.75 d threshold
        flags = detect_free_surface(state, pairs, kernel)
        assert flags[top]

    def test_isolated_particle_surface(self):
        state = FluidState.from_positions(np.zeros((1, 2)), WATER, 0.01)
        kernel = fluid_kernel(0.01)
        pairs = fluid_pairs(state, kernel)
        flags = detect_free_surface(state, pairs, kernel)
        assert flags[0]


class TestFreeStream:
    def _surface_state(self):
        state = lattice_state(dp=0.01, nx=5, ny=5)
        state.surface[:] = False
        state.surface[:3] = True
        return state

    def test_fixed_point(self):
        state = self._surface_state()
        state.vel[:, 0] = 0.2
        rho_sum = np.full(state.n, 1000.0)
        free_stream_correct(state, 0.2, rho_sum, rho0=1000.0)
        assert np.allclose(state.vel[:, 0], 0.2)
        assert np.allclose(state.rho, 1000.0)

    def test_full_weight_relaxation(self):
        state = self._surface_state()
        state.vel[:, 0] = 0.0
        rho_sum = np.full(state.n, 1000.0)
        free_stream_correct(state, 0.2, rho_sum, rho0=1000.0)
        assert np.allclose(state.vel[state.surface, 0], 0.2)
        assert np.allclose(state.vel[~state.surface, 0], 0.0)

    def test_clamp_branch_takes_summation(self):
        state = self._surface_state()
        state.rho[:] = 990.0  # below the summation value
        rho_sum = np.full(state.n, 1002.0)
        free_stream_correct(state, 0.2, rho_sum, rho0=1000.0)
        assert np.allclose(state.rho[state.surface], 1002.0)


class TestDampingZone:
    def test_entrance_unchanged(self):
        state = lattice_state(dp=0.01, nx=4, ny=4)
        state.pos[:, 0] = 1.0  # exactly at the zone entrance
        state.vel[:, 0] = 0.5
        apply_damping_zone(state, 1.0, 2.0, 1e-4)
        assert np.allclose(state.vel[:, 0], 0.5)

    def test_end_wall_factor(self):
        state = lattice_state(dp=0.01, nx=1, ny=1)
        state.pos[0] = [2.0, 0.0]
        state.vel[0] = [1.0, -0.4]
        apply_damping_zone(state, 1.0, 2.0, 1e-4, alpha=5.0)
        assert np.allclose(state.vel[0], np.array([1.0, -0.4]) * 0.9995)

    def test_zero_velocity_stays(self):
        state = lattice_state(dp=0.01, nx=1, ny=1)
        state.pos[0] = [1.5, 0.0]
        apply_damping_zone(state, 1.0, 2.0, 1e-4)
        assert np.allclose(state.vel, 0.0)


class TestAcousticSubstep:
    def test_zero_rates_keep_state(self):
        state = lattice_state(dp=0.01, nx=3, ny=3)
        before_pos = state.pos.copy()
        acoustic_substep(state, np.zeros(state.n), np.zeros((state.n, 2)), 1e-4)
        assert np.array_equal(state.pos, before_pos)

    def test_ballistic_closed_form(self):
        state = FluidState.from_positions(np.zeros((1, 2)), WATER, 0.01)
        a = np.array([[0.0, -9.81]])
        dt = 1e-3
        for _ in range(1000):
            acoustic_substep(state, np.zeros(1), a, dt)
        t = 1.0
        assert state.pos[0, 1] == pytest.approx(0.5 * -9.81 * t * t, abs=1e-6)
        assert state.vel[0, 1] == pytest.approx(-9.81 * t, abs=1e-9)

    def test_nan_aborts(self):
        state = FluidState.from_positions(np.zeros((1, 2)), WATER, 0.01)
        with pytest.raises(SolverBlowUp):
            acoustic_substep(state, np.zeros(1), np.full((1, 2), np.nan), 1e-4)

    def test_mass_is_invariant_array(self):
        state = lattice_state()
        total = state.mass.sum()
        acoustic_substep(state, np.full(state.n, 5.0), np.ones((state.n, 2)), 1e-3)
        assert state.mass.sum() == total
