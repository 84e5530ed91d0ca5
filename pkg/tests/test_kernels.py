import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphrl.grid import brute_force_pairs, build_cell_grid, pairs_within
from sphrl.kernels import (
    KernelModel,
    consistency_matrix,
    kernel_derivative,
    kernel_gradient,
    kernel_value,
    lattice_positions,
    reference_kernel_sum,
    wkgc_matrix,
)


def lattice_neighbors(dp, h, include_center=False):
    """Relative lattice offsets within the cutoff of a kernel with length h."""
    k = KernelModel(h=h)
    n = int(math.ceil(k.cutoff / dp)) + 1
    offs = []
    for ix in range(-n, n + 1):
        for iy in range(-n, n + 1):
            if ix == 0 and iy == 0 and not include_center:
                continue
            r = math.hypot(ix * dp, iy * dp)
            if r < k.cutoff:
                offs.append((ix * dp, iy * dp))
    return np.array(offs)


class TestKernelValue:
    def test_support_boundary(self):
        k = KernelModel(h=0.7)
        assert kernel_value(3 * k.h, k) == 0.0
        assert kernel_value(4 * k.h, k) == 0.0

    def test_center_value(self):
        # W(0) = norm * (3^5 - 6*2^5 + 15) = 66 * 7/(478 pi)
        k = KernelModel(h=1.0)
        assert kernel_value(0.0, k) == pytest.approx(66.0 * 7.0 / (478.0 * math.pi), rel=1e-12)

    def test_unit_integral(self):
        # 2 pi int_0^3 W(q) q dq = 1 (radial quadrature oracle)
        k = KernelModel(h=1.0)
        q = np.linspace(0.0, 3.0, 30001)
        integrand = kernel_value(q, k) * q
        total = 2.0 * math.pi * np.trapezoid(integrand, q)
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_non_negative_monotone(self):
        k = KernelModel(h=0.5)
        r = np.linspace(0, 2.5 * k.h, 400)
        w = kernel_value(r, k)
        assert np.all(w >= 0.0)
        assert np.all(np.diff(w) <= 1e-15)

    def test_partition_of_unity_on_lattice(self):
        dp = 0.01
        k = KernelModel(h=dp)
        offs = lattice_neighbors(dp, k.h, include_center=True)
        total = np.sum(kernel_value(np.hypot(offs[:, 0], offs[:, 1]), k)) * dp * dp
        assert abs(total - 1.0) < 1e-3

    def test_reference_sum_matches_partition(self):
        dp = 0.004
        k = KernelModel(h=dp)
        assert reference_kernel_sum(dp, k) * dp * dp == pytest.approx(1.0, abs=1e-3)

    def test_invalid_h_rejected(self):
        with pytest.raises(ValueError):
            KernelModel(h=0.0)


class TestKernelGradient:
    def test_zero_at_support_boundary(self):
        k = KernelModel(h=1.0)
        assert np.allclose(kernel_gradient(np.array([3.0, 0.0]), k), 0.0)

    def test_antisymmetry(self):
        k = KernelModel(h=1.0)
        rij = np.array([0.3, -0.8])
        assert np.allclose(kernel_gradient(rij, k), -kernel_gradient(-rij, k))

    def test_closed_form_magnitude(self):
        # dW/dq at q=1: -5*(3-1)^4 + 30*(2-1)^4 = -50, times norm/h
        k = KernelModel(h=1.0)
        g = kernel_gradient(np.array([1.0, 0.0]), k)
        expected = 50.0 * 7.0 / (478.0 * math.pi)
        assert abs(g[0]) == pytest.approx(expected, rel=1e-12)
        assert g[0] < 0.0  # e_ij * W' with W' negative inside the support
        assert g[1] == 0.0

    def test_coincident_particles_zero(self):
        k = KernelModel(h=1.0)
        assert np.allclose(kernel_gradient(np.zeros(2), k), 0.0)

    def test_matches_finite_difference(self):
        k = KernelModel(h=0.37)
        for r in [0.1, 0.2, 0.5, 0.7]:
            fd = (kernel_value(r + 1e-7, k) - kernel_value(r - 1e-7, k)) / 2e-7
            assert kernel_derivative(r, k) == pytest.approx(fd, rel=1e-6)


class TestCellGrid:
    def test_single_particle_one_bucket(self):
        g = build_cell_grid(np.array([[0.5, 0.5]]), 0.1)
        assert g.n_points == 1
        assert len(g.buckets) == 1

    def test_far_particles_no_pair(self):
        pos = np.array([[0.0, 0.0], [0.3, 0.0]])
        assert pairs_within(pos, 0.1).shape[0] == 0

    def test_empty_input(self):
        g = build_cell_grid(np.empty((0, 2)), 0.1)
        assert g.n_points == 0

    def test_invalid_cutoff(self):
        with pytest.raises(ValueError):
            build_cell_grid(np.zeros((3, 2)), 0.0)

    def test_matches_brute_force_random(self):
        rng = np.random.default_rng(42)
        pos = rng.uniform(0, 1, size=(100, 2))
        cutoff = 0.13
        got = pairs_within(pos, cutoff)
        want = brute_force_pairs(pos, cutoff)
        assert np.array_equal(got, want)

    @settings(max_examples=30, deadline=None)
    @given(
        n=st.integers(min_value=0, max_value=120),
        cutoff=st.floats(min_value=0.02, max_value=0.5),
        seed=st.integers(min_value=0, max_value=2**31),
    )
    def test_property_matches_brute_force(self, n, cutoff, seed):
        rng = np.random.default_rng(seed)
        pos = rng.uniform(-1, 1, size=(n, 2))
        got = pairs_within(pos, cutoff)
        want = brute_force_pairs(pos, cutoff)
        assert np.array_equal(got, want)


class TestConsistencyMatrix:
    def _lattice_rij_vol(self, dp, h):
        offs = lattice_neighbors(dp, h)
        return -offs, np.full(offs.shape[0], dp * dp)  # rij = r_i - r_j = -offset

    def test_interior_lattice_near_identity(self):
        dp = 0.01
        k = KernelModel(h=dp)
        rij, vol = self._lattice_rij_vol(dp, k.h)
        a = consistency_matrix(rij, vol, k)
        assert np.linalg.norm(a - np.eye(2)) < 5e-2

    def test_isolated_particle_zero(self):
        k = KernelModel(h=1.0)
        assert np.allclose(consistency_matrix(np.empty((0, 2)), np.empty(0), k), 0.0)

    def test_half_space_deficient(self):
        dp = 0.01
        k = KernelModel(h=dp)
        offs = lattice_neighbors(dp, k.h)
        keep = offs[:, 0] > 1e-12  # neighbors only in the right half-space
        rij = -offs[keep]
        vol = np.full(keep.sum(), dp * dp)
        a = consistency_matrix(rij, vol, k)
        assert np.linalg.norm(a - np.eye(2)) > 0.2


class TestWkgc:
    def test_identity_fixed_point(self):
        assert np.allclose(wkgc_matrix(np.eye(2)), np.eye(2))

    def test_regular_support_exact_inverse(self):
        a = np.array([[0.9, 0.1], [-0.05, 0.8]])  # det = 0.725 >= 0.5
        assert np.linalg.det(a) >= 0.5
        assert np.allclose(wkgc_matrix(a), np.linalg.inv(a), atol=1e-14)

    def test_hand_case_blend(self):
        b = wkgc_matrix(0.1 * np.eye(2))
        # det = 0.01, eps = 0.49; B = 0.02*(10 I) + 0.98 I = 1.18 I
        assert np.allclose(b, 1.18 * np.eye(2), atol=1e-14)

    def test_degenerate_returns_identity(self):
        assert np.allclose(wkgc_matrix(np.zeros((2, 2))), np.eye(2))

    def test_continuity_at_threshold(self):
        for scale in [1.0, 0.77]:
            base = scale * np.array([[1.0, 0.2], [-0.1, 1.0]])
            det = np.linalg.det(base)
            lo = base * math.sqrt((0.5 - 1e-9) / det)
            hi = base * math.sqrt((0.5 + 1e-9) / det)
            assert np.linalg.norm(wkgc_matrix(lo) - wkgc_matrix(hi)) < 1e-6


class TestFirstOrderConsistency:
    def test_corrected_gradient_reproduces_linear_field(self):
        dp = 0.01
        k = KernelModel(h=dp)
        offs = lattice_neighbors(dp, k.h)
        rij = -offs
        vol = np.full(offs.shape[0], dp * dp)
        a = consistency_matrix(rij, vol, k)
        b = wkgc_matrix(a)
        slope = np.array([1.7, -0.4])
        grad_est = np.zeros(2)
        for off, v in zip(offs, vol):
            fj_minus_fi = slope @ off
            gw = kernel_gradient(-off, k)
            grad_est += fj_minus_fi * (b @ gw) * v
        assert np.allclose(grad_est, slope, atol=1e-8)

    def test_corrected_gradient_half_space(self):
        # WKGC restores first-order consistency even with deficient support
        # whenever det(A) >= alpha (then B = A^-1 exactly)
        dp = 0.01
        k = KernelModel(h=dp)
        offs = lattice_neighbors(dp, k.h)
        keep = offs[:, 0] > -1e-12
        offs = offs[keep]
        vol = np.full(offs.shape[0], dp * dp)
        a = consistency_matrix(-offs, vol, k)
        if np.linalg.det(a) >= 0.5:
            b = wkgc_matrix(a)
            slope = np.array([0.3, 2.0])
            grad_est = np.zeros(2)
            for off, v in zip(offs, vol):
                grad_est += (slope @ off) * (b @ kernel_gradient(-off, k)) * v
            assert np.allclose(grad_est, slope, atol=1e-8)


def test_lattice_positions_counts():
    pos = lattice_positions(0.0, 0.0, 1.0, 0.5, 0.1)
    assert pos.shape == (50, 2)
    assert pos.min(axis=0) == pytest.approx([0.05, 0.05])
    assert pos.max(axis=0) == pytest.approx([0.95, 0.45])
