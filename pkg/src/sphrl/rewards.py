"""Reward functions, action ramps, active-strain fields and the swimming
performance metrics of the four control cases.

Penalty terms always decrease the reward: a triggered velocity penalty
costs 1, a triggered displacement penalty costs 10.
"""

from __future__ import annotations

import math

import numpy as np

STRAIN_RAMP_TAU = 0.2  # s, start-up ramp of the active strain


def ramp_increment(delta: float, n_substeps: int, bound: float) -> float:
    """Per-substep increment spreading an action over n equal updates; the
    action is clamped to its per-step bound first."""
    if n_substeps <= 0:
        raise ValueError("need at least one substep")
    return float(np.clip(delta, -bound, bound)) / n_substeps


def reward_sloshing_rigid(eta_l: float, eta_r: float, height_scale: float,
                          vy_l: float, vy_r: float, dy_l: float, dy_r: float,
                          v_limit: float = 0.06, y_limit: float = 0.05):
    """Rigid-baffle sloshing reward with velocity and displacement penalties.

    Returns (reward, velocity_penalty_hit, displacement_penalty_hit);
    tripping the displacement penalty also terminates the episode.
    """
    r = 1.0 - abs(eta_l - eta_r) / height_scale
    p0 = abs(vy_l) > v_limit or abs(vy_r) > v_limit
    p1 = abs(dy_l) > y_limit or abs(dy_r) > y_limit
    if p0:
        r -= 1.0
    if p1:
        r -= 10.0
    return r, p0, p1


def reward_sloshing_elastic(eta_l: float, eta_r: float, height_scale: float,
                            eps0: float, eps_lo: float = 0.0, eps_hi: float = 0.2):
    """Elastic-baffle sloshing reward; only the amplitude-bounds penalty."""
    r = 1.0 - abs(eta_l - eta_r) / height_scale
    p0 = eps0 < eps_lo or eps0 > eps_hi
    if p0:
        r -= 1.0
    return r, p0


def pto_power(kd_samples, omega_samples) -> float:
    """Energy capture of one action step: sum of k_d ((O_n+1 + O_n)/2)^2
    over the sub-intervals; needs one more angular velocity sample than
    damping samples."""
    kd = np.asarray(kd_samples, dtype=np.float64)
    om = np.asarray(omega_samples, dtype=np.float64)
    if om.shape[0] != kd.shape[0] + 1:
        raise ValueError(
            f"need {kd.shape[0] + 1} angular velocity samples for {kd.shape[0]} sub-intervals, "
            f"got {om.shape[0]}")
    mid = 0.5 * (om[1:] + om[:-1])
    return float(np.sum(kd * mid * mid))


def reward_owsc(p_out_policy: float, p_out_baseline: float, k_d: float,
                kd_lo: float = 0.0, kd_hi: float = 100.0):
    """Capture improvement over the fixed-damping baseline, with a penalty
    when the damping leaves its admissible band."""
    r = p_out_policy - p_out_baseline
    p0 = k_d < kd_lo or k_d > kd_hi
    if p0:
        r -= 1.0
    return r, p0


def reward_fish(mean_y: float, centerline_y: float) -> float:
    """Station keeping: 1 minus the distance from the centerline."""
    return 1.0 - abs(mean_y - centerline_y)


def startup_ramp(t: float, tau: float = STRAIN_RAMP_TAU) -> float:
    """Smooth activation 1 - exp(-t/tau) that protects the initial stage."""
    return 1.0 - math.exp(-t / tau)


def baffle_active_strain(eps0: float, omega: float, baffle_height: float,
                         y: np.ndarray | float, side_phase: np.ndarray | float,
                         t: float) -> np.ndarray | float:
    """Traveling contraction wave along the baffle.

    The envelope (h_b^2 - Y^2)/h_b^2 vanishes at the free tip Y = h_b and
    peaks at the clamped root; opposite faces run in antiphase.
    """
    k_b = 2.0 * math.pi / (3.0 * baffle_height)
    phase = 0.5 * (omega * t + k_b * np.asarray(y, dtype=np.float64) + side_phase)
    envelope = (baffle_height**2 - np.asarray(y, dtype=np.float64) ** 2) / baffle_height**2
    out = -eps0 * np.sin(phase) ** 2 * envelope * startup_ramp(t)
    return float(out) if np.isscalar(y) else out


def fish_active_strain(eps0, omega: float, wave_number: float, body_length: float,
                       x: np.ndarray | float, side_phase: np.ndarray | float,
                       t: float) -> np.ndarray | float:
    """Traveling contraction wave along the fish body.

    The envelope X^2/L^2 vanishes at the head (X = 0) and peaks at the
    tail; ``eps0`` may be per-particle (left/right amplitudes differ under
    steering control).
    """
    xx = np.asarray(x, dtype=np.float64)
    phase = 0.5 * (omega * t + wave_number * (body_length - xx) + side_phase)
    envelope = xx**2 / body_length**2
    out = -np.asarray(eps0, dtype=np.float64) * np.sin(phase) ** 2 * envelope * startup_ramp(t)
    return float(out) if np.isscalar(x) else out


def active_gradient_from_strain(ea: np.ndarray | float):
    """Diagonal active deformation with E_a = (Fa^T Fa - I)/2 acting along
    the fiber (x) direction: Fa = diag(sqrt(1 + 2 E_a), 1)."""
    ea = np.asarray(ea, dtype=np.float64)
    arg = 1.0 + 2.0 * ea
    if np.any(arg <= 0.0):
        raise ValueError("active strain at or below the collapse limit -0.5")
    return np.sqrt(arg)


def thrust_force(f_pressure: np.ndarray, f_viscous: np.ndarray):
    """Net and thrust force on the body from the per-particle fluid forces.

    F_abs takes component-wise absolute values, so pure drag contributes
    nothing to the thrust.
    """
    fp = np.asarray(f_pressure, dtype=np.float64).reshape(-1, 2)
    fv = np.asarray(f_viscous, dtype=np.float64).reshape(-1, 2)
    f_net = fp.sum(axis=0) + fv.sum(axis=0)
    f_abs = np.abs(fp).sum(axis=0) + np.abs(fv).sum(axis=0)
    return f_net, 0.5 * (f_net + f_abs)


def active_strain_work(s_active: np.ndarray, delta_ea: np.ndarray, vol0: np.ndarray) -> float:
    """Work increment of the muscle: sum of sigma_active : dE_a V over the
    body, with the strain increment along the fiber direction."""
    return float(np.sum(np.asarray(s_active) * np.asarray(delta_ea) * np.asarray(vol0)))


def swimming_efficiency(thrust: np.ndarray, v_fish: np.ndarray, dt: float,
                        work_increments: np.ndarray):
    """Propulsive efficiency over one tail-beat cycle; None when the muscle
    did no work (efficiency undefined)."""
    w_total = float(np.sum(work_increments))
    if w_total == 0.0:
        return None
    thrust = np.asarray(thrust, dtype=np.float64).reshape(-1, 2)
    v = np.asarray(v_fish, dtype=np.float64).reshape(-1, 2)
    useful = float(np.sum(thrust[:, 0] * v[:, 0] + thrust[:, 1] * v[:, 1]) * dt)
    return useful / w_total
