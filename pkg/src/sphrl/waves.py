"""Piston wavemaker motion, the linear dispersion relation and the
second-order Stokes reference elevation used to validate the wave tank."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

GRAVITY = 9.81


def solve_dispersion(omega: float, depth: float, g: float = GRAVITY) -> float:
    """Wave number k with omega^2 = g k tanh(k h), by bisection.

    g k tanh(kh) is monotone in k, so the root is always bracketed by
    (1e-6, omega^2/g + 10/h]; the residual is driven below 1e-10.
    """
    if omega <= 0.0 or depth <= 0.0:
        raise ValueError("dispersion requires positive frequency and depth")
    target = omega * omega
    lo = 1e-6
    hi = target / g + 10.0 / depth
    while True:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:  # bracket collapsed to machine precision
            return mid
        if g * mid * math.tanh(mid * depth) < target:
            lo = mid
        else:
            hi = mid


@dataclass(frozen=True)
class WaveMakerSpec:
    """Piston stroke parameters of the second-order Stokes wave generator."""

    wave_height: float  # H, m
    frequency: float  # f, Hz
    water_depth: float  # h, m
    g: float = GRAVITY
    k: float = field(init=False)
    n0: float = field(init=False)
    s0: float = field(init=False)

    def __post_init__(self):
        omega = 2.0 * math.pi * self.frequency
        k = solve_dispersion(omega, self.water_depth, self.g)
        kh = k * self.water_depth
        n0 = (math.sinh(2.0 * kh) + 2.0 * kh) / (2.0 * math.sinh(2.0 * kh))
        s0 = self.wave_height * n0 / (2.0 * math.tanh(kh))
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "n0", n0)
        object.__setattr__(self, "s0", s0)

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.frequency

    def second_harmonic_factor(self) -> float:
        kh = self.k * self.water_depth
        return 3.0 * self.wave_height / (
            4.0 * self.n0 * self.water_depth * (4.0 * math.sinh(kh) ** 2 - self.n0 / 2.0)
        )


def wavemaker_displacement(spec: WaveMakerSpec, t: float) -> float:
    """Piston displacement r_m(t); starts at -S0 (cosine stroke)."""
    wt = spec.omega * t
    return -spec.s0 * math.cos(wt) - spec.s0 * spec.second_harmonic_factor() * math.sin(2.0 * wt)


def wavemaker_velocity(spec: WaveMakerSpec, t: float) -> float:
    wt = spec.omega * t
    return spec.s0 * spec.omega * math.sin(wt) \
        - 2.0 * spec.omega * spec.s0 * spec.second_harmonic_factor() * math.cos(2.0 * wt)


def wavemaker_acceleration(spec: WaveMakerSpec, t: float) -> float:
    wt = spec.omega * t
    return spec.s0 * spec.omega**2 * math.cos(wt) \
        + 4.0 * spec.omega**2 * spec.s0 * spec.second_harmonic_factor() * math.sin(2.0 * wt)


def stokes_elevation(spec: WaveMakerSpec, x: float, t: float, phase: float = 0.0) -> float:
    """Second-order Stokes free-surface elevation about still water."""
    kh = spec.k * spec.water_depth
    arg = spec.k * x - spec.omega * t + phase
    a1 = 0.5 * spec.wave_height
    a2 = (spec.wave_height**2 * spec.k / 16.0) * (
        math.cosh(kh) / math.sinh(kh) ** 3
    ) * (2.0 + math.cosh(2.0 * kh))
    return a1 * math.cos(arg) + a2 * math.cos(2.0 * arg)


def prescribed_harmonic_motion(amplitude: float, omega: float, t: float):
    """Harmonic displacement A sin(omega t) and its analytic velocity and
    acceleration; the tank excitation and the plunging airfoil both use it."""
    s, c = math.sin(omega * t), math.cos(omega * t)
    return amplitude * s, amplitude * omega * c, -amplitude * omega * omega * s
