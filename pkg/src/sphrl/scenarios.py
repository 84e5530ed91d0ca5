"""The four control cases: geometry builders, prescribed motions, reward
wiring, probe layouts and the action controllers that turn agent commands
into solver inputs.

Each case is described by a ScenarioSpec (JSON-serializable, strictly
validated) and realized by ``build_scenario`` as a Simulation plus a
controller implementing the begin/finish action protocol used by the
environment.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fluid import FluidMaterial, sloshing_speed_scale
from .kernels import lattice_positions
from .probes import probe_field_point, probe_surface_height
from .rewards import (
    baffle_active_strain,
    fish_active_strain,
    pto_power,
    reward_fish,
    reward_owsc,
    reward_sloshing_elastic,
    reward_sloshing_rigid,
)
from .simulation import (
    ControlledBody,
    ElasticBody,
    FreeStreamSpec,
    HingedBody,
    PrescribedBody,
    Simulation,
    StaticBody,
    hydrostatic_column,
)
from .solid import TAG_BONE, TAG_RED_MUSCLE, TAG_WHITE_MUSCLE, lame_parameters
from .waves import WaveMakerSpec, prescribed_harmonic_motion, wavemaker_acceleration, wavemaker_displacement, wavemaker_velocity

GRAVITY = 9.81

VARIANTS = ("slosh_rigid", "slosh_elastic", "owsc", "fish")


class ConfigError(ValueError):
    """Raised on malformed or unknown configuration input."""


@dataclass
class ScenarioSpec:
    """Complete, serializable description of one trainable case."""

    variant: str
    dp: float
    geometry: dict
    excitation: dict
    action: dict
    reward: dict
    probes: dict
    numerics: dict
    restart_time: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "variant": self.variant,
                "dp": self.dp,
                "geometry": self.geometry,
                "excitation": self.excitation,
                "action": self.action,
                "reward": self.reward,
                "probes": self.probes,
                "numerics": self.numerics,
                "restart_time": self.restart_time,
            },
            indent=2, sort_keys=True)

    def config_hash(self) -> str:
        import hashlib

        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


def _merge_strict(defaults: dict, override: dict, path: str) -> dict:
    out = copy.deepcopy(defaults)
    for key, value in override.items():
        if key not in defaults:
            raise ConfigError(f"unknown key '{key}' in section '{path}'")
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"section '{path}.{key}' must be an object")
            out[key] = _merge_strict(defaults[key], value, f"{path}.{key}")
        else:
            out[key] = value
    return out


def builtin_names() -> list[str]:
    return sorted(_BUILTINS)


def builtin_spec(name: str) -> ScenarioSpec:
    if name not in _BUILTINS:
        raise ConfigError(f"unknown builtin scenario '{name}'; available: {', '.join(builtin_names())}")
    return parse_spec(copy.deepcopy(_BUILTINS[name]))


def parse_spec(doc: dict) -> ScenarioSpec:
    """Validate a configuration document; unknown keys are rejected with
    the offending key named."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    variant = doc.get("variant")
    if variant not in VARIANTS:
        raise ConfigError(f"'variant' must be one of {VARIANTS}, got {variant!r}")
    base = copy.deepcopy(_DEFAULTS[variant])
    top_known = {"variant", "dp", "geometry", "excitation", "action", "reward",
                 "probes", "numerics", "restart_time"}
    for key in doc:
        if key not in top_known:
            raise ConfigError(f"unknown key '{key}' at top level")
    if "dp" not in doc and "dp" not in base:
        raise ConfigError("missing required key 'dp'")
    merged = {}
    for section in ("geometry", "excitation", "action", "reward", "probes", "numerics"):
        merged[section] = _merge_strict(base[section], doc.get(section, {}), section)
    dp = float(doc.get("dp", base.get("dp")))
    if not dp > 0:
        raise ConfigError(f"'dp' must be positive, got {dp}")
    spec = ScenarioSpec(
        variant=variant,
        dp=dp,
        geometry=merged["geometry"],
        excitation=merged["excitation"],
        action=merged["action"],
        reward=merged["reward"],
        probes=merged["probes"],
        numerics=merged["numerics"],
        restart_time=float(doc.get("restart_time", base["restart_time"])),
    )
    _validate(spec)
    return spec


def load_spec(path) -> ScenarioSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: invalid JSON ({err})") from err
    return parse_spec(doc)


def _validate(spec: ScenarioSpec) -> None:
    for key, value in spec.geometry.items():
        if isinstance(value, (int, float)) and key.endswith(("length", "depth", "height", "width", "thickness", "chord")):
            if value <= 0:
                raise ConfigError(f"geometry.{key} must be positive, got {value}")
    if spec.action["bound"] <= 0:
        raise ConfigError("action.bound must be positive")
    if spec.action["dt"] <= 0:
        raise ConfigError("action.dt must be positive")


# --------------------------------------------------------------------------
# defaults (geometry and excitation of the four cases, plus the validation
# presets reproduced by the command line)

_DEFAULTS: dict[str, dict] = {
    "slosh_rigid": {
        "dp": 0.003,
        "restart_time": 24.0,
        "geometry": {
            "tank_length": 1.0,
            "water_depth": 0.3,
            "wall_height": 0.6,
            "baffle_mode": "controlled",  # controlled | fixed | none
            "baffle_width": 0.1,
            "baffle_thickness": 0.02,
            "baffle_submergence": 0.12,  # top face below still water
            "baffle_wall_gap": 0.05,
        },
        "excitation": {"amplitude": 0.002, "omega": 4.762},
        "action": {"dim": 2, "bound": 0.03, "dt": 0.1, "per_episode": 200,
                   "ramp_substeps": 30},
        "reward": {"height_scale": 0.02, "v_limit": 0.06, "y_limit": 0.05,
                   "wall_probe_offset": 0.02},
        "probes": {"stations": 11, "station_depth_offset": 2.0},
        "numerics": {"beta_floor": 0.05, "relax_until": 0.0, "viscosity": 1e-3},
    },
    "slosh_elastic": {
        "dp": 0.002,
        "restart_time": 0.5,
        "geometry": {
            "tank_length": 0.5,
            "water_depth": 0.15,
            "wall_height": 0.3,
            "baffle_thickness": 0.008,
            "baffle_height": 0.2,
            "baffle_x": 0.25,
            "clamp_depth": 0.026,
            "solid_dp": 0.002,
        },
        "excitation": {"amplitude": 0.01, "omega": 8.08},
        "material": None,  # placeholder replaced below
        "action": {"dim": 1, "bound": 0.025, "dt": 0.1, "per_episode": 200,
                   "ramp_substeps": 30, "eps_lo": 0.0, "eps_hi": 0.2,
                   "eps_init": 0.1},
        "reward": {"height_scale": 0.05, "wall_probe_offset": 0.02},
        "probes": {"stations": 11, "station_depth_offset": 2.0,
                   "baffle_points_per_side": 4},
        "numerics": {"beta_floor": 0.05, "relax_until": 0.0, "viscosity": 1e-3},
    },
    "owsc": {
        "dp": 0.032,
        "restart_time": 4.0,
        "geometry": {
            "flume_length": 15.0,
            "water_depth": 0.64,
            "wall_height": 1.1,
            "base_height": 0.1,
            "base_width": 0.5,
            "flap_height": 0.48,
            "flap_width": 0.12,
            "flap_x": 8.0,
            "hinge_above_base": 0.06,
            "flap_density": 500.0,
            "damping_zone_start": 13.0,
            "solid_dp": 0.016,
        },
        "excitation": {"wave_height": 0.15, "frequency": 0.5},
        "action": {"dim": 1, "bound": 25.0, "dt": 0.1, "per_episode": 200,
                   "kd_lo": 0.0, "kd_hi": 100.0, "kd_init": 60.0,
                   "power_subsamples": 10},
        "reward": {"kd_penalty_lo": 0.0, "kd_penalty_hi": 100.0},
        "probes": {"stations": 11, "station_span": [6.5, 9.0],
                   "station_depth_offset": 2.0},
        "numerics": {"beta_floor": 0.05, "relax_until": 0.0, "viscosity": 1e-3},
    },
    "fish": {
        "dp": 0.0025,
        "restart_time": 0.0,
        "geometry": {
            "domain_length": 0.5,
            "domain_height": 0.15,
            "chord": 0.1,
            "airfoil_nose_x": 0.1,
            "gap": 0.075,
            "solid_dp": 0.00125,
        },
        "excitation": {"plunge_amplitude": 0.003, "plunge_frequency": 4.0,
                       "inlet_velocity": 0.2},
        "action": {"dim": 1, "bound": 0.005, "dt": 0.025, "per_episode": 400,
                   "ramp_substeps": 30, "eps_init": 0.12, "eps_lo": 0.0,
                   "eps_hi": 0.24},
        "reward": {},
        "probes": {"per_side": 5, "lateral_offset": 2.5},
        "numerics": {"beta_floor": 0.05, "relax_until": 0.0, "viscosity": 2e-3,
                     "background_pressure_factor": 1.0},
    },
}
# the elastic baffle material block is a proper section of its own
_DEFAULTS["slosh_elastic"].pop("material")
_DEFAULTS["slosh_elastic"]["geometry"].update(
    {"youngs_modulus": 30e6, "poisson_ratio": 0.47, "baffle_density": 1250.0})
# fish tissue: bones stiffest, red muscle drives propulsion (values in Pa)
_DEFAULTS["fish"]["geometry"].update({
    "bone_modulus": 1.1e6, "white_modulus": 0.5e6, "red_modulus": 0.8e6,
    "tissue_density": 1050.0, "tissue_poisson": 0.49,
})

_BUILTINS: dict[str, dict] = {
    "slosh-rigid": {"variant": "slosh_rigid"},
    "slosh-elastic": {"variant": "slosh_elastic"},
    "owsc": {"variant": "owsc"},
    "fish": {"variant": "fish"},
    # validation presets: resonant bare tank (free-surface elevation probe
    # 0.02 m off the left wall; the 6.0578 rad/s forcing is the first-mode
    # resonance of a 0.15 m water depth)
    "slosh-rigid-fig6": {
        "variant": "slosh_rigid",
        "dp": 0.006,
        "geometry": {"tank_length": 0.57, "water_depth": 0.15,
                     "wall_height": 0.45, "baffle_mode": "none"},
        "excitation": {"amplitude": 0.005, "omega": 6.0578},
        "restart_time": 0.0,
    },
    # fixed rigid baffles, off-resonance forcing
    "slosh-rigid-fig8": {
        "variant": "slosh_rigid",
        "dp": 0.005,
        "geometry": {"baffle_mode": "fixed", "baffle_width": 0.2,
                     "baffle_submergence": 0.15},
        "excitation": {"amplitude": 0.002, "omega": 5.29},
        "restart_time": 0.0,
    },
    # numerical wave tank without the flap (second-order Stokes waves)
    "owsc-wavetank-fig22": {
        "variant": "owsc",
        "geometry": {"flap_x": -1.0},  # negative: no converter mounted
        "restart_time": 0.0,
    },
    # elastic baffle validation tank (passive deformation)
    "slosh-elastic-fig15": {
        "variant": "slosh_elastic",
        "geometry": {"tank_length": 1.0, "baffle_x": 0.5},
        "excitation": {"amplitude": 0.01, "omega": 4.14},
        "restart_time": 0.0,
    },
}


# --------------------------------------------------------------------------
# geometry helpers

def tank_wall_positions(length: float, height: float, dp: float, layers: int = 4) -> np.ndarray:
    """U-shaped tank boundary: bottom slab plus two side columns."""
    t = layers * dp
    return np.vstack([
        lattice_positions(-t, -t, length + t, 0.0, dp),
        lattice_positions(-t, 0.0, 0.0, height, dp),
        lattice_positions(length, 0.0, length + t, height, dp),
    ])


def block_positions(x0: float, y0: float, x1: float, y1: float, dp: float) -> np.ndarray:
    return lattice_positions(x0, y0, x1, y1, dp)


def naca0012_half_thickness(x_over_c: np.ndarray, chord: float) -> np.ndarray:
    """Closed-trailing-edge NACA0012 half thickness."""
    xc = np.clip(np.asarray(x_over_c, dtype=np.float64), 0.0, 1.0)
    yt = 5 * 0.12 * (0.2969 * np.sqrt(xc) - 0.1260 * xc - 0.3516 * xc**2
                     + 0.2843 * xc**3 - 0.1036 * xc**4)
    return yt * chord


def naca0012_positions(nose_x: float, center_y: float, chord: float, dp: float) -> np.ndarray:
    """Lattice points inside a NACA0012 profile with the nose upstream."""
    pts = lattice_positions(nose_x, center_y - 0.1 * chord, nose_x + chord,
                            center_y + 0.1 * chord, dp)
    xc = (pts[:, 0] - nose_x) / chord
    half = naca0012_half_thickness(xc, chord)
    keep = np.abs(pts[:, 1] - center_y) <= half
    return pts[keep]


# --------------------------------------------------------------------------
# controllers

class ScenarioController:
    """Per-case action/reward protocol driven by the environment.

    begin_action installs the ramped command for one window; slice_hook is
    called at each of the window's uniform sub-interval boundaries;
    finish_action evaluates the reward at the window end.
    """

    action_dim = 1
    slices_per_action = 10

    def attach(self, sim: Simulation) -> None:
        self.sim = sim

    def begin_action(self, t0: float, action_phys: np.ndarray) -> None:
        raise NotImplementedError

    def slice_hook(self, index: int) -> None:
        pass

    def finish_action(self):
        raise NotImplementedError

    def observe(self) -> dict[str, float]:
        raise NotImplementedError

    def manifest(self) -> list[tuple[str, float, float]]:
        """(name, offset, scale) per observation channel, in order."""
        raise NotImplementedError

    def extra_state(self) -> dict[str, np.ndarray]:
        return {}

    def load_extra_state(self, data: dict[str, np.ndarray]) -> None:
        pass


class _SurfaceStations:
    """Shared station probes: free-surface height and near-surface velocity
    at uniformly distributed x positions."""

    def __init__(self, xs: np.ndarray, dp: float, depth_offset: float, still_level: float):
        self.xs = xs
        self.dp = dp
        self.depth_offset = depth_offset
        self.last_heights = np.full(len(xs), still_level)

    def sample(self, sim: Simulation) -> dict[str, float]:
        from .kernels import fluid_kernel

        kernel = fluid_kernel(sim.dp)
        out = {}
        vel = np.column_stack([sim.f_vx, sim.f_vy])
        vol = sim.f_vol
        for k, x in enumerate(self.xs):
            eta, ok = probe_surface_height(sim.f_pos, sim.f_surf, x, 1.5 * self.dp,
                                           self.dp, self.last_heights[k])
            if ok:
                self.last_heights[k] = eta
            point = np.array([x, eta - self.depth_offset * self.dp])
            v, _, _ = probe_field_point(sim.f_pos, vel, sim.f_p, vol, point, kernel)
            out[f"eta_{k}"] = eta
            out[f"svx_{k}"] = float(v[0])
            out[f"svy_{k}"] = float(v[1])
        return out


def _ramp_value(base: float, delta: float, t: float, t0: float, dt_action: float,
                n_sub: int) -> float:
    """Commanded value at time t: base plus the ramped share of delta,
    applied in n_sub equal increments across the action window."""
    frac = (t - t0) / dt_action
    k = min(int(frac * n_sub) + 1, n_sub)
    return base + delta * k / n_sub


class SloshRigidController(ScenarioController):
    """Vertically moving rigid baffles suppressing resonant sloshing."""

    def __init__(self, spec: ScenarioSpec):
        self.spec = spec
        g = spec.geometry
        self.action_dim = spec.action["dim"] if g["baffle_mode"] == "controlled" else 0
        self.n_sub = spec.action["ramp_substeps"]
        self.slices_per_action = self.n_sub
        self.depth = g["water_depth"]
        self.length = g["tank_length"]
        xs = (np.arange(spec.probes["stations"]) + 0.5) * self.length / spec.probes["stations"]
        self.stations = _SurfaceStations(xs, spec.dp, spec.probes["station_depth_offset"], self.depth)
        self.eta_l = self.depth
        self.eta_r = self.depth
        self.v_cmd = np.zeros(2)  # commanded baffle velocities
        self.terminated = False

    def attach(self, sim: Simulation) -> None:
        super().attach(sim)
        self.baffles = []
        if self.spec.geometry["baffle_mode"] == "controlled":
            self.baffles = [sim.body_by_name("baffle_left"), sim.body_by_name("baffle_right")]

    def begin_action(self, t0: float, action_phys: np.ndarray) -> None:
        bound = self.spec.action["bound"]
        dt_action = self.spec.action["dt"]
        deltas = np.clip(action_phys, -bound, bound)
        starts = self.v_cmd.copy()
        n_sub = self.n_sub
        for b, body in enumerate(self.baffles):
            delta = float(deltas[b])
            start = float(starts[b])

            def vel_fn(t, start=start, delta=delta, t0=t0):
                vy = _ramp_value(start, delta, t, t0, dt_action, n_sub)
                return np.array([0.0, vy])

            body.velocity_fn = vel_fn
        self.v_cmd = starts + deltas

    def finish_action(self):
        data = self._wall_heights()
        r = self.spec.reward
        dy = [float(b.displacement[1]) for b in self.baffles] or [0.0, 0.0]
        reward, p0, p1 = reward_sloshing_rigid(
            data["eta_l"], data["eta_r"], r["height_scale"],
            self.v_cmd[0] if self.baffles else 0.0,
            self.v_cmd[1] if self.baffles else 0.0,
            dy[0], dy[1], v_limit=r["v_limit"], y_limit=r["y_limit"])
        self.terminated = bool(p1)
        info = {"eta_l": data["eta_l"], "eta_r": data["eta_r"],
                "p0": p0, "p1": p1, "t": self.sim.t}
        return reward, self.terminated, info

    def _wall_heights(self) -> dict[str, float]:
        off = self.spec.reward["wall_probe_offset"]
        eta_l, okl = probe_surface_height(self.sim.f_pos, self.sim.f_surf, off,
                                          1.5 * self.spec.dp, self.spec.dp, self.eta_l)
        eta_r, okr = probe_surface_height(self.sim.f_pos, self.sim.f_surf,
                                          self.length - off, 1.5 * self.spec.dp,
                                          self.spec.dp, self.eta_r)
        if okl:
            self.eta_l = eta_l
        if okr:
            self.eta_r = eta_r
        return {"eta_l": self.eta_l, "eta_r": self.eta_r}

    def observe(self) -> dict[str, float]:
        out = self.stations.sample(self.sim)
        for b, body in enumerate(self.baffles):
            side = "l" if b == 0 else "r"
            out[f"baffle_dy_{side}"] = float(body.displacement[1])
            out[f"baffle_vy_{side}"] = float(self.v_cmd[b])
        return out

    def manifest(self):
        r = self.spec.reward
        vmax = sloshing_speed_scale(GRAVITY, self.depth)
        rows = []
        for k in range(len(self.stations.xs)):
            rows.append((f"eta_{k}", self.depth, self.depth))
            rows.append((f"svx_{k}", 0.0, vmax))
            rows.append((f"svy_{k}", 0.0, vmax))
        for side in ("l", "r") if self.baffles else ():
            rows.append((f"baffle_dy_{side}", 0.0, r["y_limit"]))
            rows.append((f"baffle_vy_{side}", 0.0, r["v_limit"]))
        return rows

    def extra_state(self):
        return {"ctrl_vcmd": self.v_cmd,
                "ctrl_eta": np.array([self.eta_l, self.eta_r]),
                "ctrl_station_eta": self.stations.last_heights}

    def load_extra_state(self, data):
        self.v_cmd = np.array(data["ctrl_vcmd"], dtype=np.float64).copy()
        self.eta_l, self.eta_r = (float(v) for v in data["ctrl_eta"])
        self.stations.last_heights = np.array(data["ctrl_station_eta"], dtype=np.float64).copy()


class SloshElasticController(ScenarioController):
    """Muscle-like active strain on a clamped elastic baffle."""

    def __init__(self, spec: ScenarioSpec):
        self.spec = spec
        g = spec.geometry
        self.action_dim = spec.action["dim"]
        self.n_sub = spec.action["ramp_substeps"]
        self.slices_per_action = self.n_sub
        self.depth = g["water_depth"]
        self.length = g["tank_length"]
        xs = (np.arange(spec.probes["stations"]) + 0.5) * self.length / spec.probes["stations"]
        self.stations = _SurfaceStations(xs, spec.dp, spec.probes["station_depth_offset"], self.depth)
        self.eta_l = self.depth
        self.eta_r = self.depth
        self.eps0 = spec.action["eps_init"]
        self._window = (0.0, self.eps0, 0.0)  # t0, start, delta
        self.terminated = False

    def attach(self, sim: Simulation) -> None:
        super().attach(sim)
        self.baffle: ElasticBody = sim.body_by_name("baffle")
        g = self.spec.geometry
        self.omega_b = self.spec.excitation["omega"]
        self.h_b = g["baffle_height"]
        # reference height along the baffle and face side of each particle
        self.y_rel = self.baffle.layout[:, 1] - self.baffle.layout[:, 1].min()
        mid_x = self.baffle.layout[:, 0].mean()
        self.side_phase = np.where(self.baffle.layout[:, 0] <= mid_x, 0.0, math.pi)
        self.monitor_idx = self._monitor_particles()
        self.baffle.active_fn = self._active_field

    def _monitor_particles(self) -> list[int]:
        g = self.spec.geometry
        idx = []
        per_side = self.spec.probes["baffle_points_per_side"]
        mid_x = self.baffle.layout[:, 0].mean()
        for side_mask in (self.baffle.layout[:, 0] <= mid_x, self.baffle.layout[:, 0] > mid_x):
            side_ids = np.nonzero(side_mask)[0]
            for frac in (np.arange(per_side) + 1.0) / per_side:
                target = frac * g["baffle_height"]
                best = side_ids[np.argmin(np.abs(self.y_rel[side_ids] - target))]
                idx.append(int(best))
        return idx

    def _active_field(self, t: float, body: ElasticBody) -> np.ndarray:
        t0, start, delta = self._window
        dt_action = self.spec.action["dt"]
        if t <= t0:
            eps = start
        else:
            eps = _ramp_value(start, delta, t, t0, dt_action, self.n_sub)
        eps = float(np.clip(eps, self.spec.action["eps_lo"], self.spec.action["eps_hi"]))
        return baffle_active_strain(eps, self.omega_b, self.h_b, self.y_rel,
                                    self.side_phase, t)

    def begin_action(self, t0: float, action_phys: np.ndarray) -> None:
        bound = self.spec.action["bound"]
        delta = float(np.clip(action_phys[0], -bound, bound))
        self._window = (t0, self.eps0, delta)
        self.eps0 = self.eps0 + delta  # raw accumulation; penalty sees bounds

    def finish_action(self):
        off = self.spec.reward["wall_probe_offset"]
        eta_l, okl = probe_surface_height(self.sim.f_pos, self.sim.f_surf, off,
                                          1.5 * self.spec.dp, self.spec.dp, self.eta_l)
        eta_r, okr = probe_surface_height(self.sim.f_pos, self.sim.f_surf,
                                          self.length - off, 1.5 * self.spec.dp,
                                          self.spec.dp, self.eta_r)
        if okl:
            self.eta_l = eta_l
        if okr:
            self.eta_r = eta_r
        reward, p0 = reward_sloshing_elastic(
            self.eta_l, self.eta_r, self.spec.reward["height_scale"], self.eps0,
            eps_lo=self.spec.action["eps_lo"], eps_hi=self.spec.action["eps_hi"])
        # out-of-band commands are penalized, then clamped back into range
        self.eps0 = float(np.clip(self.eps0, self.spec.action["eps_lo"], self.spec.action["eps_hi"]))
        info = {"eta_l": self.eta_l, "eta_r": self.eta_r, "p0": p0,
                "eps0": self.eps0, "t": self.sim.t}
        return reward, False, info

    def observe(self) -> dict[str, float]:
        out = self.stations.sample(self.sim)
        sl = self.baffle.sl
        pos = self.sim.s_pos[sl]
        for n, pid in enumerate(self.monitor_idx):
            out[f"strain_{n}"] = float(self.baffle.ea[pid])
            out[f"deflect_{n}"] = float(pos[pid, 0] - self.baffle.layout[pid, 0])
        return out

    def manifest(self):
        vmax = sloshing_speed_scale(GRAVITY, self.depth)
        rows = []
        for k in range(len(self.stations.xs)):
            rows.append((f"eta_{k}", self.depth, self.depth))
            rows.append((f"svx_{k}", 0.0, vmax))
            rows.append((f"svy_{k}", 0.0, vmax))
        for n in range(len(self.monitor_idx)):
            rows.append((f"strain_{n}", 0.0, self.spec.action["eps_hi"]))
            rows.append((f"deflect_{n}", 0.0, self.spec.geometry["baffle_height"]))
        return rows

    def extra_state(self):
        return {"ctrl_eps0": np.array([self.eps0]),
                "ctrl_eta": np.array([self.eta_l, self.eta_r]),
                "ctrl_station_eta": self.stations.last_heights}

    def load_extra_state(self, data):
        self.eps0 = float(data["ctrl_eps0"][0])
        self.eta_l, self.eta_r = (float(v) for v in data["ctrl_eta"])
        self.stations.last_heights = np.array(data["ctrl_station_eta"], dtype=np.float64).copy()


class OwscController(ScenarioController):
    """Power-take-off damping control of the wave-surge flap."""

    def __init__(self, spec: ScenarioSpec):
        self.spec = spec
        self.action_dim = spec.action["dim"]
        self.slices_per_action = spec.action["power_subsamples"]
        g = spec.geometry
        self.depth = g["water_depth"]
        span = spec.probes["station_span"]
        xs = np.linspace(span[0], span[1], spec.probes["stations"])
        self.stations = _SurfaceStations(xs, spec.dp, spec.probes["station_depth_offset"], self.depth)
        self.kd = spec.action["kd_init"]
        self._window = (0.0, self.kd, 0.0)
        self.omega_samples: list[float] = []
        self.kd_samples: list[float] = []
        self.last_power = 0.0
        self.baseline_power = 0.0  # set by the environment per step

    def attach(self, sim: Simulation) -> None:
        super().attach(sim)
        self.flap: HingedBody = sim.body_by_name("flap")
        self.flap.kd_fn = self._kd_at

    def _kd_at(self, t: float) -> float:
        t0, start, delta = self._window
        if t <= t0:
            return start
        return _ramp_value(start, delta, t, t0, self.spec.action["dt"],
                           self.slices_per_action)

    def begin_action(self, t0: float, action_phys: np.ndarray) -> None:
        bound = self.spec.action["bound"]
        delta = float(np.clip(action_phys[0], -bound, bound))
        self._window = (t0, self.kd, delta)
        self.kd = self.kd + delta
        self.omega_samples = [self.flap.rigid.omega]
        self.kd_samples = []

    def slice_hook(self, index: int) -> None:
        self.kd_samples.append(self._kd_at(self.sim.t - 1e-12))
        self.omega_samples.append(self.flap.rigid.omega)

    def finish_action(self):
        p_e = pto_power(np.array(self.kd_samples), np.array(self.omega_samples))
        self.last_power = p_e
        reward, p0 = reward_owsc(p_e, self.baseline_power, self.kd,
                                 kd_lo=self.spec.reward["kd_penalty_lo"],
                                 kd_hi=self.spec.reward["kd_penalty_hi"])
        self.kd = float(np.clip(self.kd, self.spec.action["kd_lo"], self.spec.action["kd_hi"]))
        info = {"p_out": p_e, "p_base": self.baseline_power, "kd": self.kd,
                "theta": self.flap.rigid.theta, "omega": self.flap.rigid.omega,
                "p0": p0, "t": self.sim.t}
        return reward, False, info

    def observe(self) -> dict[str, float]:
        out = self.stations.sample(self.sim)
        out["flap_theta"] = self.flap.rigid.theta
        out["flap_omega"] = self.flap.rigid.omega
        out["kd"] = self.kd
        return out

    def manifest(self):
        vmax = sloshing_speed_scale(GRAVITY, self.depth)
        rows = []
        for k in range(len(self.stations.xs)):
            rows.append((f"eta_{k}", self.depth, self.depth))
            rows.append((f"svx_{k}", 0.0, vmax))
            rows.append((f"svy_{k}", 0.0, vmax))
        rows.append(("flap_theta", 0.0, 0.5))
        rows.append(("flap_omega", 0.0, 2.0))
        rows.append(("kd", 50.0, 50.0))
        return rows

    def extra_state(self):
        return {"ctrl_kd": np.array([self.kd]),
                "ctrl_station_eta": self.stations.last_heights}

    def load_extra_state(self, data):
        self.kd = float(data["ctrl_kd"][0])
        self.stations.last_heights = np.array(data["ctrl_station_eta"], dtype=np.float64).copy()


class FishController(ScenarioController):
    """Differential red-muscle amplitude steering a self-propelled swimmer."""

    def __init__(self, spec: ScenarioSpec):
        self.spec = spec
        self.action_dim = spec.action["dim"]
        self.n_sub = spec.action["ramp_substeps"]
        self.slices_per_action = self.n_sub
        self.eps = np.array([spec.action["eps_init"], spec.action["eps_init"]])
        self._window = (0.0, self.eps.copy(), 0.0)
        g = spec.geometry
        self.centerline = g["domain_height"] / 2.0
        self.chord = g["chord"]

    def attach(self, sim: Simulation) -> None:
        super().attach(sim)
        self.fish: ElasticBody = sim.body_by_name("fish")
        layout = self.fish.layout
        self.nose_x0 = layout[:, 0].min()
        self.x_rel = layout[:, 0] - self.nose_x0
        self.upper = layout[:, 1] >= self.centerline
        self.side_phase = np.where(self.upper, 0.0, math.pi)
        self.red = self.fish.tag_red
        exc = self.spec.excitation
        self.omega_f = 2.0 * math.pi * exc["plunge_frequency"]
        self.k_f = 2.0 * math.pi
        self.fish.active_fn = self._active_field
        self.probe_idx = self._probe_particles()

    def _probe_particles(self) -> list[int]:
        layout = self.fish.layout
        idx = []
        for upper in (True, False):
            mask = self.upper if upper else ~self.upper
            side_ids = np.nonzero(mask)[0]
            for frac in np.linspace(0.15, 0.9, self.spec.probes["per_side"]):
                target = frac * self.chord
                cands = side_ids[np.abs(self.x_rel[side_ids] - target) < 2 * self.fish.dp_s]
                if len(cands) == 0:
                    cands = side_ids
                extreme = cands[np.argmax(layout[cands, 1] if upper else -layout[cands, 1])]
                idx.append(int(extreme))
        return idx

    def _eps_at(self, t: float) -> np.ndarray:
        t0, start, delta = self._window
        if t <= t0:
            eps = start
        else:
            k = min(int((t - t0) / self.spec.action["dt"] * self.n_sub) + 1, self.n_sub)
            eps = start + np.array([delta, -delta]) * k / self.n_sub
        return np.clip(eps, self.spec.action["eps_lo"], self.spec.action["eps_hi"])

    def _active_field(self, t: float, body: ElasticBody) -> np.ndarray:
        eps_lr = self._eps_at(t)
        eps = np.where(self.upper, eps_lr[0], eps_lr[1])
        ea = fish_active_strain(eps, self.omega_f, self.k_f, self.chord,
                                self.x_rel, self.side_phase, t)
        return np.where(self.red, ea, 0.0)

    def begin_action(self, t0: float, action_phys: np.ndarray) -> None:
        bound = self.spec.action["bound"]
        delta = float(np.clip(action_phys[0], -bound, bound))
        self._window = (t0, self.eps.copy(), delta)
        self.eps = np.clip(self.eps + np.array([delta, -delta]),
                           self.spec.action["eps_lo"], self.spec.action["eps_hi"])

    def finish_action(self):
        sl = self.fish.sl
        mean_y = float(self.sim.s_pos[sl][:, 1].mean())
        reward = reward_fish(mean_y, self.centerline)
        oob = abs(mean_y - self.centerline) > 0.45 * self.spec.geometry["domain_height"]
        info = {"mean_y": mean_y, "eps_l": float(self.eps[0]),
                "eps_r": float(self.eps[1]), "t": self.sim.t}
        return reward, bool(oob), info

    def observe(self) -> dict[str, float]:
        from .kernels import fluid_kernel

        kernel = fluid_kernel(self.sim.dp)
        sl = self.fish.sl
        pos = self.sim.s_pos[sl]
        vel = np.column_stack([self.sim.f_vx, self.sim.f_vy])
        out = {}
        off = self.spec.probes["lateral_offset"] * self.sim.dp
        for n, pid in enumerate(self.probe_idx):
            sign = 1.0 if self.upper[pid] else -1.0
            point = pos[pid] + np.array([0.0, sign * off])
            v, p, _ = probe_field_point(self.sim.f_pos, vel, self.sim.f_p,
                                        self.sim.f_vol, point, kernel)
            out[f"pvx_{n}"] = float(v[0])
            out[f"pvy_{n}"] = float(v[1])
            out[f"pp_{n}"] = p
        out["fish_dy"] = float(pos[:, 1].mean() - self.centerline)
        out["fish_vy"] = float(self.sim.s_vy[sl].mean())
        out["eps_l"] = float(self.eps[0])
        out["eps_r"] = float(self.eps[1])
        return out

    def manifest(self):
        v_in = self.spec.excitation["inlet_velocity"]
        p_scale = 1000.0 * v_in**2
        rows = []
        for n in range(2 * self.spec.probes["per_side"]):
            rows.append((f"pvx_{n}", v_in, 10 * v_in))
            rows.append((f"pvy_{n}", 0.0, 10 * v_in))
            rows.append((f"pp_{n}", 0.0, p_scale))
        rows.append(("fish_dy", 0.0, self.spec.geometry["domain_height"] / 2))
        rows.append(("fish_vy", 0.0, v_in))
        rows.append(("eps_l", 0.0, self.spec.action["eps_hi"]))
        rows.append(("eps_r", 0.0, self.spec.action["eps_hi"]))
        return rows

    def extra_state(self):
        return {"ctrl_eps": self.eps}

    def load_extra_state(self, data):
        self.eps = np.array(data["ctrl_eps"], dtype=np.float64).copy()


# --------------------------------------------------------------------------
# builders

def build_scenario(spec: ScenarioSpec):
    """Instantiate (Simulation, ScenarioController) for a spec."""
    builder = {
        "slosh_rigid": _build_slosh_rigid,
        "slosh_elastic": _build_slosh_elastic,
        "owsc": _build_owsc,
        "fish": _build_fish,
    }[spec.variant]
    sim, controller = builder(spec)
    controller.attach(sim)
    return sim, controller


def _build_slosh_rigid(spec: ScenarioSpec):
    g = spec.geometry
    dp = spec.dp
    depth = g["water_depth"]
    mat = FluidMaterial(rho0=1000.0, v_max=sloshing_speed_scale(GRAVITY, depth),
                        dynamic_viscosity=spec.numerics["viscosity"])
    fluid_pos, rho_rel = hydrostatic_column(0.0, g["tank_length"], 0.0, depth, dp,
                                            GRAVITY, mat.sound_speed)
    bodies: list = [StaticBody("tank", tank_wall_positions(g["tank_length"], g["wall_height"], dp),
                               dp, mat.rho0)]
    keep = np.ones(len(fluid_pos), dtype=bool)
    if g["baffle_mode"] != "none":
        dps = min(dp, g["baffle_thickness"] / 2.0)
        y_top = depth - g["baffle_submergence"]
        y_bot = y_top - g["baffle_thickness"]
        for name, x0 in (("baffle_left", g["baffle_wall_gap"]),
                         ("baffle_right", g["tank_length"] - g["baffle_wall_gap"] - g["baffle_width"])):
            pos = block_positions(x0, y_bot, x0 + g["baffle_width"], y_top, dps)
            cls = ControlledBody if g["baffle_mode"] == "controlled" else StaticBody
            bodies.append(cls(name, pos, dps, mat.rho0))
            inside = ((fluid_pos[:, 0] > x0 - dp / 2) & (fluid_pos[:, 0] < x0 + g["baffle_width"] + dp / 2)
                      & (fluid_pos[:, 1] > y_bot - dp / 2) & (fluid_pos[:, 1] < y_top + dp / 2))
            keep &= ~inside
    exc = spec.excitation

    def tank_accel(t, amp=exc["amplitude"], omega=exc["omega"]):
        # tank frame: the horizontal excitation enters as an inertial force
        _, _, acc = prescribed_harmonic_motion(amp, omega, t)
        return np.array([-acc, 0.0])

    sim = Simulation(dp=dp, mat=mat, gravity=[0.0, -GRAVITY],
                     fluid_pos=fluid_pos[keep], bodies=bodies,
                     external_accel=tank_accel,
                     beta_floor=spec.numerics["beta_floor"],
                     relax_until=spec.numerics["relax_until"])
    sim.f_rho = mat.rho0 * rho_rel[keep]
    return sim, SloshRigidController(spec)


def _build_slosh_elastic(spec: ScenarioSpec):
    g = spec.geometry
    dp = spec.dp
    depth = g["water_depth"]
    mat = FluidMaterial(rho0=1000.0, v_max=sloshing_speed_scale(GRAVITY, depth),
                        dynamic_viscosity=spec.numerics["viscosity"])
    fluid_pos, rho_rel = hydrostatic_column(0.0, g["tank_length"], 0.0, depth, dp,
                                            GRAVITY, mat.sound_speed)
    dps = g["solid_dp"]
    half = g["baffle_thickness"] / 2.0
    baffle_pos = block_positions(g["baffle_x"] - half, 0.0, g["baffle_x"] + half,
                                 g["baffle_height"], dps)
    lam, mu = lame_parameters(g["youngs_modulus"], g["poisson_ratio"])
    fixed = baffle_pos[:, 1] < g["clamp_depth"]
    exc = spec.excitation

    def tank_accel(t, amp=exc["amplitude"], omega=exc["omega"]):
        _, _, acc = prescribed_harmonic_motion(amp, omega, t)
        return np.array([-acc, 0.0])

    baffle = ElasticBody("baffle", baffle_pos, dps, lam, mu, g["baffle_density"],
                         fixed=fixed, fiber_axis=1)
    bodies = [StaticBody("tank", tank_wall_positions(g["tank_length"], g["wall_height"], dp),
                         dp, mat.rho0), baffle]
    inside = ((fluid_pos[:, 0] > g["baffle_x"] - half - dp / 2)
              & (fluid_pos[:, 0] < g["baffle_x"] + half + dp / 2)
              & (fluid_pos[:, 1] < g["baffle_height"] + dp / 2))
    sim = Simulation(dp=dp, mat=mat, gravity=[0.0, -GRAVITY],
                     fluid_pos=fluid_pos[~inside], bodies=bodies,
                     external_accel=tank_accel,
                     beta_floor=spec.numerics["beta_floor"],
                     relax_until=spec.numerics["relax_until"])
    sim.f_rho = mat.rho0 * rho_rel[~inside]
    return sim, SloshElasticController(spec)


def _build_owsc(spec: ScenarioSpec):
    g = spec.geometry
    dp = spec.dp
    depth = g["water_depth"]
    mat = FluidMaterial(rho0=1000.0, v_max=sloshing_speed_scale(GRAVITY, depth),
                        dynamic_viscosity=spec.numerics["viscosity"])
    wave = WaveMakerSpec(wave_height=spec.excitation["wave_height"],
                         frequency=spec.excitation["frequency"], water_depth=depth)
    length = g["flume_length"]
    fluid_pos, rho_rel = hydrostatic_column(0.0, length, 0.0, depth, dp,
                                            GRAVITY, mat.sound_speed)
    layers = 4
    t_wall = layers * dp
    bottom = lattice_positions(-t_wall, -t_wall, length + t_wall, 0.0, dp)
    right = lattice_positions(length, 0.0, length + t_wall, g["wall_height"], dp)
    bodies: list = [StaticBody("flume", np.vstack([bottom, right]), dp, mat.rho0)]

    # piston wavemaker: face starts flush with the fluid at x = 0
    piston_layout = lattice_positions(-t_wall, 0.0, 0.0, g["wall_height"], dp)
    s0 = wave.s0

    def piston_motion(t):
        d = s0 + wavemaker_displacement(wave, t)
        v = wavemaker_velocity(wave, t)
        a = wavemaker_acceleration(wave, t)
        return np.array([d, 0.0]), np.array([v, 0.0]), np.array([a, 0.0])

    bodies.append(PrescribedBody("wavemaker", piston_layout, dp, mat.rho0, piston_motion))

    keep = np.ones(len(fluid_pos), dtype=bool)
    if g["flap_x"] > 0:
        dps = g["solid_dp"]
        bw = g["base_width"]
        base = block_positions(g["flap_x"] - bw / 2, 0.0, g["flap_x"] + bw / 2,
                               g["base_height"], dps)
        bodies.append(StaticBody("base", base, dps, mat.rho0))
        fw = g["flap_width"]
        flap_bottom = g["base_height"]
        flap = block_positions(g["flap_x"] - fw / 2, flap_bottom,
                               g["flap_x"] + fw / 2, flap_bottom + g["flap_height"], dps)
        pivot = np.array([g["flap_x"], g["base_height"] + g["hinge_above_base"]])
        bodies.append(HingedBody("flap", flap, dps, g["flap_density"], pivot,
                                 k_d=spec.action["kd_init"]))
        solid_x0 = g["flap_x"] - bw / 2 - dp / 2
        solid_x1 = g["flap_x"] + bw / 2 + dp / 2
        inside_base = ((fluid_pos[:, 0] > solid_x0) & (fluid_pos[:, 0] < solid_x1)
                       & (fluid_pos[:, 1] < g["base_height"] + dp / 2))
        inside_flap = ((fluid_pos[:, 0] > g["flap_x"] - fw / 2 - dp / 2)
                       & (fluid_pos[:, 0] < g["flap_x"] + fw / 2 + dp / 2)
                       & (fluid_pos[:, 1] < flap_bottom + g["flap_height"] + dp / 2))
        keep &= ~(inside_base | inside_flap)

    sim = Simulation(dp=dp, mat=mat, gravity=[0.0, -GRAVITY],
                     fluid_pos=fluid_pos[keep], bodies=bodies,
                     damping_zone=(g["damping_zone_start"], length),
                     beta_floor=spec.numerics["beta_floor"],
                     relax_until=spec.numerics["relax_until"])
    sim.f_rho = mat.rho0 * rho_rel[keep]
    return sim, OwscController(spec)


def _build_fish(spec: ScenarioSpec):
    g = spec.geometry
    dp = spec.dp
    exc = spec.excitation
    v_in = exc["inlet_velocity"]
    mat = FluidMaterial(rho0=1000.0, v_max=10.0 * v_in,
                        dynamic_viscosity=spec.numerics["viscosity"])
    length, height = g["domain_length"], g["domain_height"]
    fluid_pos = lattice_positions(0.0, 0.0, length, height, dp)
    centerline = height / 2.0
    dps = g["solid_dp"]

    airfoil = naca0012_positions(g["airfoil_nose_x"], centerline, g["chord"], dps)

    def plunge(t, s1=exc["plunge_amplitude"], f1=exc["plunge_frequency"]):
        d, v, a = prescribed_harmonic_motion(s1, 2.0 * math.pi * f1, t)
        return np.array([0.0, d]), np.array([0.0, v]), np.array([0.0, a])

    bodies: list = [PrescribedBody("airfoil", airfoil, dps, mat.rho0, plunge)]

    fish_nose = g["airfoil_nose_x"] + g["chord"] + g["gap"]
    fish_pos = naca0012_positions(fish_nose, centerline, g["chord"], dps)
    xc = (fish_pos[:, 0] - fish_nose) / g["chord"]
    half = naca0012_half_thickness(xc, g["chord"])
    lateral = np.abs(fish_pos[:, 1] - centerline)
    tags = np.full(len(fish_pos), TAG_WHITE_MUSCLE, dtype=np.int64)
    tags[lateral <= 0.2 * np.maximum(half, dps)] = TAG_BONE
    tags[(lateral >= 0.55 * half) & (xc >= 0.3)] = TAG_RED_MUSCLE
    nu_s = g["tissue_poisson"]
    moduli = {TAG_BONE: g["bone_modulus"], TAG_WHITE_MUSCLE: g["white_modulus"],
              TAG_RED_MUSCLE: g["red_modulus"]}
    lam = np.empty(len(fish_pos))
    mu = np.empty(len(fish_pos))
    for tag, modulus in moduli.items():
        l, m = lame_parameters(modulus, nu_s)
        lam[tags == tag] = l
        mu[tags == tag] = m
    fish = ElasticBody("fish", fish_pos, dps, lam, mu, g["tissue_density"],
                       fiber_axis=0)
    fish.tag = tags
    fish.tag_red = tags == TAG_RED_MUSCLE
    bodies.append(fish)

    # carve the two profiles out of the fluid lattice (analytic shape test)
    keep = np.ones(len(fluid_pos), dtype=bool)
    for nose in (g["airfoil_nose_x"], fish_nose):
        xc_f = (fluid_pos[:, 0] - nose) / g["chord"]
        near = (xc_f > -0.05) & (xc_f < 1.05)
        margin = naca0012_half_thickness(np.clip(xc_f[near], 0.0, 1.0), g["chord"]) + 0.45 * dp
        inside = np.abs(fluid_pos[near, 1] - centerline) <= margin
        sub = keep[near]
        sub[inside] = False
        keep[near] = sub

    sim = Simulation(dp=dp, mat=mat, gravity=[0.0, 0.0],
                     fluid_pos=fluid_pos[keep], bodies=bodies,
                     transport_p0=spec.numerics["background_pressure_factor"]
                     * mat.rho0 * mat.v_max**2,
                     free_stream=FreeStreamSpec(v_in=v_in, x0=0.0, x1=length,
                                                y0=0.0, y1=height),
                     beta_floor=spec.numerics["beta_floor"],
                     relax_until=spec.numerics["relax_until"])
    return sim, FishController(spec)
