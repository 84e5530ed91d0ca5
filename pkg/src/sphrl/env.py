"""Trainable environment wrapping one scenario: reset/step semantics,
observation assembly with a recorded normalization manifest, restart
snapshots and bit-exact state persistence."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fluid import SolverBlowUp
from .scenarios import ScenarioSpec, build_scenario
from .snapshot import SnapshotError, load_snapshot, pack_json, save_snapshot, unpack_json

BLOWUP_REWARD = -10.0


def default_cache_dir() -> Path:
    return Path(os.environ.get("SPHRL_CACHE", "~/.cache/sphrl")).expanduser()


def rescale_action(raw, bound) -> np.ndarray:
    """Affine map from the agent's [-1, 1] range to [-bound, bound];
    non-finite or out-of-range input is clamped first."""
    raw = np.nan_to_num(np.asarray(raw, dtype=np.float64), nan=0.0)
    return np.clip(raw, -1.0, 1.0) * np.asarray(bound, dtype=np.float64)


@dataclass
class StepOutcome:
    observation: np.ndarray
    reward: float
    terminated: bool
    truncated: bool
    info: dict = field(default_factory=dict)


class Environment:
    """One scenario instance behind the reset/step contract.

    Strictly single-threaded; run several instances for parallel
    collection. All state needed to reproduce a trajectory bit-exactly is
    carried by the snapshot payload.
    """

    def __init__(self, spec: ScenarioSpec, seed: int = 0,
                 cache_dir: Path | str | None = None):
        self.spec = spec
        self.seed = seed
        self.cache_dir = Path(cache_dir) if cache_dir is not None else default_cache_dir()
        self.rng = np.random.default_rng(seed)
        self.sim, self.controller = build_scenario(spec)
        self.action_dim = self.controller.action_dim
        self._manifest = self.controller.manifest()
        self.step_count = 0
        self.episode_over = False
        self.baseline_powers: np.ndarray | None = None

    # ------------------------------------------------------------- protocol

    @property
    def observation_dim(self) -> int:
        return len(self._manifest)

    def manifest(self) -> list[tuple[str, float, float]]:
        return list(self._manifest)

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self.seed = seed
        self.rng = np.random.default_rng(self.seed)
        self.sim, self.controller = build_scenario(self.spec)
        self.step_count = 0
        self.episode_over = False
        if self.spec.restart_time > 0.0:
            self._load_or_create_restart()
        if self.spec.variant == "owsc":
            self._ensure_baseline()
        return self.observation_vector()

    def step(self, raw_action) -> StepOutcome:
        if self.episode_over:
            raise RuntimeError("episode is over; call reset() first")
        action = rescale_action(raw_action, self.spec.action["bound"])
        if action.ndim == 0:
            action = action.reshape(1)
        controller = self.controller
        if self.spec.variant == "owsc" and self.baseline_powers is not None:
            idx = min(self.step_count, len(self.baseline_powers) - 1)
            controller.baseline_power = float(self.baseline_powers[idx])
        t0 = self.sim.t
        controller.begin_action(t0, action)
        dt_action = self.spec.action["dt"]
        n_slices = controller.slices_per_action
        try:
            for k in range(n_slices):
                self.sim.advance_to(t0 + (k + 1) * dt_action / n_slices)
                controller.slice_hook(k)
        except SolverBlowUp as err:
            self.episode_over = True
            obs = np.zeros(self.observation_dim)
            return StepOutcome(obs, BLOWUP_REWARD, True, False,
                               {"blow_up": str(err), "t": self.sim.t})
        reward, terminated, info = controller.finish_action()
        self.step_count += 1
        truncated = False
        if not terminated and self.step_count >= self.spec.action["per_episode"]:
            truncated = True
        self.episode_over = terminated or truncated
        return StepOutcome(self.observation_vector(), float(reward), bool(terminated),
                           bool(truncated), info)

    def observation_vector(self) -> np.ndarray:
        values = self.controller.observe()
        out = np.empty(len(self._manifest))
        for k, (name, offset, scale) in enumerate(self._manifest):
            out[k] = (values[name] - offset) / scale
        return out

    def close(self) -> None:
        pass

    # ------------------------------------------------------------ snapshots

    def _state_payload(self) -> dict[str, np.ndarray]:
        data = self.sim.state_arrays()
        data.update(self.controller.extra_state())
        data["env_step_count"] = np.array([self.step_count], dtype=np.int64)
        data["env_episode_over"] = np.array([int(self.episode_over)], dtype=np.int64)
        name, payload = pack_json("env_rng", self.rng.bit_generator.state)
        data[name] = payload
        name, payload = pack_json("env_spec_hash", self.spec.config_hash())
        data[name] = payload
        return data

    def save_snapshot(self, path) -> None:
        save_snapshot(path, self._state_payload())

    def load_snapshot(self, path) -> np.ndarray:
        data = load_snapshot(path)
        stored_hash = unpack_json(data, "env_spec_hash")
        if stored_hash != self.spec.config_hash():
            raise SnapshotError(
                f"snapshot belongs to configuration {stored_hash}, "
                f"environment runs {self.spec.config_hash()}")
        self._restore(data)
        return self.observation_vector()

    def _restore(self, data: dict[str, np.ndarray]) -> None:
        flat = {}
        for key, arr in data.items():
            if key in ("f_pos", "s_pos") and arr.ndim == 1:
                flat[key] = arr.reshape(-1, 2)
            elif key.endswith("_disp") and arr.ndim == 1 and arr.size == 2:
                flat[key] = arr
            else:
                flat[key] = arr
        self.sim.load_state_arrays(flat)
        self.controller.load_extra_state(flat)
        self.step_count = int(flat["env_step_count"][0])
        self.episode_over = bool(flat["env_episode_over"][0])
        self.rng = np.random.default_rng()
        self.rng.bit_generator.state = unpack_json(data, "env_rng")

    # -------------------------------------------------------------- restart

    def _restart_path(self) -> Path:
        return self.cache_dir / f"restart_{self.spec.variant}_{self.spec.config_hash()}.snap"

    def _baseline_path(self) -> Path:
        return self.cache_dir / f"baseline_{self.spec.variant}_{self.spec.config_hash()}.snap"

    def _load_or_create_restart(self) -> None:
        path = self._restart_path()
        if path.exists():
            try:
                data = load_snapshot(path)
                self._restore(data)
                self.step_count = 0
                self.episode_over = False
                return
            except SnapshotError:
                path.unlink()  # stale or corrupt: regenerate
        self.sim.advance_to(self.spec.restart_time)
        self.step_count = 0
        self.episode_over = False
        path.parent.mkdir(parents=True, exist_ok=True)
        save_snapshot(path, self._state_payload())

    def _ensure_baseline(self) -> None:
        """Fixed-damping reference capture series for the converter reward,
        generated once per configuration and cached."""
        path = self._baseline_path()
        if path.exists():
            data = load_snapshot(path)
            self.baseline_powers = np.asarray(data["powers"], dtype=np.float64)
            return
        twin_spec = self.spec
        twin = Environment(twin_spec, seed=self.seed, cache_dir=self.cache_dir)
        twin.baseline_powers = np.zeros(twin_spec.action["per_episode"])  # placeholder
        twin.rng = np.random.default_rng(self.seed)
        twin.sim, twin.controller = build_scenario(twin_spec)
        twin.step_count = 0
        twin.episode_over = False
        if twin_spec.restart_time > 0.0:
            twin._load_or_create_restart()
        powers = []
        zero = np.zeros(max(twin.action_dim, 1))
        for _ in range(twin_spec.action["per_episode"]):
            outcome = twin.step(zero)
            powers.append(outcome.info.get("p_out", 0.0))
            if outcome.terminated:
                break
        self.baseline_powers = np.array(powers)
        path.parent.mkdir(parents=True, exist_ok=True)
        save_snapshot(path, {"powers": self.baseline_powers})


class VectorEnv:
    """K independent environment instances stepped in lockstep.

    Finished episodes reset automatically; per-instance seeds advance
    deterministically so restarted episodes stay reproducible.
    """

    def __init__(self, factory, n_envs: int, base_seed: int = 0):
        self.envs = [factory(base_seed + k) for k in range(n_envs)]
        self.episode_seeds = [base_seed + k for k in range(n_envs)]
        self.n_envs = n_envs

    def reset(self) -> np.ndarray:
        return np.stack([env.reset(seed) for env, seed in zip(self.envs, self.episode_seeds)])

    def step(self, actions):
        obs, rewards, terminated, truncated, infos = [], [], [], [], []
        for k, env in enumerate(self.envs):
            outcome = env.step(actions[k])
            rewards.append(outcome.reward)
            terminated.append(outcome.terminated)
            truncated.append(outcome.truncated)
            info = dict(outcome.info)
            if outcome.terminated or outcome.truncated:
                info["final_obs"] = outcome.observation
                self.episode_seeds[k] += self.n_envs
                obs.append(env.reset(self.episode_seeds[k]))
            else:
                obs.append(outcome.observation)
            infos.append(info)
        return (np.stack(obs), np.array(rewards), np.array(terminated),
                np.array(truncated), infos)

    def close(self) -> None:
        for env in self.envs:
            env.close()
