"""Training orchestration: vectorized collection, the epoch loop, learning
curves and checkpoints."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .env import VectorEnv
from .ppo import PpoAgent
from .replay import ReplayBuffer
from .sac import SacAgent
from .snapshot import load_snapshot, pack_json, save_snapshot, unpack_json


@dataclass
class TrainConfig:
    algorithm: str = "sac"  # ppo | sac
    hidden: list[int] = field(default_factory=lambda: [512, 512])
    lr: float | None = None  # default per algorithm
    steps_per_epoch: int = 2048
    epochs: int = 50
    batch_size: int = 256
    gamma: float = 0.99
    tau: float = 0.005  # soft-update weight on the online network
    clip_sigma: float = 0.2
    entropy_coef: float = 0.2
    replay_capacity: int = 100_000
    warmup_steps: int = 1000
    update_every: int = 1  # SAC gradient updates cadence (per env step)
    ppo_update_epochs: int = 10
    eval_episodes: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ("ppo", "sac"):
            raise ValueError(f"algorithm must be 'ppo' or 'sac', got {self.algorithm!r}")
        if self.lr is None:
            self.lr = 3e-4 if self.algorithm == "ppo" else 1e-3
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")


@dataclass
class EpisodeRecord:
    episode: int
    env_id: int
    total_reward: float
    length: int
    epoch: int


def make_agent(config: TrainConfig, obs_dim: int, act_dim: int):
    rng = np.random.default_rng(config.seed)
    if config.algorithm == "ppo":
        return PpoAgent(obs_dim, act_dim, config.hidden, config.lr, config.gamma,
                        config.clip_sigma, rng, update_epochs=config.ppo_update_epochs,
                        minibatch=config.batch_size)
    return SacAgent(obs_dim, act_dim, config.hidden, config.lr, config.gamma,
                    config.tau, config.entropy_coef, rng)


class Trainer:
    """Epoch loop shared by both algorithms over a vector of environments."""

    def __init__(self, config: TrainConfig, env_factory, n_envs: int,
                 out_dir: Path | str | None = None, log=print):
        self.config = config
        self.vec = VectorEnv(env_factory, n_envs, base_seed=config.seed)
        probe = self.vec.envs[0]
        self.obs_dim = probe.observation_dim
        self.act_dim = max(probe.action_dim, 1)
        self.agent = make_agent(config, self.obs_dim, self.act_dim)
        self.out_dir = Path(out_dir) if out_dir is not None else None
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        self.log = log
        self.records: list[EpisodeRecord] = []
        self.episode_counter = 0
        self._ep_reward = np.zeros(n_envs)
        self._ep_length = np.zeros(n_envs, dtype=int)
        self.total_steps = 0
        self.failures = 0

    # ----------------------------------------------------------- collection

    def _finish_episodes(self, rewards, terminated, truncated, infos, epoch):
        for k in range(self.vec.n_envs):
            self._ep_reward[k] += rewards[k]
            self._ep_length[k] += 1
            if terminated[k] or truncated[k]:
                if "blow_up" in infos[k]:
                    self.failures += 1
                self.records.append(EpisodeRecord(
                    episode=self.episode_counter, env_id=k,
                    total_reward=float(self._ep_reward[k]),
                    length=int(self._ep_length[k]), epoch=epoch))
                self.episode_counter += 1
                self._ep_reward[k] = 0.0
                self._ep_length[k] = 0

    def train(self):
        cfg = self.config
        if cfg.algorithm == "sac":
            self._train_sac()
        else:
            self._train_ppo()
        if self.out_dir is not None:
            self.write_curve(self.out_dir / "learning_curve.csv")
        return self.records

    def _train_sac(self):
        cfg = self.config
        agent: SacAgent = self.agent
        buffer = ReplayBuffer(cfg.replay_capacity, self.obs_dim, self.act_dim)
        obs = self.vec.reset()
        started = time.time()
        for epoch in range(cfg.epochs):
            steps_this_epoch = 0
            while steps_this_epoch < cfg.steps_per_epoch:
                if self.total_steps < cfg.warmup_steps:
                    actions = agent.rng.uniform(-1, 1, size=(self.vec.n_envs, self.act_dim))
                else:
                    actions = agent.act(obs)
                next_obs, rewards, terminated, truncated, infos = self.vec.step(actions)
                for k in range(self.vec.n_envs):
                    # auto-reset replaced the observation; bootstrap uses the
                    # pre-reset one when available
                    s_next = infos[k].get("final_obs", next_obs[k])
                    buffer.add(obs[k], actions[k], rewards[k], s_next, terminated[k])
                self._finish_episodes(rewards, terminated, truncated, infos, epoch)
                obs = next_obs
                self.total_steps += self.vec.n_envs
                steps_this_epoch += self.vec.n_envs
                if (len(buffer) >= max(cfg.warmup_steps, cfg.batch_size)
                        and self.total_steps % cfg.update_every == 0):
                    for _ in range(self.vec.n_envs):
                        agent.update(buffer.sample(cfg.batch_size, agent.rng))
            self._end_epoch(epoch, started)

    def _train_ppo(self):
        cfg = self.config
        agent: PpoAgent = self.agent
        obs = self.vec.reset()
        started = time.time()
        for epoch in range(cfg.epochs):
            batch = {k: [] for k in ("obs", "u", "logp", "rew", "next_obs", "term")}
            steps = 0
            while steps < cfg.steps_per_epoch:
                actions, logp, u = agent.act(obs)
                next_obs, rewards, terminated, truncated, infos = self.vec.step(actions)
                for k in range(self.vec.n_envs):
                    s_next = infos[k].get("final_obs", next_obs[k])
                    batch["obs"].append(obs[k])
                    batch["u"].append(u[k])
                    batch["logp"].append(logp[k])
                    batch["rew"].append(rewards[k])
                    batch["next_obs"].append(s_next)
                    batch["term"].append(terminated[k])
                self._finish_episodes(rewards, terminated, truncated, infos, epoch)
                obs = next_obs
                steps += self.vec.n_envs
                self.total_steps += self.vec.n_envs
            agent.update(np.array(batch["obs"]), np.array(batch["u"]),
                         np.array(batch["logp"]), np.array(batch["rew"]),
                         np.array(batch["next_obs"]), np.array(batch["term"], dtype=bool))
            self._end_epoch(epoch, started)

    def _end_epoch(self, epoch: int, started: float):
        recent = [r.total_reward for r in self.records if r.epoch == epoch]
        mean = float(np.mean(recent)) if recent else float("nan")
        self.log(f"epoch {epoch + 1}/{self.config.epochs}: steps={self.total_steps} "
                 f"episodes={self.episode_counter} mean_ep_reward={mean:.3f} "
                 f"elapsed={time.time() - started:.0f}s")
        if self.out_dir is not None:
            self.save_checkpoint(self.out_dir / f"checkpoint_epoch{epoch + 1:03d}.ckpt")
            self.write_curve(self.out_dir / "learning_curve.csv")
            if self.config.eval_episodes > 0:
                self._evaluate(epoch)

    def _evaluate(self, epoch: int):
        env = self.vec.envs[0]
        totals = []
        for _ in range(self.config.eval_episodes):
            obs = env.reset()
            total = 0.0
            while True:
                action = self.agent.act(obs[None, :], deterministic=True)
                if isinstance(action, tuple):
                    action = action[0]
                outcome = env.step(action[0])
                total += outcome.reward
                obs = outcome.observation
                if outcome.terminated or outcome.truncated:
                    break
            totals.append(total)
        env.reset()
        self.log(f"  eval (deterministic policy): mean={np.mean(totals):.3f}")
        if self.out_dir is not None:
            with open(self.out_dir / "eval_log.csv", "a") as fh:
                fh.write(f"{epoch + 1},{np.mean(totals)!r}\n")

    # ------------------------------------------------------------------- io

    def write_curve(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["episode", "env_id", "total_reward", "length"])
            for r in self.records:
                writer.writerow([r.episode, r.env_id, repr(r.total_reward), r.length])

    def save_checkpoint(self, path) -> None:
        data = self.agent.state_arrays()
        name, payload = pack_json("train_config", asdict(self.config))
        data[name] = payload
        data["total_steps"] = np.array([self.total_steps], dtype=np.int64)
        save_snapshot(path, data)

    def load_checkpoint(self, path) -> None:
        data = load_snapshot(path)
        self.agent.load_state(data)
        self.total_steps = int(data["total_steps"][0])


def load_agent_checkpoint(path):
    """Rebuild a policy-bearing agent from a checkpoint for evaluation."""
    data = load_snapshot(path)
    cfg_doc = unpack_json(data, "train_config")
    config = TrainConfig(**cfg_doc)
    sizes = [int(v) for v in data["policy_sizes"]]
    obs_dim = sizes[0]
    act_dim = sizes[-1] // 2
    agent = make_agent(config, obs_dim, act_dim)
    agent.load_state(data)
    return agent, config
