"""Uniform-sampling ring replay buffer."""

from __future__ import annotations

import numpy as np


class ReplayBuffer:
    """Fixed-capacity FIFO storage of transitions with uniform sampling
    over the filled region."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.act = np.zeros((capacity, act_dim))
        self.rew = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.terminated = np.zeros(capacity, dtype=bool)
        self.cursor = 0
        self.size = 0

    def add(self, obs, act, rew, next_obs, terminated) -> None:
        k = self.cursor
        self.obs[k] = obs
        self.act[k] = act
        self.rew[k] = rew
        self.next_obs[k] = next_obs
        self.terminated[k] = terminated
        self.cursor = (k + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        idx = rng.integers(0, self.size, size=batch_size)
        return (self.obs[idx], self.act[idx], self.rew[idx],
                self.next_obs[idx], self.terminated[idx])

    def __len__(self) -> int:
        return self.size
