"""Squashed-Gaussian policy head over a dense trunk.

Actions live in (-1, 1)^A via tanh; log-probabilities carry the squash
correction, written in the softplus form that stays finite for saturated
actions.
"""

from __future__ import annotations

import numpy as np

from .nets import DenseNetwork

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
LOG_2PI = float(np.log(2.0 * np.pi))
LOG_2 = float(np.log(2.0))


def softplus(x):
    return np.logaddexp(0.0, x)


def squash_correction(u):
    """log(1 - tanh(u)^2) per component in a form that stays finite for
    saturated u; subtracted from the Gaussian log-density."""
    return 2.0 * (LOG_2 - u - softplus(-2.0 * u))


class GaussianPolicy:
    """Trunk network with mean and clamped log-std heads (one output layer
    of width 2A, split)."""

    def __init__(self, obs_dim: int, act_dim: int, hidden: list[int],
                 rng: np.random.Generator):
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.net = DenseNetwork([obs_dim, *hidden, 2 * act_dim], rng)

    def parameters(self) -> list[np.ndarray]:
        return self.net.parameters()

    def heads(self, obs: np.ndarray):
        """Returns (mean, log_std, cache, clip_mask)."""
        out, cache = self.net.forward(obs)
        mean = out[:, : self.act_dim]
        log_std_raw = out[:, self.act_dim:]
        log_std = np.clip(log_std_raw, LOG_STD_MIN, LOG_STD_MAX)
        active = (log_std_raw > LOG_STD_MIN) & (log_std_raw < LOG_STD_MAX)
        return mean, log_std, cache, active

    def sample(self, obs: np.ndarray, rng: np.random.Generator):
        """Stochastic squashed action. Returns (action, log_prob, pre_squash)."""
        mean, log_std, _, _ = self.heads(obs)
        std = np.exp(log_std)
        u = mean + std * rng.standard_normal(mean.shape)
        action = np.tanh(u)
        logp = self.log_prob_given_u(mean, log_std, u)
        return action, logp, u

    def deterministic(self, obs: np.ndarray) -> np.ndarray:
        mean, _, _, _ = self.heads(obs)
        return np.tanh(mean)

    @staticmethod
    def log_prob_given_u(mean, log_std, u):
        """Joint log-density of the squashed action with pre-squash value u."""
        std = np.exp(log_std)
        z = (u - mean) / std
        gauss = -0.5 * (z * z) - log_std - 0.5 * LOG_2PI
        # change of variables through a = tanh(u)
        return (gauss - squash_correction(u)).sum(axis=1)

    def log_prob_grads(self, mean, log_std, u, active):
        """d log pi / d mean and d log pi / d log_std for FIXED u (the
        likelihood-ratio path used by the on-policy update)."""
        std = np.exp(log_std)
        z = (u - mean) / std
        d_mean = z / std
        d_log_std = (z * z - 1.0) * active
        return d_mean, d_log_std
