"""Proximal policy optimization with the clipped surrogate objective and a
one-step temporal-difference advantage."""

from __future__ import annotations

import numpy as np

from .nets import Adam, DenseNetwork
from .policy import GaussianPolicy


def td_advantage(rew, gamma, v_next, v_now, terminated):
    """A = r + gamma V(s') - V(s); terminal states do not bootstrap."""
    rew = np.asarray(rew, dtype=np.float64)
    boot = np.asarray(v_next, dtype=np.float64) * (~np.asarray(terminated, dtype=bool))
    return rew + gamma * boot - np.asarray(v_now, dtype=np.float64)


def ppo_objective_terms(ratio, adv, clip_sigma):
    """Per-sample clipped surrogate values and the gradient pass-through
    mask (true where the unclipped branch drives the gradient)."""
    ratio = np.asarray(ratio, dtype=np.float64)
    adv = np.asarray(adv, dtype=np.float64)
    clipped = np.clip(ratio, 1.0 - clip_sigma, 1.0 + clip_sigma)
    surr1 = ratio * adv
    surr2 = clipped * adv
    terms = np.minimum(surr1, surr2)
    passthrough = surr1 <= surr2
    return terms, passthrough


class PpoAgent:
    def __init__(self, obs_dim: int, act_dim: int, hidden: list[int], lr: float,
                 gamma: float, clip_sigma: float, rng: np.random.Generator,
                 update_epochs: int = 10, minibatch: int = 256):
        self.policy = GaussianPolicy(obs_dim, act_dim, hidden, rng)
        self.critic = DenseNetwork([obs_dim, *hidden, 1], rng)
        self.opt_policy = Adam(self.policy.parameters(), lr)
        self.opt_critic = Adam(self.critic.parameters(), lr)
        self.gamma = gamma
        self.clip_sigma = clip_sigma
        self.update_epochs = update_epochs
        self.minibatch = minibatch
        self.rng = rng

    def act(self, obs, deterministic=False):
        if deterministic:
            a = self.policy.deterministic(obs)
            return a, np.zeros(a.shape[0]), np.arctanh(np.clip(a, -1 + 1e-12, 1 - 1e-12))
        return self.policy.sample(obs, self.rng)

    def value(self, obs) -> np.ndarray:
        v, _ = self.critic.forward(obs)
        return v.ravel()

    def update(self, obs, u, logp_old, rew, next_obs, terminated):
        """One full optimization phase over a collected on-policy batch."""
        obs = np.asarray(obs, dtype=np.float64)
        n = obs.shape[0]
        adv = td_advantage(rew, self.gamma, self.value(next_obs), self.value(obs), terminated)
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
        stats = {"policy_objective": 0.0, "critic_loss": 0.0}
        for _ in range(self.update_epochs):
            order = self.rng.permutation(n)
            for lo in range(0, n, self.minibatch):
                idx = order[lo: lo + self.minibatch]
                stats = self._minibatch_step(obs[idx], u[idx], logp_old[idx],
                                             rew[idx], next_obs[idx],
                                             terminated[idx], adv[idx])
        return stats

    def _minibatch_step(self, obs, u, logp_old, rew, next_obs, terminated, adv):
        b = obs.shape[0]
        mean, log_std, cache, active = self.policy.heads(obs)
        logp = self.policy.log_prob_given_u(mean, log_std, u)
        ratio = np.exp(logp - logp_old)
        terms, passthrough = ppo_objective_terms(ratio, adv, self.clip_sigma)
        coef = np.where(passthrough, adv * ratio, 0.0) / b
        d_mean, d_log_std = self.policy.log_prob_grads(mean, log_std, u, active)
        out_grad = np.concatenate([d_mean * coef[:, None], d_log_std * coef[:, None]], axis=1)
        grads, _ = self.policy.net.backward(cache, -out_grad)  # ascent
        self.opt_policy.update(self.policy.parameters(), grads)

        target = rew + self.gamma * self.value(next_obs) * (~terminated)
        v, vcache = self.critic.forward(obs)
        err = v.ravel() - target
        grads, _ = self.critic.backward(vcache, (2.0 * err / b)[:, None])
        self.opt_critic.update(self.critic.parameters(), grads)
        return {"policy_objective": float(terms.mean()),
                "critic_loss": float(np.mean(err**2))}

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = self.policy.net.state_arrays("policy")
        out.update(self.critic.state_arrays("critic"))
        return out

    def load_state(self, data: dict[str, np.ndarray]) -> None:
        self.policy.net = DenseNetwork.from_state(data, "policy")
        self.critic = DenseNetwork.from_state(data, "critic")
        self.opt_policy = Adam(self.policy.parameters(), self.opt_policy.lr)
        self.opt_critic = Adam(self.critic.parameters(), self.opt_critic.lr)
