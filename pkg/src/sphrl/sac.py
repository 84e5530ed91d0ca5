"""Soft actor-critic with twin Q critics, target networks and a fixed
entropy coefficient."""

from __future__ import annotations

import numpy as np

from .nets import Adam, DenseNetwork
from .policy import GaussianPolicy


def soft_update(target_params: list[np.ndarray], online_params: list[np.ndarray],
                tau: float) -> None:
    """target <- (1 - tau) target + tau online."""
    for t, o in zip(target_params, online_params):
        t *= 1.0 - tau
        t += tau * o


def sac_target(rew, gamma, q_next_min, logp_next, chi, terminated):
    """y = r + gamma (min Q' - chi log pi'); no bootstrap past termination."""
    rew = np.asarray(rew, dtype=np.float64)
    cont = ~np.asarray(terminated, dtype=bool)
    return rew + gamma * cont * (np.asarray(q_next_min) - chi * np.asarray(logp_next))


class SacAgent:
    def __init__(self, obs_dim: int, act_dim: int, hidden: list[int], lr: float,
                 gamma: float, tau: float, chi: float, rng: np.random.Generator):
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.policy = GaussianPolicy(obs_dim, act_dim, hidden, rng)
        self.q1 = DenseNetwork([obs_dim + act_dim, *hidden, 1], rng)
        self.q2 = DenseNetwork([obs_dim + act_dim, *hidden, 1], rng)
        self.q1_target = DenseNetwork([obs_dim + act_dim, *hidden, 1], rng)
        self.q2_target = DenseNetwork([obs_dim + act_dim, *hidden, 1], rng)
        self.q1_target.copy_from(self.q1)
        self.q2_target.copy_from(self.q2)
        self.opt_policy = Adam(self.policy.parameters(), lr)
        self.opt_q1 = Adam(self.q1.parameters(), lr)
        self.opt_q2 = Adam(self.q2.parameters(), lr)
        self.gamma = gamma
        self.tau = tau
        self.chi = chi
        self.rng = rng

    def act(self, obs, deterministic=False):
        if deterministic:
            return self.policy.deterministic(obs)
        action, _, _ = self.policy.sample(obs, self.rng)
        return action

    def q_values(self, net, obs, act):
        q, _ = net.forward(np.concatenate([obs, act], axis=1))
        return q.ravel()

    def update(self, batch):
        obs, act, rew, next_obs, terminated = batch
        b = obs.shape[0]

        # critic regression toward the entropy-regularized target
        next_a, next_logp, _ = self.policy.sample(next_obs, self.rng)
        q_next = np.minimum(self.q_values(self.q1_target, next_obs, next_a),
                            self.q_values(self.q2_target, next_obs, next_a))
        y = sac_target(rew, self.gamma, q_next, next_logp, self.chi, terminated)
        critic_loss = 0.0
        for net, opt in ((self.q1, self.opt_q1), (self.q2, self.opt_q2)):
            q, cache = net.forward(np.concatenate([obs, act], axis=1))
            err = q.ravel() - y
            grads, _ = net.backward(cache, (2.0 * err / b)[:, None])
            opt.update(net.parameters(), grads)
            critic_loss += float(np.mean(err**2))

        # reparameterized policy ascent on min Q - chi log pi
        mean, log_std, cache, active = self.policy.heads(obs)
        std = np.exp(log_std)
        eps = self.rng.standard_normal(mean.shape)
        u = mean + std * eps
        a_new = np.tanh(u)
        sa = np.concatenate([obs, a_new], axis=1)
        q1v, c1 = self.q1.forward(sa)
        q2v, c2 = self.q2.forward(sa)
        pick1 = (q1v.ravel() <= q2v.ravel())[:, None]
        _, gin1 = self.q1.backward(c1, pick1 / b)
        _, gin2 = self.q2.backward(c2, (~pick1) / b)
        dq_da = gin1[:, self.obs_dim:] + gin2[:, self.obs_dim:]
        tanh_u = a_new
        sech2 = 1.0 - tanh_u * tanh_u
        # d/d(mean) and d/d(log_std) of mean(min Q - chi log pi)
        d_mean = dq_da * sech2 - (self.chi / b) * (2.0 * tanh_u)
        d_log_std = (dq_da * sech2 * std * eps
                     - (self.chi / b) * (-1.0 + 2.0 * tanh_u * std * eps)) * active
        out_grad = np.concatenate([d_mean, d_log_std], axis=1)
        grads, _ = self.policy.net.backward(cache, -out_grad)  # ascent
        self.opt_policy.update(self.policy.parameters(), grads)

        soft_update(self.q1_target.parameters(), self.q1.parameters(), self.tau)
        soft_update(self.q2_target.parameters(), self.q2.parameters(), self.tau)
        q_sel = np.where(pick1.ravel(), q1v.ravel(), q2v.ravel())
        logp = self.policy.log_prob_given_u(mean, log_std, u)
        return {"critic_loss": critic_loss / 2.0,
                "policy_objective": float(np.mean(q_sel - self.chi * logp))}

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = self.policy.net.state_arrays("policy")
        out.update(self.q1.state_arrays("q1"))
        out.update(self.q2.state_arrays("q2"))
        out.update(self.q1_target.state_arrays("q1t"))
        out.update(self.q2_target.state_arrays("q2t"))
        return out

    def load_state(self, data: dict[str, np.ndarray]) -> None:
        self.policy.net = DenseNetwork.from_state(data, "policy")
        self.q1 = DenseNetwork.from_state(data, "q1")
        self.q2 = DenseNetwork.from_state(data, "q2")
        self.q1_target = DenseNetwork.from_state(data, "q1t")
        self.q2_target = DenseNetwork.from_state(data, "q2t")
        lr = self.opt_policy.lr
        self.opt_policy = Adam(self.policy.parameters(), lr)
        self.opt_q1 = Adam(self.q1.parameters(), lr)
        self.opt_q2 = Adam(self.q2.parameters(), lr)
