"""Soft actor-critic with twin critics and automatic entropy temperature."""

import numpy as np

from ..errors import NumericError
from ..nets import (
    LOG_STD_MAX,
    LOG_STD_MIN,
    make_mlp,
    mlp_backward,
    mlp_forward,
    mlp_input_grad,
    squashed_gaussian_sample,
)
from ..optim import AdamState, adam_step
from .common import AgentBase, LossReport, _adam, _critic_net, soft_update


class SacAgent(AgentBase):
    algorithm = "sac"

    def __init__(self, latent_dim, hyperparams, rng, action_scale=1.0):
        super().__init__(latent_dim, hyperparams, rng, action_scale)
        hp = hyperparams
        k = self.latent_dim
        # policy emits [mean | log_std] heads
        self.policy = make_mlp((k, *hp.hidden_sizes, 2 * k), "relu", rng)
        self.q1 = _critic_net(k, hp.hidden_sizes, rng)
        self.q2 = _critic_net(k, hp.hidden_sizes, rng)
        self.q1_target = self.q1.copy()
        self.q2_target = self.q2.copy()
        self.policy_opt = _adam(self.policy, hp.learning_rate)
        self.q1_opt = _adam(self.q1, hp.learning_rate)
        self.q2_opt = _adam(self.q2, hp.learning_rate)
        self.auto_temperature = hp.entropy_temperature is None
        if self.auto_temperature:
            self.log_alpha = np.zeros(1)
            self.alpha_opt = AdamState.for_params(
                self.log_alpha,
                hp.temperature_lr if hp.temperature_lr is not None else hp.learning_rate,
            )
            self.target_entropy = (
                hp.target_entropy if hp.target_entropy is not None else -float(k)
            )
        else:
            self.log_alpha = np.array([np.log(hp.entropy_temperature)])
            self.alpha_opt = None
            self.target_entropy = None

    @property
    def temperature(self):
        return float(np.exp(self.log_alpha[0]))

    def networks(self):
        return [
            ("policy", self.policy),
            ("q1", self.q1),
            ("q2", self.q2),
            ("q1_target", self.q1_target),
            ("q2_target", self.q2_target),
        ]

    def optimizers(self):
        opts = [("policy", self.policy_opt), ("q1", self.q1_opt), ("q2", self.q2_opt)]
        if self.alpha_opt is not None:
            opts.append(("alpha", self.alpha_opt))
        return opts

    def _heads(self, states):
        acts = mlp_forward(self.policy, states)
        out = acts[-1]
        return acts, out[:, : self.latent_dim], out[:, self.latent_dim :]

    def select_action(self, state, mode):
        state = np.asarray(state, dtype=np.float64).reshape(1, -1)
        _, mean, log_std = self._heads(state)
        if mode == "exploit":
            return self._clip_action(np.tanh(mean[0]) * self.action_scale)
        noise = self.rng.standard_normal((1, self.latent_dim))
        action, _ = squashed_gaussian_sample(mean, log_std, noise)
        return action[0] * self.action_scale

    def critic_value(self, state, action):
        """min of the twin critics at one (state, action) pair."""
        sa = np.concatenate([state, action]).reshape(1, -1)
        v1 = mlp_forward(self.q1, sa)[-1][0, 0]
        v2 = mlp_forward(self.q2, sa)[-1][0, 0]
        return float(min(v1, v2))

    def update(self, batch):
        hp = self.hyperparams
        k = self.latent_dim
        scale = self.action_scale
        n = len(batch)
        s, a, r = batch.states, batch.actions, batch.rewards
        not_done = 1.0 - batch.dones.astype(np.float64)
        temp = self.temperature

        # soft Bellman target; skipped entirely when every transition is terminal
        if not_done.any():
            _, mean2, log_std2 = self._heads(batch.next_states)
            noise2 = self.rng.standard_normal((n, k))
            a2, logp2 = squashed_gaussian_sample(mean2, log_std2, noise2)
            sa2 = np.concatenate([batch.next_states, a2 * scale], axis=1)
            q1t = mlp_forward(self.q1_target, sa2)[-1][:, 0]
            q2t = mlp_forward(self.q2_target, sa2)[-1][:, 0]
            target = r + hp.discount * not_done * (
                np.minimum(q1t, q2t) - temp * logp2
            )
        else:
            target = r.astype(np.float64)

        sa = np.concatenate([s, a], axis=1)
        acts_q1 = mlp_forward(self.q1, sa)
        acts_q2 = mlp_forward(self.q2, sa)
        q1v = acts_q1[-1][:, 0]
        q2v = acts_q2[-1][:, 0]
        err1 = q1v - target
        err2 = q2v - target
        loss1 = float(np.mean(err1**2))
        loss2 = float(np.mean(err2**2))
        grads_q1, _ = mlp_backward(self.q1, acts_q1, (2.0 / n) * err1[:, None])
        grads_q2, _ = mlp_backward(self.q2, acts_q2, (2.0 / n) * err2[:, None])

        noise = self.rng.standard_normal((n, k))
        grads_p, logp, policy_loss = policy_gradients(self, s, noise, temp)

        for name, value in (
            ("critic-1", loss1), ("critic-2", loss2), ("policy", policy_loss),
        ):
            if not np.isfinite(value):
                raise NumericError(
                    f"update aborted: non-finite {name} loss at update "
                    f"{self.update_count}"
                )

        adam_step(self.q1.theta, grads_q1, self.q1_opt)
        adam_step(self.q2.theta, grads_q2, self.q2_opt)
        adam_step(self.policy.theta, grads_p, self.policy_opt)
        if self.auto_temperature:
            alpha_grad = np.array([-(np.mean(logp) + self.target_entropy)])
            adam_step(self.log_alpha, alpha_grad, self.alpha_opt)
        soft_update(self.q1_target, self.q1, hp.soft_update)
        soft_update(self.q2_target, self.q2, hp.soft_update)
        self.update_count += 1

        return LossReport(
            critic_losses=(loss1, loss2),
            policy_loss=policy_loss,
            entropy=float(-np.mean(logp)),
            temperature=temp,
        )


def policy_gradients(agent, states, noise, temp=None):
    """Hand-derived gradients of mean(temp * log pi - min_i Q_i) w.r.t. the
    policy parameters, for a fixed reparameterization noise.

    Chain rule through a = tanh(u), u = mean + exp(log_std) * noise:
    d log pi / d mean = 2a, d log pi / d log_std = -1 + 2a sigma eps, and the
    critic term flows through the per-sample minimum critic only. Returns
    (flat_grads, log_probs, loss); exposed so tests can difference it.
    """
    if temp is None:
        temp = agent.temperature
    n = states.shape[0]
    k = agent.latent_dim
    scale = agent.action_scale
    acts_p, mean, log_std_raw = agent._heads(states)
    log_std = np.clip(log_std_raw, LOG_STD_MIN, LOG_STD_MAX)
    a_new, logp = squashed_gaussian_sample(mean, log_std_raw, noise)
    sig_eps = np.exp(log_std) * noise
    san = np.concatenate([states, a_new * scale], axis=1)
    acts_q1p = mlp_forward(agent.q1, san)
    acts_q2p = mlp_forward(agent.q2, san)
    q1p = acts_q1p[-1][:, 0]
    q2p = acts_q2p[-1][:, 0]
    qmin = np.minimum(q1p, q2p)
    mask1 = (q1p <= q2p).astype(np.float64)
    dx1 = mlp_input_grad(agent.q1, acts_q1p, (-mask1 / n)[:, None])
    dx2 = mlp_input_grad(agent.q2, acts_q2p, (-(1.0 - mask1) / n)[:, None])
    q_grad_a = (dx1 + dx2)[:, k:] * scale  # dL/da_new through the scaling
    one_m_a2 = 1.0 - a_new * a_new
    g_mean = (temp / n) * (2.0 * a_new) + q_grad_a * one_m_a2
    g_log_std = (temp / n) * (-1.0 + 2.0 * a_new * sig_eps) + (
        q_grad_a * one_m_a2 * sig_eps
    )
    g_log_std[(log_std_raw < LOG_STD_MIN) | (log_std_raw > LOG_STD_MAX)] = 0.0
    dout_policy = np.concatenate([g_mean, g_log_std], axis=1)
    grads_p, _ = mlp_backward(agent.policy, acts_p, dout_policy)
    return grads_p, logp, float(np.mean(temp * logp - qmin))


def policy_objective(agent, states, noise, temp=None):
    """The loss policy_gradients differentiates, via forward passes only."""
    if temp is None:
        temp = agent.temperature
    _, mean, log_std_raw = agent._heads(states)
    a_new, logp = squashed_gaussian_sample(mean, log_std_raw, noise)
    san = np.concatenate([states, a_new * agent.action_scale], axis=1)
    q1p = mlp_forward(agent.q1, san)[-1][:, 0]
    q2p = mlp_forward(agent.q2, san)[-1][:, 0]
    return float(np.mean(temp * logp - np.minimum(q1p, q2p)))


def sac_update(agent, batch):
    return agent.update(batch)
