"""Twin-delayed deterministic policy gradient."""

import numpy as np

from ..errors import NumericError
from ..nets import make_mlp, mlp_backward, mlp_forward, mlp_input_grad
from ..optim import adam_step
from .common import DeterministicPolicyAgent, LossReport, _adam, _critic_net, soft_update


class Td3Agent(DeterministicPolicyAgent):
    algorithm = "td3"

    def __init__(self, latent_dim, hyperparams, rng, action_scale=1.0):
        super().__init__(latent_dim, hyperparams, rng, action_scale)
        hp = hyperparams
        k = self.latent_dim
        self.policy = make_mlp((k, *hp.hidden_sizes, k), "relu", rng)
        self.policy_target = self.policy.copy()
        self.q1 = _critic_net(k, hp.hidden_sizes, rng)
        self.q2 = _critic_net(k, hp.hidden_sizes, rng)
        self.q1_target = self.q1.copy()
        self.q2_target = self.q2.copy()
        self.policy_opt = _adam(self.policy, hp.learning_rate)
        self.q1_opt = _adam(self.q1, hp.learning_rate)
        self.q2_opt = _adam(self.q2, hp.learning_rate)

    def networks(self):
        return [
            ("policy", self.policy),
            ("policy_target", self.policy_target),
            ("q1", self.q1),
            ("q2", self.q2),
            ("q1_target", self.q1_target),
            ("q2_target", self.q2_target),
        ]

    def optimizers(self):
        return [("policy", self.policy_opt), ("q1", self.q1_opt), ("q2", self.q2_opt)]

    def critic_value(self, state, action):
        sa = np.concatenate([state, action]).reshape(1, -1)
        v1 = mlp_forward(self.q1, sa)[-1][0, 0]
        v2 = mlp_forward(self.q2, sa)[-1][0, 0]
        return float(min(v1, v2))

    def update(self, batch, update_index=None):
        hp = self.hyperparams
        k = self.latent_dim
        scale = self.action_scale
        n = len(batch)
        if update_index is None:
            update_index = self.update_count
        s, a, r = batch.states, batch.actions, batch.rewards
        not_done = 1.0 - batch.dones.astype(np.float64)

        if not_done.any():
            a2 = self.policy_action(batch.next_states, net=self.policy_target)
            smoothing = self.rng.normal(
                0.0, hp.target_noise * scale, size=(n, k)
            )
            np.clip(
                smoothing,
                -hp.noise_clip * scale,
                hp.noise_clip * scale,
                out=smoothing,
            )
            a2 = np.clip(a2 + smoothing, -scale, scale)
            sa2 = np.concatenate([batch.next_states, a2], axis=1)
            q1t = mlp_forward(self.q1_target, sa2)[-1][:, 0]
            q2t = mlp_forward(self.q2_target, sa2)[-1][:, 0]
            target = r + hp.discount * not_done * np.minimum(q1t, q2t)
        else:
            target = r.astype(np.float64)

        sa = np.concatenate([s, a], axis=1)
        acts_q1 = mlp_forward(self.q1, sa)
        acts_q2 = mlp_forward(self.q2, sa)
        err1 = acts_q1[-1][:, 0] - target
        err2 = acts_q2[-1][:, 0] - target
        loss1 = float(np.mean(err1**2))
        loss2 = float(np.mean(err2**2))
        for name, value in (("critic-1", loss1), ("critic-2", loss2)):
            if not np.isfinite(value):
                raise NumericError(
                    f"update aborted: non-finite {name} loss at update {update_index}"
                )
        grads_q1, _ = mlp_backward(self.q1, acts_q1, (2.0 / n) * err1[:, None])
        grads_q2, _ = mlp_backward(self.q2, acts_q2, (2.0 / n) * err2[:, None])
        adam_step(self.q1.theta, grads_q1, self.q1_opt)
        adam_step(self.q2.theta, grads_q2, self.q2_opt)

        policy_loss = None
        if update_index % hp.policy_delay == 0:
            grads_p, policy_loss = policy_gradients(self, s)
            if not np.isfinite(policy_loss):
                raise NumericError(
                    f"update aborted: non-finite policy loss at update {update_index}"
                )
            adam_step(self.policy.theta, grads_p, self.policy_opt)
            soft_update(self.policy_target, self.policy, hp.soft_update)
            soft_update(self.q1_target, self.q1, hp.soft_update)
            soft_update(self.q2_target, self.q2, hp.soft_update)
        self.update_count += 1

        return LossReport(critic_losses=(loss1, loss2), policy_loss=policy_loss)


def policy_gradients(agent, states):
    """Gradients of -mean(Q1(s, pi(s))) w.r.t. the deterministic policy's
    parameters, chained through a = tanh(u) * scale. Returns (flat_grads,
    loss); exposed so tests can difference it."""
    n = states.shape[0]
    k = agent.latent_dim
    scale = agent.action_scale
    acts_p = mlp_forward(agent.policy, states)
    a_new = np.tanh(acts_p[-1]) * scale
    san = np.concatenate([states, a_new], axis=1)
    acts_q1p = mlp_forward(agent.q1, san)
    loss = float(-np.mean(acts_q1p[-1][:, 0]))
    dx = mlp_input_grad(agent.q1, acts_q1p, np.full((n, 1), -1.0 / n))
    dout_u = dx[:, k:] * scale * (1.0 - (a_new / scale) ** 2)
    grads_p, _ = mlp_backward(agent.policy, acts_p, dout_u)
    return grads_p, loss


def td3_update(agent, batch, update_index):
    return agent.update(batch, update_index)
