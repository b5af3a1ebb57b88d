"""Deep deterministic policy gradient: single critic, per-step target updates."""

import numpy as np

from ..errors import NumericError
from ..nets import make_mlp, mlp_backward, mlp_forward
from ..optim import adam_step
from .common import DeterministicPolicyAgent, LossReport, _adam, _critic_net, soft_update
from .td3 import policy_gradients as td3_policy_gradients


class DdpgAgent(DeterministicPolicyAgent):
    algorithm = "ddpg"

    def __init__(self, latent_dim, hyperparams, rng, action_scale=1.0):
        super().__init__(latent_dim, hyperparams, rng, action_scale)
        hp = hyperparams
        k = self.latent_dim
        self.policy = make_mlp((k, *hp.hidden_sizes, k), "relu", rng)
        self.policy_target = self.policy.copy()
        self.q1 = _critic_net(k, hp.hidden_sizes, rng)
        self.q1_target = self.q1.copy()
        self.policy_opt = _adam(self.policy, hp.learning_rate)
        self.q1_opt = _adam(self.q1, hp.learning_rate)

    def networks(self):
        return [
            ("policy", self.policy),
            ("policy_target", self.policy_target),
            ("q1", self.q1),
            ("q1_target", self.q1_target),
        ]

    def optimizers(self):
        return [("policy", self.policy_opt), ("q1", self.q1_opt)]

    def critic_value(self, state, action):
        sa = np.concatenate([state, action]).reshape(1, -1)
        return float(mlp_forward(self.q1, sa)[-1][0, 0])

    def update(self, batch):
        hp = self.hyperparams
        n = len(batch)
        s, a, r = batch.states, batch.actions, batch.rewards
        not_done = 1.0 - batch.dones.astype(np.float64)

        if not_done.any():
            a2 = self.policy_action(batch.next_states, net=self.policy_target)
            sa2 = np.concatenate([batch.next_states, a2], axis=1)
            qt = mlp_forward(self.q1_target, sa2)[-1][:, 0]
            target = r + hp.discount * not_done * qt
        else:
            target = r.astype(np.float64)

        sa = np.concatenate([s, a], axis=1)
        acts_q = mlp_forward(self.q1, sa)
        err = acts_q[-1][:, 0] - target
        loss = float(np.mean(err**2))

        grads_p, policy_loss = td3_policy_gradients(self, s)

        for name, value in (("critic", loss), ("policy", policy_loss)):
            if not np.isfinite(value):
                raise NumericError(
                    f"update aborted: non-finite {name} loss at update "
                    f"{self.update_count}"
                )

        grads_q, _ = mlp_backward(self.q1, acts_q, (2.0 / n) * err[:, None])
        adam_step(self.q1.theta, grads_q, self.q1_opt)
        adam_step(self.policy.theta, grads_p, self.policy_opt)

        soft_update(self.policy_target, self.policy, hp.soft_update)
        soft_update(self.q1_target, self.q1, hp.soft_update)
        self.update_count += 1

        return LossReport(critic_losses=(loss,), policy_loss=policy_loss)


def ddpg_update(agent, batch):
    return agent.update(batch)
