"""Shared agent machinery: hyperparameters, action selection, soft updates."""

from dataclasses import dataclass

import numpy as np

from ..backend import ops
from ..errors import ConfigError, InputError
from ..nets import TANH_BOUND, MlpNetwork, make_mlp, mlp_forward
from ..optim import AdamState

ALGORITHMS = ("sac", "td3", "ddpg")


@dataclass
class AgentHyperparams:
    discount: float = 0.99
    soft_update: float = 0.01
    learning_rate: float = 5e-4
    batch_size: int = 256
    replay_capacity: int = 1_000_000
    hidden_sizes: tuple = (256, 256)
    warmup_steps: int = 256
    # sac extras
    entropy_temperature: float = None  # None -> automatic tuning
    target_entropy: float = None  # None -> -latent_dim
    temperature_lr: float = None  # None -> learning_rate
    # td3 extras
    policy_delay: int = 2
    target_noise: float = 0.2
    noise_clip: float = 0.5
    # td3 / ddpg exploration
    exploration_noise: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.discount <= 1.0:
            raise ConfigError(f"discount must lie in (0, 1], got {self.discount}")
        if not 0.0 < self.soft_update <= 1.0:
            raise ConfigError(
                f"soft_update must lie in (0, 1], got {self.soft_update}"
            )
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.replay_capacity < 1:
            raise ConfigError(f"replay_capacity must be >= 1, got {self.replay_capacity}")
        if self.policy_delay < 1:
            raise ConfigError(f"policy_delay must be >= 1, got {self.policy_delay}")
        if self.warmup_steps < 0:
            raise ConfigError(f"warmup_steps must be >= 0, got {self.warmup_steps}")

    def to_dict(self):
        d = dict(self.__dict__)
        d["hidden_sizes"] = list(self.hidden_sizes)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["hidden_sizes"] = tuple(d.get("hidden_sizes", (256, 256)))
        return cls(**d)


@dataclass
class LossReport:
    critic_losses: tuple
    policy_loss: float = None  # None when the policy update was delayed
    entropy: float = None
    temperature: float = None


def soft_update(target, online, tau):
    """target <- (1 - tau) * target + tau * online, parameterwise."""
    if isinstance(target, MlpNetwork) and isinstance(online, MlpNetwork):
        if target.layer_sizes != online.layer_sizes:
            raise InputError(
                f"network shapes disagree: {target.layer_sizes} vs {online.layer_sizes}"
            )
        ops.soft_update_flat(target.theta, online.theta, float(tau))
        return target
    target = np.asarray(target)
    online = np.asarray(online)
    if target.shape != online.shape:
        raise InputError(f"shapes disagree: {target.shape} vs {online.shape}")
    ops.soft_update_flat(target.reshape(-1), online.reshape(-1).copy(), float(tau))
    return target


class AgentBase:
    """State bundle common to the three algorithms."""

    algorithm = None

    def __init__(self, latent_dim, hyperparams, rng, action_scale=1.0):
        if latent_dim < 1:
            raise ConfigError(f"latent_dim must be >= 1, got {latent_dim}")
        self.latent_dim = int(latent_dim)
        self.hyperparams = hyperparams
        self.rng = rng
        self.action_scale = float(action_scale)
        self.update_count = 0
        # exploration actions are clipped strictly inside the scaled box
        self._bound = self.action_scale * TANH_BOUND

    def _policy_output(self, states):
        return mlp_forward(self.policy, states)[-1]

    def _clip_action(self, a):
        return np.clip(a, -self._bound, self._bound)

    def networks(self):
        """All (name, net) pairs, online and target."""
        raise NotImplementedError

    def optimizers(self):
        raise NotImplementedError


class DeterministicPolicyAgent(AgentBase):
    """Base for TD3 and DDPG: tanh-squashed deterministic policy."""

    def policy_action(self, states, net=None):
        net = net if net is not None else self.policy
        a = np.tanh(mlp_forward(net, states)[-1]) * self.action_scale
        return np.clip(a, -self._bound, self._bound)

    def select_action(self, state, mode):
        state = np.asarray(state, dtype=np.float64).reshape(1, -1)
        a = self.policy_action(state)[0]
        if mode == "explore":
            a = a + self.rng.normal(
                0.0, self.hyperparams.exploration_noise * self.action_scale,
                size=self.latent_dim,
            )
        return self._clip_action(a)


def make_agent(algorithm, latent_dim, hyperparams=None, rng=None, action_scale=1.0):
    from .ddpg import DdpgAgent
    from .sac import SacAgent
    from .td3 import Td3Agent

    if hyperparams is None:
        hyperparams = AgentHyperparams()
    if rng is None:
        rng = np.random.default_rng()
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    cls = {"sac": SacAgent, "td3": Td3Agent, "ddpg": DdpgAgent}.get(algorithm)
    if cls is None:
        raise ConfigError(f"unknown algorithm {algorithm!r}, expected one of {ALGORITHMS}")
    return cls(latent_dim, hyperparams, rng, action_scale)


def select_action(agent, state, mode):
    if mode not in ("explore", "exploit"):
        raise InputError(f"mode must be explore|exploit, got {mode!r}")
    state = np.asarray(state, dtype=np.float64)
    if state.shape != (agent.latent_dim,):
        raise InputError(
            f"state shape {state.shape} does not match k={agent.latent_dim}"
        )
    return agent.select_action(state, mode)


def _critic_net(latent_dim, hidden_sizes, rng):
    return make_mlp((2 * latent_dim, *hidden_sizes, 1), "relu", rng)


def _adam(net, lr):
    return AdamState.for_params(net.theta, lr)
