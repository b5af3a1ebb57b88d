"""The latent-space search MDP: state init, guidance transition, reward.

States and actions are both points in the k-dimensional latent space. One
environment step interpolates the state toward the action, queries the
black-box oracle for the confidences of both resulting latents, and scores
them with three log-confidence terms.
"""

from dataclasses import dataclass

import numpy as np

from .backend import DTYPE
from .errors import ConfigError, InputError


@dataclass(frozen=True)
class EnvConfig:
    latent_dim: int
    num_classes: int
    target_class: int
    diversity_factor: float = 0.0
    reward_weights: tuple = (2.0, 2.0, 8.0)
    clamp_eps: float = 1e-7
    max_step: int = 1
    action_scale: float = 1.0
    dedup_queries: bool = False

    def __post_init__(self):
        if self.latent_dim < 1:
            raise ConfigError(f"latent_dim must be >= 1, got {self.latent_dim}")
        if self.num_classes < 1:
            raise ConfigError(f"num_classes must be >= 1, got {self.num_classes}")
        if not 0 <= self.target_class < self.num_classes:
            raise ConfigError(
                f"target_class {self.target_class} outside [0, {self.num_classes})"
            )
        if not 0.0 <= self.diversity_factor <= 1.0:
            raise ConfigError(
                f"diversity_factor must lie in [0, 1], got {self.diversity_factor}"
            )
        if self.clamp_eps <= 0.0:
            raise ConfigError(f"clamp_eps must be positive, got {self.clamp_eps}")
        if self.max_step < 1:
            raise ConfigError(f"max_step must be >= 1, got {self.max_step}")
        if len(self.reward_weights) != 3:
            raise ConfigError("reward_weights must have exactly three entries")
        if self.action_scale <= 0.0:
            raise ConfigError(f"action_scale must be positive, got {self.action_scale}")


@dataclass
class StepOutcome:
    next_state: np.ndarray
    reward: float
    done: bool
    r1: float
    r2: float
    r3: float
    state_confidences: np.ndarray
    action_confidences: np.ndarray
    queries_spent: int


def init_state(k, rng):
    """Fresh episode start: a k-dimensional standard normal draw."""
    if k < 1:
        raise InputError(f"latent dimension must be >= 1, got {k}")
    return rng.standard_normal(k)


def transition(state, action, diversity_factor):
    """Move the state toward the action: alpha * s + (1 - alpha) * a."""
    state = np.asarray(state, dtype=DTYPE)
    action = np.asarray(action, dtype=DTYPE)
    if state.shape != action.shape:
        raise InputError(
            f"state shape {state.shape} != action shape {action.shape}"
        )
    a = float(diversity_factor)
    return a * state + (1.0 - a) * action


def reward_terms(state_conf, action_conf, target_class, clamp_eps):
    """The three log-confidence scores (state, action, margin).

    All three clamp their argument at clamp_eps before the log, so rewards
    stay finite even at zero confidence or negative margin.
    """
    state_conf = np.asarray(state_conf, dtype=np.float64)
    action_conf = np.asarray(action_conf, dtype=np.float64)
    if state_conf.shape != action_conf.shape or state_conf.ndim != 1:
        raise InputError("confidence vectors must be 1-D and same length")
    k_classes = state_conf.shape[0]
    if not 0 <= target_class < k_classes:
        raise InputError(
            f"target class {target_class} outside [0, {k_classes})"
        )
    if clamp_eps <= 0.0:
        raise InputError(f"clamp_eps must be positive, got {clamp_eps}")
    for name, vec in (("state", state_conf), ("action", action_conf)):
        if abs(vec.sum() - 1.0) > 1e-6:
            raise InputError(
                f"{name} confidences sum to {vec.sum():.8f}, expected 1 +- 1e-6"
            )
    y = int(target_class)
    r1 = float(np.log(max(clamp_eps, state_conf[y])))
    r2 = float(np.log(max(clamp_eps, action_conf[y])))
    if k_classes > 1:
        others = np.delete(state_conf, y)
        margin = state_conf[y] - others.max()
    else:
        margin = state_conf[y]
    r3 = float(np.log(max(clamp_eps, margin)))
    return r1, r2, r3


def total_reward(r1, r2, r3, weights):
    w1, w2, w3 = weights
    return w1 * r1 + w2 * r2 + w3 * r3


def env_step(state, action, oracle, config, step_index, purpose="training"):
    """One MDP step against the oracle.

    Issues one query for the new state and one for the action (the latter is
    skipped only when dedup_queries is set and the two latents coincide at
    diversity_factor 0). done is raised exactly when step_index reaches
    max_step; step_index is 1-based.
    """
    next_state = transition(state, action, config.diversity_factor)
    state_conf = oracle.query(next_state, purpose)
    if config.dedup_queries and config.diversity_factor == 0.0:
        action_conf = state_conf
        queries = 1
    else:
        action_conf = oracle.query(np.asarray(action, dtype=DTYPE), purpose)
        queries = 2
    r1, r2, r3 = reward_terms(
        state_conf, action_conf, config.target_class, config.clamp_eps
    )
    reward = total_reward(r1, r2, r3, config.reward_weights)
    return StepOutcome(
        next_state=next_state,
        reward=reward,
        done=step_index == config.max_step,
        r1=r1,
        r2=r2,
        r3=r3,
        state_confidences=state_conf,
        action_confidences=action_conf,
        queries_spent=queries,
    )
