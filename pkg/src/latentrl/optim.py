"""Adam over flat parameter buffers."""

from dataclasses import dataclass

import numpy as np

from .backend import ops
from .errors import InputError, NumericError


@dataclass
class AdamState:
    learning_rate: float
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    numeric_eps: float = 1e-8

    @classmethod
    def for_params(cls, theta, learning_rate, beta1=0.9, beta2=0.999, numeric_eps=1e-8):
        return cls(
            learning_rate=learning_rate,
            first_moment=np.zeros_like(theta),
            second_moment=np.zeros_like(theta),
            beta1=beta1,
            beta2=beta2,
            numeric_eps=numeric_eps,
        )


def adam_step(theta, grads, state):
    """Apply one bias-corrected Adam update in place and bump step_count.

    Rejects non-finite gradients before touching any state.
    """
    if theta.shape != grads.shape or theta.shape != state.first_moment.shape:
        raise InputError(
            f"parameter/gradient/moment shapes disagree: {theta.shape}, "
            f"{grads.shape}, {state.first_moment.shape}"
        )
    if not np.isfinite(grads).all():
        bad = int(np.count_nonzero(~np.isfinite(grads)))
        raise NumericError(f"update rejected: {bad} non-finite gradient entries")
    state.step_count += 1
    ops.adam_flat(
        theta,
        np.ascontiguousarray(grads),
        state.first_moment,
        state.second_moment,
        state.step_count,
        state.learning_rate,
        state.beta1,
        state.beta2,
        state.numeric_eps,
    )
