"""Bounded FIFO replay memory with uniform sampling.

Stored columnar for cheap batched gathering. The backing arrays start small
and double as needed up to capacity, so a paper-scale capacity does not
allocate gigabytes for a desk-scale run.
"""

from dataclasses import dataclass

import numpy as np

from .backend import DTYPE
from .errors import InputError, UnavailableError

_INITIAL_ALLOC = 4096


@dataclass
class TransitionRecord:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool


@dataclass
class TransitionBatch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray

    def __len__(self):
        return self.states.shape[0]


class ReplayBuffer:
    def __init__(self, capacity, latent_dim):
        if capacity < 1:
            raise InputError(f"capacity must be >= 1, got {capacity}")
        if latent_dim < 1:
            raise InputError(f"latent_dim must be >= 1, got {latent_dim}")
        self.capacity = int(capacity)
        self.latent_dim = int(latent_dim)
        self.size = 0
        self.total_pushed = 0
        self._head = 0  # next insert position
        self._alloc(min(self.capacity, _INITIAL_ALLOC))

    def _alloc(self, n):
        self._states = np.empty((n, self.latent_dim), dtype=DTYPE)
        self._actions = np.empty((n, self.latent_dim), dtype=DTYPE)
        self._rewards = np.empty(n, dtype=DTYPE)
        self._next_states = np.empty((n, self.latent_dim), dtype=DTYPE)
        self._dones = np.empty(n, dtype=bool)

    @property
    def _allocated(self):
        return self._states.shape[0]

    def _grow(self):
        new = min(self.capacity, self._allocated * 2)
        old = (self._states, self._actions, self._rewards, self._next_states, self._dones)
        order = self._fifo_order()
        self._alloc(new)
        for dst, src in zip(
            (self._states, self._actions, self._rewards, self._next_states, self._dones),
            old,
        ):
            dst[: self.size] = src[order]
        self._head = self.size

    def _fifo_order(self):
        """Indices of stored records from oldest to newest."""
        if self.size < self._allocated:
            return np.arange(self.size)
        return (np.arange(self.size) + self._head) % self._allocated

    def push(self, record):
        state = np.asarray(record.state, dtype=DTYPE)
        action = np.asarray(record.action, dtype=DTYPE)
        next_state = np.asarray(record.next_state, dtype=DTYPE)
        for name, vec in (("state", state), ("action", action), ("next_state", next_state)):
            if vec.shape != (self.latent_dim,):
                raise InputError(
                    f"{name} has shape {vec.shape}, buffer holds "
                    f"{self.latent_dim}-dimensional latents"
                )
        if self.size == self._allocated and self._allocated < self.capacity:
            self._grow()
        i = self._head
        self._states[i] = state
        self._actions[i] = action
        self._rewards[i] = record.reward
        self._next_states[i] = next_state
        self._dones[i] = record.done
        self._head = (i + 1) % self._allocated
        self.size = min(self.size + 1, self._allocated)
        self.total_pushed += 1

    def sample(self, batch_size, rng):
        """Uniform-with-replacement batch of stored transitions."""
        if self.size == 0:
            raise UnavailableError("cannot sample from an empty replay buffer")
        if batch_size < 1:
            raise InputError(f"batch_size must be >= 1, got {batch_size}")
        idx = rng.integers(0, self.size, size=batch_size)
        if self.size == self._allocated and self._head != 0:
            idx = (idx + self._head) % self._allocated
        return TransitionBatch(
            states=self._states[idx],
            actions=self._actions[idx],
            rewards=self._rewards[idx],
            next_states=self._next_states[idx],
            dones=self._dones[idx],
        )

    def truncated_to(self, total_pushed):
        """Copy of this buffer as it stood after `total_pushed` pushes.

        Used to roll a training run back to an episode boundary after a
        mid-episode failure; the dropped pushes must still be present (i.e.
        not yet evicted), which holds when only a handful are dropped.
        """
        drop = self.total_pushed - int(total_pushed)
        if drop < 0 or drop > self.size:
            raise InputError(
                f"cannot roll back {drop} pushes from a buffer holding {self.size}"
            )
        arrays = self.state_arrays()
        kept = {key: value[: self.size - drop] for key, value in arrays.items()}
        clone = ReplayBuffer.from_state_arrays(self.capacity, self.latent_dim, kept)
        clone.total_pushed = int(total_pushed)
        return clone

    def records(self):
        """Stored transitions oldest-first (small buffers / tests / checkpoints)."""
        order = self._fifo_order()
        return [
            TransitionRecord(
                state=self._states[i].copy(),
                action=self._actions[i].copy(),
                reward=float(self._rewards[i]),
                next_state=self._next_states[i].copy(),
                done=bool(self._dones[i]),
            )
            for i in order
        ]

    def state_arrays(self):
        """Columnar snapshot oldest-first, for checkpointing."""
        order = self._fifo_order()
        return {
            "states": self._states[order],
            "actions": self._actions[order],
            "rewards": self._rewards[order],
            "next_states": self._next_states[order],
            "dones": self._dones[order],
        }

    @classmethod
    def from_state_arrays(cls, capacity, latent_dim, arrays):
        buf = cls(capacity, latent_dim)
        n = arrays["states"].shape[0]
        while buf._allocated < min(n, capacity):
            buf._grow()
        for i in range(n):
            buf.push(
                TransitionRecord(
                    state=arrays["states"][i],
                    action=arrays["actions"][i],
                    reward=float(arrays["rewards"][i]),
                    next_state=arrays["next_states"][i],
                    done=bool(arrays["dones"][i]),
                )
            )
        return buf


def buffer_push(buffer, record):
    buffer.push(record)
    return buffer


def buffer_sample(buffer, batch_size, rng):
    return buffer.sample(batch_size, rng)
