"""Fixed-capacity FIFO replay memory with uniform minibatch sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientSamplesError


@dataclass(frozen=True, eq=False)
class Transition:
    state_vec: np.ndarray
    action: int
    reward: float
    next_state_vec: np.ndarray | None
    done: bool

    def __post_init__(self):
        if self.done != (self.next_state_vec is None):
            raise ValueError("terminal transitions carry no next state, and only those")


@dataclass
class Batch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray  # zero rows where done
    dones: np.ndarray
    indices: np.ndarray


class ReplayMemory:
    """Ring buffer over preallocated arrays; the oldest transition is overwritten first."""

    def __init__(self, capacity: int, state_dim: int):
        if capacity < 1:
            raise ValueError("replay capacity must be positive")
        self.capacity = capacity
        self.state_dim = state_dim
        self._states = np.zeros((capacity, state_dim))
        self._next = np.zeros((capacity, state_dim))
        self._actions = np.zeros(capacity, dtype=np.intp)
        self._rewards = np.zeros(capacity)
        self._dones = np.zeros(capacity, dtype=bool)
        self._tags = np.zeros(capacity, dtype=np.int64)
        self.n_pushed = 0

    def __len__(self):
        return min(self.n_pushed, self.capacity)

    def push(self, t: Transition) -> None:
        self.push_arrays(t.state_vec, t.action, t.reward, t.next_state_vec, t.done)

    def push_arrays(self, state, action, reward, next_state, done) -> None:
        slot = self.n_pushed % self.capacity
        self._states[slot] = state
        if done:
            self._next[slot] = 0.0
        else:
            self._next[slot] = next_state
        self._actions[slot] = action
        self._rewards[slot] = reward
        self._dones[slot] = done
        self._tags[slot] = self.n_pushed
        self.n_pushed += 1

    def _slot(self, i: int) -> int:
        """Storage slot of the i-th oldest live transition."""
        if not 0 <= i < len(self):
            raise IndexError(i)
        start = self.n_pushed - len(self)
        return (start + i) % self.capacity

    def __getitem__(self, i: int) -> Transition:
        s = self._slot(i)
        done = bool(self._dones[s])
        return Transition(
            state_vec=self._states[s].copy(),
            action=int(self._actions[s]),
            reward=float(self._rewards[s]),
            next_state_vec=None if done else self._next[s].copy(),
            done=done,
        )

    def insertion_ids(self) -> list[int]:
        """Push ordinal of every live transition, oldest first."""
        return [int(self._tags[self._slot(i)]) for i in range(len(self))]

    def sample_batch(self, k: int, rng: np.random.Generator) -> Batch:
        size = len(self)
        if size < k:
            raise InsufficientSamplesError(f"cannot sample {k} transitions from a memory holding {size}")
        idx = rng.choice(size, size=k, replace=False)
        return Batch(
            states=self._states[idx],
            actions=self._actions[idx],
            rewards=self._rewards[idx],
            next_states=self._next[idx],
            dones=self._dones[idx],
            indices=idx,
        )

    def sample(self, k: int, rng: np.random.Generator) -> list[Transition]:
        batch = self.sample_batch(k, rng)
        return [
            Transition(
                state_vec=batch.states[j].copy(),
                action=int(batch.actions[j]),
                reward=float(batch.rewards[j]),
                next_state_vec=None if batch.dones[j] else batch.next_states[j].copy(),
                done=bool(batch.dones[j]),
            )
            for j in range(k)
        ]
