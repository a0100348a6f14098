"""Episode mechanics for recognising one group of attributes on one sample.

A state pairs the sample's feature vector with a context vector holding
one-hot codes for the attribute being decided now and the two decided
before it. The next state never depends on the action taken.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError

CONTEXT_SLOTS = 3


@dataclass(frozen=True, eq=False)
class MdpState:
    f: np.ndarray
    v: np.ndarray
    t: int
    group: int
    image: int
    attrs: tuple[int, ...]

    @property
    def T(self) -> int:
        return len(self.attrs)

    @property
    def L(self) -> int:
        return self.v.shape[0] // CONTEXT_SLOTS

    @property
    def attribute(self) -> int:
        """Schema index of the attribute decided at this step."""
        return self.attrs[self.t]

    def vector(self) -> np.ndarray:
        return np.concatenate([self.f, self.v])

    def __eq__(self, other):
        if not isinstance(other, MdpState):
            return NotImplemented
        return (
            self.t == other.t
            and self.group == other.group
            and self.image == other.image
            and self.attrs == other.attrs
            and np.array_equal(self.f, other.f)
            and np.array_equal(self.v, other.v)
        )


@dataclass(frozen=True)
class StepOutcome:
    next_state: MdpState | None
    reward: float
    done: bool


def encode_attribute_context(group: Sequence[int], t: int, L: int) -> np.ndarray:
    """Stacked one-hot codes ``[attr_t, attr_{t-1}, attr_{t-2}]``, zero blocks before the start."""
    if not 0 <= t < len(group):
        raise ValueError(f"step {t} outside group of size {len(group)}")
    v = np.zeros(CONTEXT_SLOTS * L)
    for slot in range(CONTEXT_SLOTS):
        k = t - slot
        if k >= 0:
            v[slot * L + group[k]] = 1.0
    return v


def context_table(group: Sequence[int], L: int) -> np.ndarray:
    """All context vectors of a group's episode, shape (T, 3L)."""
    return np.stack([encode_attribute_context(group, t, L) for t in range(len(group))])


def init_episode(features: np.ndarray, group: Sequence[int], L: int, *, group_id: int = 0,
                 image: int = 0, n_features: int | None = None) -> MdpState:
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 1:
        raise ValidationError(f"feature vector must be 1-D, got shape {f.shape}")
    if n_features is not None and f.shape[0] != n_features:
        raise ValidationError(f"feature dimension {f.shape[0]} does not match configured F={n_features}")
    attrs = tuple(int(i) for i in group)
    if not attrs:
        raise ValidationError("cannot start an episode on an empty group")
    return MdpState(f=f, v=encode_attribute_context(attrs, 0, L), t=0, group=group_id, image=image, attrs=attrs)


def transition(state: MdpState, action: int) -> StepOutcome:
    """Deterministic, action-independent move to the next attribute.

    The returned outcome carries no reward (``0.0``); see :func:`step`.
    """
    if state.t + 1 >= state.T:
        return StepOutcome(next_state=None, reward=0.0, done=True)
    nxt = MdpState(
        f=state.f,
        v=encode_attribute_context(state.attrs, state.t + 1, state.L),
        t=state.t + 1,
        group=state.group,
        image=state.image,
        attrs=state.attrs,
    )
    return StepOutcome(next_state=nxt, reward=0.0, done=False)


def basic_reward(a: int, l: int) -> float:
    return 1.0 if a == l else -1.0


def gor_reward(a: int, l: int, rho: float) -> float:
    """Asymmetric reward: +-1 on positive labels, +-rho on negative ones."""
    if l == 1:
        return 1.0 if a == 1 else -1.0
    return -rho if a == 1 else rho


def step(state: MdpState, action: int, label: int, rho: float | None = None) -> StepOutcome:
    """Reward plus transition; ``rho=None`` selects the basic +-1 reward."""
    reward = basic_reward(action, label) if rho is None else gor_reward(action, label, rho)
    out = transition(state, action)
    return StepOutcome(next_state=out.next_state, reward=reward, done=out.done)
