"""Attribute universe, group partitions and per-group imbalance statistics."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DegenerateGroupError, GroupConfigError, ValidationError

# (lower bound inclusive, reward magnitude); upper bound is the next lower bound, last one is 1.
RHO_TABLE = (
    (0.00, 0.15),
    (0.05, 0.25),
    (0.25, 0.35),
    (0.35, 0.45),
    (0.45, 0.55),
)
RHO_VALUES = tuple(rho for _, rho in RHO_TABLE)

EXAMPLE_CONFIGS = ("peta", "rap", "pa100k")


@dataclass(frozen=True)
class AttributeSchema:
    names: tuple[str, ...]

    def __post_init__(self):
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        if not names:
            raise ValidationError("attribute schema is empty")
        seen = set()
        for name in names:
            if not name or not name.strip():
                raise ValidationError("attribute names must be non-empty")
            if name in seen:
                raise ValidationError(f"duplicate attribute name {name!r}")
            seen.add(name)

    @property
    def L(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise GroupConfigError(f"unknown attribute {name!r}") from None

    def digest(self) -> bytes:
        """SHA-256 over the ordered attribute names; stored in checkpoints."""
        return hashlib.sha256("\n".join(self.names).encode("utf-8")).digest()


@dataclass(frozen=True)
class GroupConfig:
    """Ordered partition of attribute indices into named groups."""

    groups: tuple[tuple[str, tuple[int, ...]], ...]
    L: int

    def __post_init__(self):
        groups = tuple((str(name), tuple(int(i) for i in idx)) for name, idx in self.groups)
        object.__setattr__(self, "groups", groups)
        if not groups:
            raise GroupConfigError("group config has no groups")
        seen: dict[int, str] = {}
        for name, idx in groups:
            if not idx:
                raise GroupConfigError(f"group {name!r} is empty")
            for i in idx:
                if not 0 <= i < self.L:
                    raise GroupConfigError(f"group {name!r}: attribute index {i} out of range [0, {self.L})")
                if i in seen:
                    raise GroupConfigError(f"attribute index {i} appears in both {seen[i]!r} and {name!r}")
                seen[i] = name
        missing = sorted(set(range(self.L)) - set(seen))
        if missing:
            raise GroupConfigError(f"attribute indices {missing} are not assigned to any group")

    def __len__(self):
        return len(self.groups)

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.groups]

    def indices(self, g: int) -> tuple[int, ...]:
        return self.groups[g][1]

    @classmethod
    def single(cls, L: int, name: str = "all") -> "GroupConfig":
        """One group holding every attribute (the ungrouped baseline)."""
        return cls(((name, tuple(range(L))),), L)

    def to_text(self, schema: AttributeSchema) -> str:
        return "".join(
            f"{name}: {', '.join(schema.names[i] for i in idx)}\n" for name, idx in self.groups
        )


@dataclass(frozen=True)
class GroupStats:
    T: int
    N: int
    n_sum: int
    c: float
    rho: float


def _parse_group_lines(text: str) -> list[tuple[str, list[str]]]:
    parsed = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name, sep, rest = line.partition(":")
        name = name.strip()
        if not sep or not name:
            raise GroupConfigError(f"line {lineno}: expected 'group_name: attr1, attr2, ...'")
        attrs = [a.strip() for a in rest.split(",")]
        if attrs == [""]:
            attrs = []
        if any(not a for a in attrs):
            raise GroupConfigError(f"line {lineno}: empty attribute name in group {name!r}")
        parsed.append((name, attrs))
    return parsed


def load_group_config(text: str, schema: AttributeSchema | None = None) -> GroupConfig:
    """Parse a group-config document against ``schema``.

    One group per line, ``group_name: attr1, attr2, ...``; ``#`` starts a
    comment. Group order and within-group attribute order are preserved.
    Without a schema, the attributes in document order define it.
    """
    parsed = _parse_group_lines(text)
    if not parsed:
        raise GroupConfigError("group config has no groups")
    if schema is None:
        schema = AttributeSchema(tuple(a for _, attrs in parsed for a in attrs))

    owner: dict[str, str] = {}
    groups = []
    for name, attrs in parsed:
        if not attrs:
            raise GroupConfigError(f"group {name!r} is empty")
        idx = []
        for a in attrs:
            if a in owner:
                raise GroupConfigError(f"duplicate attribute {a!r} (in groups {owner[a]!r} and {name!r})")
            owner[a] = name
            if a not in schema.names:
                raise GroupConfigError(f"unknown attribute {a!r} in group {name!r}")
            idx.append(schema.names.index(a))
        groups.append((name, tuple(idx)))
    missing = [a for a in schema.names if a not in owner]
    if missing:
        raise GroupConfigError(f"missing attribute {missing[0]!r}" + (f" (and {len(missing) - 1} more)" if len(missing) > 1 else ""))
    return GroupConfig(tuple(groups), schema.L)


def schema_from_group_text(text: str) -> AttributeSchema:
    return AttributeSchema(tuple(a for _, attrs in _parse_group_lines(text) for a in attrs))


def read_group_file(path: str | Path, schema: AttributeSchema | None = None) -> tuple[AttributeSchema, GroupConfig]:
    text = Path(path).read_text(encoding="utf-8")
    if schema is None:
        schema = schema_from_group_text(text)
    return schema, load_group_config(text, schema)


def example_config_text(name: str) -> str:
    """Text of a shipped example grouping (``peta``, ``rap`` or ``pa100k``)."""
    if name not in EXAMPLE_CONFIGS:
        raise KeyError(f"no example config {name!r}; choose from {EXAMPLE_CONFIGS}")
    return resources.files("rlpar").joinpath("data", f"{name}.groups").read_text(encoding="utf-8")


def rho_for(c: float) -> float:
    """Reward magnitude for an imbalance coefficient ``c`` in [0, 1)."""
    if not (0.0 <= c < 1.0):
        raise ValueError(f"imbalance coefficient {c!r} outside [0, 1)")
    rho = RHO_TABLE[0][1]
    for lo, value in RHO_TABLE:
        if c >= lo:
            rho = value
    return rho


def compute_group_stats(labels: np.ndarray, group: Sequence[int]) -> GroupStats:
    """Imbalance coefficient and reward magnitude for one group.

    ``labels`` is the N x L binary label matrix (or a Dataset, whose
    ``labels`` attribute is used). ``c`` is total presences over total
    absences across the group's attributes.
    """
    labels = np.asarray(getattr(labels, "labels", labels))
    if labels.ndim != 2 or labels.shape[0] == 0:
        raise ValidationError("group stats need a non-empty N x L label matrix")
    idx = list(group)
    if not idx or any(not 0 <= i < labels.shape[1] for i in idx):
        raise ValidationError(f"invalid group indices {idx}")
    N = labels.shape[0]
    T = len(idx)
    n_sum = int(np.count_nonzero(labels[:, idx] == 1))
    absent = T * N - n_sum
    if absent == 0:
        raise DegenerateGroupError(f"every label of group {idx} is positive; imbalance coefficient undefined")
    c = n_sum / absent
    if c >= 1.0:
        # more presences than absences; the coefficient table stops below 1
        raise ValidationError(f"group {idx} has imbalance coefficient {c:.4f} >= 1")
    return GroupStats(T=T, N=N, n_sum=n_sum, c=c, rho=rho_for(c))
