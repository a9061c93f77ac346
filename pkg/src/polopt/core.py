"""Password spaces, rules, and composition-policy semantics.

A policy is a subset of *active* rules interpreted under one of three modes:

- positive: a password is allowed iff it belongs to some active rule
  (the allowed set is the union of active rules);
- negative: a password is allowed iff it belongs to no active rule
  (the allowed set is the complement of the union of active rules);
- singleton: one rule per password, active rules are banned passwords
  (an arbitrary blacklist; evaluates like negative mode).

Spaces, rules, and policies are immutable after construction and safe to
share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Protocol, runtime_checkable

from .errors import UnknownPassword

__all__ = [
    "Mode",
    "PasswordSpace",
    "Rule",
    "Policy",
    "allows",
    "allowed_set",
    "singleton_rules",
    "rule_signature",
    "signature_mask",
]


class Mode(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    SINGLETON = "singleton"


@dataclass(frozen=True)
class PasswordSpace:
    """The finite universe of passwords with a fixed total ordering.

    The ordering (tuple position) is the canonical tie-break order used by
    every deterministic algorithm in the library. Passwords are opaque UTF-8
    strings compared by exact equality.
    """

    passwords: tuple[str, ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {w: i for i, w in enumerate(self.passwords)}
        if len(index) != len(self.passwords):
            raise ValueError("password space contains duplicate identifiers")
        if not self.passwords:
            raise ValueError("password space must contain at least one password")
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.passwords)

    def __contains__(self, w: str) -> bool:
        return w in self._index

    def __iter__(self):
        return iter(self.passwords)

    def order(self, w: str) -> int:
        """Position of ``w`` in the canonical ordering."""
        try:
            return self._index[w]
        except KeyError:
            raise UnknownPassword(w) from None

    def require(self, w: str) -> str:
        if w not in self._index:
            raise UnknownPassword(w)
        return w


@runtime_checkable
class Matcher(Protocol):
    """Anything that can decide membership of a password (see polopt.rules)."""

    def matches(self, w: str) -> bool: ...


@dataclass(frozen=True)
class Rule:
    """A rule: a decidable subset of the password space.

    Backed either by an explicit password set (``members``) or by a predicate
    (``predicate``); exactly one of the two must be given. Predicate-backed
    rules are never materialized, which keeps huge spaces usable.
    """

    id: int
    members: frozenset[str] | None = None
    predicate: Matcher | None = None
    label: str = ""

    def __post_init__(self):
        if (self.members is None) == (self.predicate is None):
            raise ValueError("rule needs exactly one of members/predicate")
        if self.id < 1:
            raise ValueError("rule ids are 1-based")

    @classmethod
    def explicit(cls, rule_id: int, passwords: Iterable[str], label: str = "") -> "Rule":
        return cls(id=rule_id, members=frozenset(passwords), label=label)

    @classmethod
    def from_predicate(cls, rule_id: int, predicate: Matcher, label: str = "") -> "Rule":
        return cls(id=rule_id, predicate=predicate, label=label)

    def contains(self, w: str) -> bool:
        if self.members is not None:
            return w in self.members
        return self.predicate.matches(w)

    def describe(self) -> str:
        return self.label or f"rule {self.id}"


@dataclass(frozen=True)
class Policy:
    """An active-rule selection evaluated under a mode."""

    mode: Mode
    rules: tuple[Rule, ...]
    active: frozenset[int]

    def __post_init__(self):
        ids = {r.id for r in self.rules}
        if len(ids) != len(self.rules):
            raise ValueError("duplicate rule ids")
        stray = self.active - ids
        if stray:
            raise ValueError(f"active set references unknown rule ids {sorted(stray)}")

    @classmethod
    def positive(cls, rules: Iterable[Rule], active: Iterable[int]) -> "Policy":
        return cls(Mode.POSITIVE, tuple(rules), frozenset(active))

    @classmethod
    def negative(cls, rules: Iterable[Rule], active: Iterable[int]) -> "Policy":
        return cls(Mode.NEGATIVE, tuple(rules), frozenset(active))

    @classmethod
    def singleton(cls, rules: Iterable[Rule], banned: Iterable[int]) -> "Policy":
        return cls(Mode.SINGLETON, tuple(rules), frozenset(banned))

    def active_rules(self) -> tuple[Rule, ...]:
        return tuple(r for r in self.rules if r.id in self.active)

    def with_active(self, active: Iterable[int]) -> "Policy":
        return Policy(self.mode, self.rules, frozenset(active))

    def allows(self, w: str) -> bool:
        in_union = any(r.contains(w) for r in self.rules if r.id in self.active)
        if self.mode is Mode.POSITIVE:
            return in_union
        return not in_union


def allows(policy: Policy, w: str, space: PasswordSpace | None = None) -> bool:
    """Membership of ``w`` in the policy's allowed set.

    When ``space`` is given, ``w`` must belong to it (UnknownPassword
    otherwise); without a space the check is skipped, which is what
    predicate-backed rules over huge spaces need.
    """
    if space is not None:
        space.require(w)
    return policy.allows(w)


def allowed_set(policy: Policy, space: PasswordSpace) -> frozenset[str]:
    """Materialize the allowed set; only meaningful for explicit spaces."""
    return frozenset(w for w in space.passwords if policy.allows(w))


def singleton_rules(space: PasswordSpace) -> tuple[Rule, ...]:
    """One rule per password, id i+1 for the i-th password in space order."""
    return tuple(
        Rule.explicit(i + 1, (w,), label=f"password {w!r}")
        for i, w in enumerate(space.passwords)
    )


def rule_signature(w: str, rules: Iterable[Rule]) -> int:
    """Bitmask of the rules containing ``w``; rule id i maps to bit i-1."""
    sig = 0
    for r in rules:
        if r.contains(w):
            sig |= 1 << (r.id - 1)
    return sig


def signature_mask(active: Iterable[int]) -> int:
    """Bitmask of an active-rule id set under the same bit convention."""
    mask = 0
    for i in active:
        mask |= 1 << (i - 1)
    return mask
