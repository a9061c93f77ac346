"""User models: how a population picks passwords under a policy.

Two models induce a distribution over allowed passwords:

- ranking model: every user holds a preference order and picks their
  highest-ranked allowed password; a weighted population of preference
  lists induces the distribution of picks;
- normalization model: a base distribution over passwords is re-normalized
  onto the allowed set.

Ranking-model probabilities are integer weight ratios and are kept exact
where it matters (`p_k_exact`); floats only appear at the query boundary.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Union

import numpy as np

from .core import Mode, PasswordSpace, Policy
from .errors import (
    EmptyDataset,
    NoAllowedPassword,
    ParseError,
    UnknownPassword,
    ZeroMassPolicy,
)

__all__ = [
    "PreferenceList",
    "RankingPopulation",
    "FrequencyDistribution",
    "RankingModel",
    "NormalizationModel",
    "PolicyModel",
    "choose",
    "induced_prob",
    "p_k",
    "ranking_from_normalization",
    "load_withcount",
    "load_population",
    "save_population",
]

PROB_SUM_TOL = 1e-9


@dataclass(frozen=True)
class PreferenceList:
    """An ordered preference over passwords, most preferred first.

    May be truncated (cover only part of the space); duplicates are
    rejected. Truncation is safe for positive-rule work as long as the list
    covers every password appearing in a rule.
    """

    passwords: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.passwords)) != len(self.passwords):
            raise ValueError("preference list contains duplicates")
        if not self.passwords:
            raise ValueError("preference list is empty")

    def __len__(self) -> int:
        return len(self.passwords)

    def __iter__(self):
        return iter(self.passwords)


@dataclass(frozen=True)
class RankingPopulation:
    """Weighted distinct preference lists; n is the total user count."""

    entries: tuple[tuple[PreferenceList, int], ...]

    def __post_init__(self):
        if not self.entries:
            raise ValueError("population is empty")
        for _, w in self.entries:
            if not isinstance(w, int) or w < 1:
                raise ValueError("weights must be positive integers")

    @classmethod
    def from_lists(cls, lists: Iterable[Iterable[str]]) -> "RankingPopulation":
        """Aggregate raw lists (weight 1 each) into weighted distinct entries."""
        tally: dict[tuple[str, ...], int] = {}
        for lst in lists:
            key = tuple(lst)
            tally[key] = tally.get(key, 0) + 1
        return cls(tuple((PreferenceList(k), w) for k, w in tally.items()))

    @property
    def n(self) -> int:
        return sum(w for _, w in self.entries)


class FrequencyDistribution:
    """A password -> probability mapping (the normalization model's input).

    The mapping order fixes the canonical password ordering. When built from
    integer counts the counts are retained, so probability ratios can be
    reported exactly.
    """

    def __init__(self, probs: dict[str, float], counts: dict[str, int] | None = None):
        if not probs:
            raise EmptyDataset("distribution has no entries")
        total = math.fsum(probs.values())
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        if any(p < 0 for p in probs.values()):
            raise ValueError("negative probability")
        self.probs: dict[str, float] = dict(probs)
        self.passwords: tuple[str, ...] = tuple(probs)
        self.counts = None if counts is None else dict(counts)
        self.total_count = None if counts is None else sum(counts.values())

    @classmethod
    def from_probs(cls, probs: dict[str, float]) -> "FrequencyDistribution":
        return cls(probs)

    @classmethod
    def from_counts(cls, counts: dict[str, int]) -> "FrequencyDistribution":
        total = sum(counts.values())
        if total <= 0:
            raise EmptyDataset("counts sum to zero")
        probs = {w: c / total for w, c in counts.items()}
        return cls(probs, counts=counts)

    @property
    def distinct_count(self) -> int:
        return len(self.passwords)

    def __len__(self) -> int:
        return len(self.passwords)


# --- model implementations ---------------------------------------------------


def choose(prefs: PreferenceList, policy: Policy) -> str:
    """The highest-ranked password in ``prefs`` the policy allows."""
    for w in prefs:
        if policy.allows(w):
            return w
    raise NoAllowedPassword(f"no listed password allowed (list head {prefs.passwords[0]!r})")


class RankingModel:
    """Ranking-model distribution induced by a weighted population."""

    kind = "ranking"

    def __init__(self, space: PasswordSpace, population: RankingPopulation):
        self.space = space
        self.population = population
        self.n = population.n
        for prefs, _ in population.entries:
            for w in prefs:
                space.require(w)
        self._lists = tuple(
            (tuple(space.order(w) for w in prefs), weight)
            for prefs, weight in population.entries
        )

    def induced_weights(self, policy: Policy) -> dict[int, int]:
        """Integer pick-weight per password index; exact by construction."""
        allowed_memo: dict[int, bool] = {}
        passwords = self.space.passwords

        def ok(idx: int) -> bool:
            hit = allowed_memo.get(idx)
            if hit is None:
                hit = allowed_memo[idx] = policy.allows(passwords[idx])
            return hit

        weights: dict[int, int] = {}
        for idx_list, weight in self._lists:
            for idx in idx_list:
                if ok(idx):
                    weights[idx] = weights.get(idx, 0) + weight
                    break
            else:
                raise NoAllowedPassword(
                    "a population list has no allowed password under this policy"
                )
        return weights

    def induced_items(self, policy: Policy) -> tuple[np.ndarray, np.ndarray]:
        weights = self.induced_weights(policy)
        idx = np.array(sorted(weights), dtype=np.int64)
        probs = np.array([weights[i] for i in idx], dtype=float) / self.n
        return idx, probs

    def induced_prob(self, policy: Policy, w: str) -> float:
        i = self.space.order(w)
        if not policy.allows(w):
            return 0.0
        return self.induced_weights(policy).get(i, 0) / self.n

    def p_k(self, policy: Policy, k: int) -> float:
        return float(self.p_k_exact(policy, k))

    def p_k_exact(self, policy: Policy, k: int) -> Fraction:
        if k < 1:
            raise ValueError("k must be >= 1")
        weights = sorted(self.induced_weights(policy).values(), reverse=True)
        return Fraction(sum(weights[:k]), self.n)


class NormalizationModel:
    """Normalization-model distribution: base probabilities re-normalized."""

    kind = "normalization"

    def __init__(self, dist: FrequencyDistribution, space: PasswordSpace | None = None):
        self.dist = dist
        self.space = space or PasswordSpace(dist.passwords)
        self._probs = np.array([dist.probs.get(w, 0.0) for w in self.space.passwords])

    def allowed_indices(self, policy: Policy) -> np.ndarray:
        passwords = self.space.passwords
        return np.array(
            [i for i in range(len(passwords)) if policy.allows(passwords[i])],
            dtype=np.int64,
        )

    def induced_items(self, policy: Policy) -> tuple[np.ndarray, np.ndarray]:
        idx = self.allowed_indices(policy)
        mass = float(self._probs[idx].sum()) if idx.size else 0.0
        if mass <= 0.0:
            raise ZeroMassPolicy("policy allows zero probability mass")
        return idx, self._probs[idx] / mass

    def induced_prob(self, policy: Policy, w: str) -> float:
        i = self.space.order(w)
        if not policy.allows(w):
            return 0.0
        idx = self.allowed_indices(policy)
        mass = float(self._probs[idx].sum()) if idx.size else 0.0
        if mass <= 0.0:
            raise ZeroMassPolicy("policy allows zero probability mass")
        return float(self._probs[i]) / mass

    def p_k(self, policy: Policy, k: int) -> float:
        if k < 1:
            raise ValueError("k must be >= 1")
        idx = self.allowed_indices(policy)
        probs = self._probs[idx]
        mass = math.fsum(probs.tolist())
        if mass <= 0.0:
            raise ZeroMassPolicy("policy allows zero probability mass")
        support = int((probs > 0).sum())
        if k >= support:
            return 1.0
        top = np.sort(probs)[::-1][:k]
        return math.fsum(top.tolist()) / mass

    def p_k_exact(self, policy: Policy, k: int) -> Fraction:
        """Exact ratio; floats are dyadic rationals so the sums are exact."""
        if k < 1:
            raise ValueError("k must be >= 1")
        idx = self.allowed_indices(policy)
        counts = self.dist.counts
        passwords = self.space.passwords
        if counts is not None:
            vals = sorted((counts.get(passwords[i], 0) for i in idx), reverse=True)
        else:
            vals = sorted((Fraction(float(self._probs[i])) for i in idx), reverse=True)
        den = sum(vals)
        if den == 0:
            raise ZeroMassPolicy("policy allows zero probability mass")
        support = sum(1 for v in vals if v > 0)
        if k >= support:
            return Fraction(1)
        return Fraction(sum(vals[:k]), den) if counts is not None else sum(vals[:k]) / den


PolicyModel = Union[RankingModel, NormalizationModel]


def induced_prob(model: PolicyModel, policy: Policy, w: str) -> float:
    """Pr[w | allowed set] under the model; zero for disallowed passwords."""
    return model.induced_prob(policy, w)


def p_k(model: PolicyModel, policy: Policy, k: int) -> float:
    """Total induced probability of the k most popular allowed passwords."""
    return model.p_k(policy, k)


def model_usable(model: PolicyModel, policy: Policy) -> bool:
    """True when the induced distribution exists (nonempty, nonzero mass)."""
    try:
        model.induced_items(policy)
    except (NoAllowedPassword, ZeroMassPolicy):
        return False
    return True


def ranking_from_normalization(
    dist: FrequencyDistribution, rng: np.random.Generator | int
) -> PreferenceList:
    """Draw a full ranking equivalent to the normalization model.

    Sequential scheme: draw the top password from the base distribution,
    then the next from the distribution re-normalized on the remainder, and
    so on. Once only zero-probability passwords remain they are appended in
    uniform random order.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    passwords = list(dist.passwords)
    probs = np.array([dist.probs[w] for w in passwords], dtype=float)
    order: list[str] = []
    remaining = list(range(len(passwords)))
    while remaining:
        weights = probs[remaining]
        total = weights.sum()
        if total <= 0.0:
            tail = [remaining[i] for i in rng.permutation(len(remaining))]
            order.extend(passwords[i] for i in tail)
            break
        u = rng.random() * total
        pick = int(np.searchsorted(np.cumsum(weights), u, side="right"))
        pick = min(pick, len(remaining) - 1)
        order.append(passwords[remaining[pick]])
        remaining.pop(pick)
    return PreferenceList(tuple(order))


# --- file formats -------------------------------------------------------------

_COUNT_LINE = re.compile(r"^[ \t]*(\d+)[ \t]+(.+)$")


def load_withcount(path: str) -> FrequencyDistribution:
    """Parse a "withcount" dataset: count, one whitespace run, password.

    Leading whitespace before the count is ignored; the password is the
    remainder of the line verbatim (it may contain internal spaces).
    Duplicate passwords are merged by summing counts.
    """
    counts: dict[str, int] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if line == "":
                continue
            m = _COUNT_LINE.match(line)
            if m is None:
                raise ParseError("expected '<count> <password>'", line=lineno)
            count, password = int(m.group(1)), m.group(2)
            counts[password] = counts.get(password, 0) + count
    if not counts or sum(counts.values()) == 0:
        raise EmptyDataset(path)
    return FrequencyDistribution.from_counts(counts)


def load_population(path: str) -> RankingPopulation:
    """Ranking population file: [{"weight": int, "list": [pw, ...]}, ...]."""
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    entries = []
    for rec in obj:
        entries.append((PreferenceList(tuple(rec["list"])), int(rec["weight"])))
    return RankingPopulation(tuple(entries))


def save_population(path: str, population: RankingPopulation) -> None:
    obj = [
        {"weight": weight, "list": list(prefs.passwords)}
        for prefs, weight in population.entries
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def population_space(population: RankingPopulation, extra: Iterable[str] = ()) -> PasswordSpace:
    """A space covering every password mentioned by the population.

    Ordering: first appearance across lists (then ``extra``), which makes
    generated instances serialize deterministically.
    """
    seen: dict[str, None] = {}
    for prefs, _ in population.entries:
        for w in prefs:
            seen.setdefault(w)
    for w in extra:
        seen.setdefault(w)
    return PasswordSpace(tuple(seen))
