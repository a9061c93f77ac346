"""Concrete rule predicates and the standard 21-rule experiment set.

The standard set mirrors common real-world composition requirements:
nine length thresholds (8..16 characters), eight character-class counts
(1 and 2 of digit/symbol/lowercase/uppercase), two dictionary checks, and
two combination rules. Each rule exists in a positive form (passwords the
rule allows) and a negative form that is its exact logical complement.

Class-counting conventions: a character is a letter only if it is ASCII
a-z/A-Z, a digit only if ASCII 0-9; a symbol is anything that is neither a
letter, a digit, nor whitespace. Lengths count Unicode scalar values.
Dictionary matching is case-insensitive; the substring check ignores
dictionary entries shorter than the dictionary's minimum word length.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .core import Mode, Rule
from .errors import MissingDictionary, ParseError

__all__ = [
    "Dictionary",
    "RulePredicate",
    "MinLength",
    "MinClassCount",
    "InDictionary",
    "ContainsDictionaryWord",
    "AllOf",
    "Complement",
    "evaluate",
    "char_class_counts",
    "standard_rule_set",
    "load_rule_config",
    "save_rule_config",
    "rule_to_json",
    "rule_from_json",
]

CHAR_CLASSES = ("digit", "symbol", "lowercase", "uppercase")

_LOWER = frozenset("abcdefghijklmnopqrstuvwxyz")
_UPPER = frozenset("ABCDEFGHIJKLMNOPQRSTUVWXYZ")
_DIGIT = frozenset("0123456789")


def char_class_counts(w: str) -> tuple[int, int, int, int]:
    """(digits, symbols, lowercase, uppercase) counts for a password."""
    d = s = lo = up = 0
    for c in w:
        if c in _LOWER:
            lo += 1
        elif c in _UPPER:
            up += 1
        elif c in _DIGIT:
            d += 1
        elif not c.isspace():
            s += 1
    return d, s, lo, up


@dataclass(frozen=True)
class Dictionary:
    """A word list for dictionary checks.

    ``words`` holds every entry lowercased. The substring check only uses
    entries of at least ``min_word_length`` characters (the full set still
    serves the exact-match check).
    """

    words: frozenset[str]
    min_word_length: int = 4
    _pruned: frozenset[str] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(
            self,
            "_pruned",
            frozenset(w for w in self.words if len(w) >= self.min_word_length),
        )

    @classmethod
    def from_words(cls, words, min_word_length: int = 4) -> "Dictionary":
        return cls(frozenset(w.lower() for w in words), min_word_length)

    @classmethod
    def from_file(cls, path: str, min_word_length: int = 4) -> "Dictionary":
        with open(path, encoding="utf-8") as fh:
            words = [line.rstrip("\n").rstrip("\r") for line in fh]
        return cls.from_words(w for w in words if w)

    def contains_exact(self, w: str) -> bool:
        return w.lower() in self.words

    def contains_substring(self, w: str) -> bool:
        """True if any pruned dictionary word occurs contiguously in ``w``."""
        low = w.lower()
        n = len(low)
        k = self.min_word_length
        for i in range(n - k + 1):
            for j in range(i + k, n + 1):
                if low[i:j] in self._pruned:
                    return True
        return False


class RulePredicate:
    """Base class; subclasses decide membership for arbitrary UTF-8 strings."""

    name: str = ""

    def matches(self, w: str) -> bool:
        raise NotImplementedError

    def params(self) -> dict:
        return {}


@dataclass(frozen=True)
class MinLength(RulePredicate):
    n: int
    name = "min_length"

    def matches(self, w: str) -> bool:
        return len(w) >= self.n

    def params(self) -> dict:
        return {"n": self.n}


@dataclass(frozen=True)
class MinClassCount(RulePredicate):
    char_class: str
    n: int
    name = "min_class_count"

    def __post_init__(self):
        if self.char_class not in CHAR_CLASSES:
            raise ValueError(f"unknown character class {self.char_class!r}")

    def matches(self, w: str) -> bool:
        counts = char_class_counts(w)
        return counts[CHAR_CLASSES.index(self.char_class)] >= self.n

    def params(self) -> dict:
        return {"char_class": self.char_class, "n": self.n}


@dataclass(frozen=True)
class InDictionary(RulePredicate):
    dictionary: Dictionary
    path: str | None = None
    name = "in_dictionary"

    def matches(self, w: str) -> bool:
        return self.dictionary.contains_exact(w)

    def params(self) -> dict:
        return {"path": self.path}


@dataclass(frozen=True)
class ContainsDictionaryWord(RulePredicate):
    dictionary: Dictionary
    path: str | None = None
    name = "contains_dictionary_word"

    def matches(self, w: str) -> bool:
        return self.dictionary.contains_substring(w)

    def params(self) -> dict:
        return {"path": self.path}


@dataclass(frozen=True)
class AllOf(RulePredicate):
    parts: tuple[RulePredicate, ...]
    name = "all_of"

    def matches(self, w: str) -> bool:
        return all(p.matches(w) for p in self.parts)

    def params(self) -> dict:
        return {"parts": [_predicate_to_json(p) for p in self.parts]}


@dataclass(frozen=True)
class Complement(RulePredicate):
    of: RulePredicate
    name = "complement"

    def matches(self, w: str) -> bool:
        return not self.of.matches(w)

    def params(self) -> dict:
        return {"of": _predicate_to_json(self.of)}


def evaluate(predicate: RulePredicate, w: str) -> bool:
    """Decide whether ``w`` satisfies the predicate."""
    return predicate.matches(w)


_CLASS_LABEL = {
    "digit": "digit",
    "symbol": "symbol",
    "lowercase": "lowercase",
    "uppercase": "uppercase",
}


def _positive_predicates(dictionary: Dictionary | None):
    """The 21 positive predicates with their natural-language labels."""
    out: list[tuple[RulePredicate, str, str]] = []
    for n in range(8, 17):
        out.append((MinLength(n), f"{n} characters or more", f"Less than {n} characters"))
    for n in (1, 2):
        for cls in CHAR_CLASSES:
            label = _CLASS_LABEL[cls] + ("s" if n > 1 else "")
            out.append(
                (
                    MinClassCount(cls, n),
                    f"{n} {label} or more",
                    f"Less than {n} {label}",
                )
            )
    if dictionary is None:
        raise MissingDictionary("the standard rule set includes dictionary checks")
    out.append((InDictionary(dictionary), "In a dictionary", "Not in a dictionary"))
    out.append(
        (
            ContainsDictionaryWord(dictionary),
            "Contains a dictionary word",
            "Does not contain a dictionary word",
        )
    )
    combo1 = AllOf((MinLength(8), MinClassCount("uppercase", 1)))
    combo2 = AllOf((MinLength(8), MinClassCount("uppercase", 1), MinClassCount("digit", 1)))
    out.append(
        (combo1, "8 characters or more AND 1 uppercase or more",
         "Less than 8 characters OR less than 1 uppercase")
    )
    out.append(
        (combo2, "8 characters or more AND 1 uppercase or more AND 1 digit or more",
         "Less than 8 characters OR less than 1 uppercase OR less than 1 digit")
    )
    return out


def standard_rule_set(mode: Mode | str, dictionary: Dictionary | None) -> tuple[Rule, ...]:
    """The 21 experiment rules, ids 1..21, in positive or negative form.

    The negative form of every rule is the exact complement of its positive
    form, so for any password exactly one of the two matches.
    """
    mode = Mode(mode)
    triples = _positive_predicates(dictionary)
    rules = []
    for i, (pred, pos_label, neg_label) in enumerate(triples, start=1):
        if mode is Mode.NEGATIVE:
            rules.append(Rule.from_predicate(i, Complement(pred), label=neg_label))
        else:
            rules.append(Rule.from_predicate(i, pred, label=pos_label))
    return tuple(rules)


def positive_labels(dictionary: Dictionary | None = None) -> tuple[str, ...]:
    """Positive-form labels of the standard set (used to render witnesses)."""
    dictionary = dictionary or Dictionary.from_words(())
    return tuple(lbl for _, lbl, _ in _positive_predicates(dictionary))


# --- JSON (de)serialization of rule-set config files ------------------------
#
# File layout:
#   {"mode": "positive"|"negative"|"singleton",
#    "rules": [{"id": 1, "kind": "explicit", "passwords": [...], "label": "..."},
#              {"id": 2, "kind": "predicate", "predicate": {"name": ..., "params": {...}},
#               "label": "..."}]}
#
# Dictionary-backed predicates reference the dictionary by path, resolved
# relative to the config file.


def _predicate_to_json(pred: RulePredicate) -> dict:
    return {"name": pred.name, "params": pred.params()}


def _predicate_from_json(obj: dict, base_dir: str, dict_cache: dict) -> RulePredicate:
    name = obj.get("name")
    params = obj.get("params", {})
    if name == "min_length":
        return MinLength(int(params["n"]))
    if name == "min_class_count":
        return MinClassCount(params["char_class"], int(params["n"]))
    if name in ("in_dictionary", "contains_dictionary_word"):
        path = params.get("path")
        if not path:
            raise MissingDictionary(f"predicate {name!r} needs a dictionary path")
        resolved = path if os.path.isabs(path) else os.path.join(base_dir, path)
        if resolved not in dict_cache:
            dict_cache[resolved] = Dictionary.from_file(resolved)
        dictionary = dict_cache[resolved]
        if name == "in_dictionary":
            return InDictionary(dictionary, path=path)
        return ContainsDictionaryWord(dictionary, path=path)
    if name == "all_of":
        return AllOf(tuple(_predicate_from_json(p, base_dir, dict_cache) for p in params["parts"]))
    if name == "complement":
        return Complement(_predicate_from_json(params["of"], base_dir, dict_cache))
    raise ParseError(f"unknown predicate name {name!r}")


def rule_to_json(rule: Rule) -> dict:
    if rule.members is not None:
        return {
            "id": rule.id,
            "kind": "explicit",
            "passwords": sorted(rule.members),
            "label": rule.label,
        }
    return {
        "id": rule.id,
        "kind": "predicate",
        "predicate": _predicate_to_json(rule.predicate),
        "label": rule.label,
    }


def rule_from_json(obj: dict, base_dir: str = ".", dict_cache: dict | None = None) -> Rule:
    dict_cache = {} if dict_cache is None else dict_cache
    kind = obj.get("kind")
    if kind == "explicit":
        return Rule.explicit(int(obj["id"]), obj["passwords"], label=obj.get("label", ""))
    if kind == "predicate":
        pred = _predicate_from_json(obj["predicate"], base_dir, dict_cache)
        return Rule.from_predicate(int(obj["id"]), pred, label=obj.get("label", ""))
    raise ParseError(f"unknown rule kind {kind!r}")


def load_rule_config(path: str) -> tuple[Mode, tuple[Rule, ...]]:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    base_dir = os.path.dirname(os.path.abspath(path))
    mode = Mode(obj["mode"])
    cache: dict = {}
    rules = tuple(rule_from_json(r, base_dir, cache) for r in obj["rules"])
    return mode, rules


def save_rule_config(path: str, mode: Mode | str, rules) -> None:
    obj = {"mode": Mode(mode).value, "rules": [rule_to_json(r) for r in rules]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
