"""Shared fixtures: the reference ranking instance and synthetic datasets.

INSTANCE-A is the small ranking instance used throughout: 5 users over
5 passwords with 3 positive rules, whose exact optimum is p(1) = 2/5,
achieved by the full rule set among others.
"""

import os

import pytest

from polopt.core import PasswordSpace, Rule
from polopt.models import (
    FrequencyDistribution,
    NormalizationModel,
    RankingModel,
    RankingPopulation,
)
from polopt.rules import Dictionary

DATA_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "data")
DICTIONARY_PATH = os.path.abspath(os.path.join(DATA_DIR, "small_dictionary.txt"))

INSTANCE_A_LISTS = (
    ("a", "c", "b", "d", "e"),
    ("a", "d", "c", "b", "e"),
    ("b", "a", "d", "e", "c"),
    ("c", "e", "a", "b", "d"),
    ("d", "b", "e", "a", "c"),
)

INSTANCE_A_OPTIMUM = 0.4  # = 2/5, verified exhaustively in test_exact


def make_instance_a():
    space = PasswordSpace(("a", "b", "c", "d", "e"))
    population = RankingPopulation.from_lists(INSTANCE_A_LISTS)
    model = RankingModel(space, population)
    rules = (
        Rule.explicit(1, ("a", "b")),
        Rule.explicit(2, ("b", "c")),
        Rule.explicit(3, ("d", "e")),
    )
    return space, model, rules


@pytest.fixture
def instance_a():
    return make_instance_a()


def make_heavy_head():
    """Synthetic heavy-head dataset with 21 negative rules.

    Six near-tied head passwords carry 78% of the mass; a moderate
    "stub" password belongs to no rule; 54 light tail words carry the
    rest. Each head can be banned cleanly (three 2-head cluster rules) or
    via dirty rules that drag 3 tail words each. The unique optimal
    negative policy is the three cluster rules; any dirty ban makes the
    final allowed set differ and, thanks to the stub, leaves every
    sloppily-reached state worse than the empty policy.
    """
    heads = [f"h{i}" for i in range(6)]
    head_p = [0.1318, 0.1308, 0.1298, 0.1288, 0.1278, 0.1270]
    tails = [f"t{i:02d}" for i in range(54)]
    tail_total = 1.0 - sum(head_p) - 0.0256
    tail_p = tail_total / 54
    probs = dict(zip(heads, head_p)) | {"stub": 0.0256} | {t: tail_p for t in tails}
    probs[tails[-1]] += 1.0 - sum(probs.values())
    dist = FrequencyDistribution(probs)
    rules = []
    rid = 1
    for c in range(3):
        rules.append(
            Rule.explicit(rid, (heads[2 * c], heads[2 * c + 1]), label=f"cluster {c}")
        )
        rid += 1
    slot = 0
    for h in heads:
        for d in range(3):
            chunk = tails[slot : slot + 3]
            slot += 3
            rules.append(Rule.explicit(rid, [h] + chunk, label=f"dirty {h} #{d}"))
            rid += 1
    return NormalizationModel(dist), tuple(rules)


@pytest.fixture(scope="session")
def heavy_head():
    return make_heavy_head()


@pytest.fixture(scope="session")
def small_dictionary():
    return Dictionary.from_file(DICTIONARY_PATH)
