import json

import pytest
from hypothesis import given, settings, strategies as st

from polopt.core import (
    Mode,
    PasswordSpace,
    Policy,
    Rule,
    allowed_set,
    allows,
    singleton_rules,
)
from polopt.errors import UnknownPassword


def space_abc():
    return PasswordSpace(("a", "b", "c"))


def two_rules():
    return (Rule.explicit(1, ("a", "b")), Rule.explicit(2, ("b", "c")))


def test_positive_empty_active_allows_nothing():
    policy = Policy.positive(two_rules(), ())
    assert not policy.allows("a")
    assert not policy.allows("b")


def test_negative_empty_active_allows_everything():
    policy = Policy.negative(two_rules(), ())
    assert policy.allows("a") and policy.allows("c")


def test_positive_membership_per_union():
    policy = Policy.positive(two_rules(), (2,))
    assert not allows(policy, "a", space_abc())
    assert allows(policy, "c", space_abc())


def test_unknown_password_rejected():
    policy = Policy.positive(two_rules(), (1,))
    with pytest.raises(UnknownPassword):
        allows(policy, "zebra", space_abc())


def test_allowed_set_positive_union():
    policy = Policy.positive(two_rules(), (1, 2))
    assert allowed_set(policy, space_abc()) == {"a", "b", "c"}


def test_allowed_set_negative_complement():
    policy = Policy.negative((Rule.explicit(1, ("a", "b")),), (1,))
    assert allowed_set(policy, space_abc()) == {"c"}


def test_singleton_nothing_banned():
    space = PasswordSpace(("a", "b"))
    policy = Policy.singleton(singleton_rules(space), ())
    assert allowed_set(policy, space) == {"a", "b"}


def test_allows_consistent_with_allowed_set(instance_a):
    space, _, rules = instance_a
    for mode in Mode:
        use = singleton_rules(space) if mode is Mode.SINGLETON else rules
        ids = [r.id for r in use]
        for bits in range(1 << len(ids)):
            active = [ids[i] for i in range(len(ids)) if bits >> i & 1]
            policy = Policy(mode, use, frozenset(active))
            member = {w for w in space.passwords if policy.allows(w)}
            assert member == allowed_set(policy, space)


@given(st.sets(st.integers(1, 4)), st.sets(st.integers(1, 4)))
@settings(max_examples=60)
def test_positive_monotone_negative_antitone(s1, s2):
    space = PasswordSpace(tuple(f"p{i}" for i in range(6)))
    rules = tuple(
        Rule.explicit(i, [f"p{j}" for j in range(6) if (j + i) % (i + 1) == 0])
        for i in range(1, 5)
    )
    small, big = (s1 & s2), (s1 | s2)
    pos_small = allowed_set(Policy.positive(rules, small), space)
    pos_big = allowed_set(Policy.positive(rules, big), space)
    assert pos_small <= pos_big
    neg_small = allowed_set(Policy.negative(rules, small), space)
    neg_big = allowed_set(Policy.negative(rules, big), space)
    assert neg_big <= neg_small


def test_singletons_express_every_subset():
    space = PasswordSpace(("a", "b", "c"))
    rules = singleton_rules(space)
    seen = set()
    for bits in range(8):
        banned = [i + 1 for i in range(3) if bits >> i & 1]
        seen.add(allowed_set(Policy.singleton(rules, banned), space))
    assert len(seen) == 8


def test_rule_requires_exactly_one_backing():
    with pytest.raises(ValueError):
        Rule(id=1, members=frozenset("a"), predicate=lambda w: True)
    with pytest.raises(ValueError):
        Rule(id=1)


def test_policy_rejects_unknown_active_ids():
    with pytest.raises(ValueError):
        Policy.positive(two_rules(), (7,))


def test_rule_config_round_trip(tmp_path):
    from polopt.rules import load_rule_config, save_rule_config

    path = tmp_path / "rules.json"
    save_rule_config(path, Mode.POSITIVE, two_rules())
    mode, rules = load_rule_config(str(path))
    assert mode is Mode.POSITIVE
    assert [sorted(r.members) for r in rules] == [["a", "b"], ["b", "c"]]
    # file shape: mode + rule objects with kind tags
    obj = json.loads(path.read_text())
    assert obj["mode"] == "positive"
    assert obj["rules"][0]["kind"] == "explicit"
