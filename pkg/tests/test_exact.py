import itertools
from fractions import Fraction

import numpy as np
import pytest

from polopt.core import Mode, PasswordSpace, Policy, Rule, singleton_rules
from polopt.errors import InvalidMode, NoAllowedPassword, TooManyRules
from polopt.exact import (
    ReduceStats,
    brute_force_optimal,
    guess_and_check,
    guess_and_check_literal,
    iterative_elimination,
    reduce_list,
    sort_and_optimize,
)
from polopt.generators import gen_random_instance
from polopt.models import (
    FrequencyDistribution,
    NormalizationModel,
    PreferenceList,
    RankingModel,
    RankingPopulation,
    choose,
)


def brute_force_reference(model, rules, mode, k):
    """Independent plain-python enumeration (the oracle's oracle)."""
    ids = [r.id for r in rules]
    best = None
    for size in range(len(ids) + 1):
        for combo in itertools.combinations(ids, size):
            if mode is Mode.POSITIVE and not combo:
                continue
            policy = Policy(mode, rules, frozenset(combo))
            try:
                value = model.p_k(policy, k)
            except Exception:
                continue
            if best is None or value < best:
                best = value
    return best


# --- reduce ---------------------------------------------------------------------


def test_reduce_hand_trace():
    rules = (Rule.explicit(1, ("a", "b")), Rule.explicit(2, ("c",)))
    reduced = reduce_list(PreferenceList(("a", "b", "c", "d")), rules)
    assert reduced.passwords == ("a", "c")


def test_reduce_single_rule():
    rules = (Rule.explicit(1, ("y",)),)
    assert reduce_list(PreferenceList(("x", "y")), rules).passwords == ("y",)


def test_reduce_disjoint_singletons_prefix():
    rules = tuple(Rule.explicit(i + 1, (w,)) for i, w in enumerate("abc"))
    prefs = PreferenceList(("a", "b", "c", "d", "e"))
    reduced = reduce_list(prefs, rules)
    assert reduced.passwords == ("a", "b", "c")
    # exhaustive check over every subset
    for bits in range(1, 8):
        active = [i + 1 for i in range(3) if bits >> i & 1]
        policy = Policy.positive(rules, active)
        assert choose(reduced, policy) == choose(prefs, policy)


def test_reduce_counters_within_bounds(instance_a):
    _, model, rules = instance_a
    m = len(rules)
    for prefs, _ in model.population.entries:
        stats = ReduceStats()
        reduced = reduce_list(prefs, rules, stats)
        assert len(reduced) <= m
        assert stats.choose_queries <= m
        assert stats.membership_queries <= m * m


def test_reduce_preserves_choice_for_all_subsets(instance_a):
    _, model, rules = instance_a
    ids = [r.id for r in rules]
    for prefs, _ in model.population.entries:
        reduced = reduce_list(prefs, rules)
        for bits in range(1, 1 << len(ids)):
            active = [ids[i] for i in range(len(ids)) if bits >> i & 1]
            policy = Policy.positive(rules, active)
            assert choose(reduced, policy) == choose(prefs, policy)


def test_reduce_raises_when_no_rule_covers_list():
    rules = (Rule.explicit(1, ("z",)),)
    with pytest.raises(NoAllowedPassword):
        reduce_list(PreferenceList(("a", "b")), rules)


# --- guess and check --------------------------------------------------------------


def test_guess_and_check_instance_a(instance_a):
    _, model, rules = instance_a
    result = guess_and_check(model, rules, 1)
    assert result.exact_value == Fraction(2, 5)


def test_guess_and_check_single_rule():
    space = PasswordSpace(("a", "b"))
    model = RankingModel(space, RankingPopulation.from_lists([("a", "b")]))
    rules = (Rule.explicit(1, ("a", "b")),)
    result = guess_and_check(model, rules, 1)
    assert result.best_active == frozenset({1})


def test_guess_and_check_k2_matches_brute(instance_a):
    _, model, rules = instance_a
    result = guess_and_check(model, rules, 2)
    brute = brute_force_optimal(model, rules, Mode.POSITIVE, 2)
    assert result.exact_value == brute.exact_value


def test_guess_and_check_k_guard(instance_a):
    _, model, rules = instance_a
    with pytest.raises(ValueError):
        guess_and_check(model, rules, 5)
    assert guess_and_check(model, rules, 5, max_k=5).exact_value is not None


def test_guess_and_check_rejects_negative_mode(instance_a):
    _, model, rules = instance_a
    with pytest.raises(InvalidMode):
        guess_and_check(model, rules, 1, mode=Mode.NEGATIVE)


def test_chain_version_equals_literal_loop():
    for seed in range(25):
        inst = gen_random_instance(6, 4, 8, "ranking", seed)
        for k in (1, 2):
            fast = guess_and_check(inst.model, inst.rules, k)
            slow = guess_and_check_literal(inst.model, inst.rules, k)
            assert fast.exact_value == slow.exact_value
            assert fast.best_active == slow.best_active


def test_correct_guess_invariant_holds(instance_a):
    space, model, rules = instance_a
    brute = brute_force_optimal(model, rules, Mode.POSITIVE, 1)
    optimal_allowed = frozenset(
        w
        for w in space.passwords
        if Policy.positive(rules, brute.best_active).allows(w)
    )
    result = guess_and_check_literal(model, rules, 1, invariant_allowed=optimal_allowed)
    assert result.exact_value == brute.exact_value


# --- iterative elimination ----------------------------------------------------------


def test_iterative_elimination_instance_a(instance_a):
    _, model, rules = instance_a
    result = iterative_elimination(model, rules)
    assert result.exact_value == Fraction(2, 5)
    assert len(result.trace) <= len(rules) + 1


def test_iterative_elimination_single_covering_rule():
    space = PasswordSpace(("a", "b"))
    model = RankingModel(space, RankingPopulation.from_lists([("a", "b"), ("b", "a")]))
    rules = (Rule.explicit(1, ("a", "b")),)
    result = iterative_elimination(model, rules)
    assert result.best_active == frozenset({1})
    assert [step.active for step in result.trace] == [frozenset({1})]


def test_iterative_elimination_normalization_singletons():
    dist = FrequencyDistribution({"a": 0.9, "b": 0.05, "c": 0.05})
    model = NormalizationModel(dist)
    result = iterative_elimination(model, singleton_rules(model.space))
    assert result.best_value == pytest.approx(0.5)
    ref = brute_force_reference(model, singleton_rules(model.space), Mode.POSITIVE, 1)
    assert result.best_value == pytest.approx(ref)


def test_iterative_elimination_strictly_shrinks(instance_a):
    _, model, rules = instance_a
    result = iterative_elimination(model, rules)
    sizes = [len(step.active) for step in result.trace]
    assert sizes == sorted(sizes, reverse=True)
    assert len(set(sizes)) == len(sizes)


# --- sort and optimize ---------------------------------------------------------------


def test_sort_and_optimize_bans_heavy_head():
    dist = FrequencyDistribution({"a": 0.9, "b": 0.05, "c": 0.05})
    result = sort_and_optimize(dist, 1)
    assert result.best_allowed == {"b", "c"}
    assert result.best_value == pytest.approx(0.5)


def test_sort_and_optimize_keeps_flat_distribution():
    dist = FrequencyDistribution({"a": 0.5, "b": 0.3, "c": 0.2})
    result = sort_and_optimize(dist, 1)
    assert result.best_allowed == {"a", "b", "c"}
    assert result.best_value == pytest.approx(0.5)


def test_sort_and_optimize_uniform_any_k():
    n = 10
    dist = FrequencyDistribution({f"w{i}": 1 / n for i in range(n)})
    for k in (1, 3, 7, 10):
        result = sort_and_optimize(dist, k)
        assert len(result.best_allowed) == n
        assert result.best_value == pytest.approx(k / n)


def test_sort_and_optimize_matches_brute_every_k():
    for seed in range(15):
        inst = gen_random_instance(int(np.random.default_rng(seed).integers(2, 8)), 2, 2,
                                   "normalization", seed)
        model = inst.model
        srules = singleton_rules(model.space)
        for k in range(1, len(model.space) + 1):
            brute = brute_force_optimal(model, srules, Mode.SINGLETON, k)
            fast = sort_and_optimize(model.dist, k)
            assert abs(brute.best_value - fast.best_value) <= 1e-12


def test_sort_and_optimize_float_path_agrees_with_exact():
    rng = np.random.default_rng(0)
    raw = rng.random(50)
    probs = raw / raw.sum()
    probs = {f"w{i}": float(p) for i, p in enumerate(probs)}
    dist = FrequencyDistribution(
        {**probs, "w0": probs["w0"] + (1.0 - sum(probs.values()))}
    )
    for k in (1, 5, 20):
        exact = sort_and_optimize(dist, k, exact=True)
        fast = sort_and_optimize(dist, k, exact=False)
        assert fast.best_value == pytest.approx(exact.best_value, abs=1e-12)
        assert fast.best_allowed == exact.best_allowed


# --- brute force ------------------------------------------------------------------------


def test_brute_force_instance_a_vs_reference(instance_a):
    _, model, rules = instance_a
    result = brute_force_optimal(model, rules, Mode.POSITIVE, 1)
    assert result.exact_value == Fraction(2, 5)
    ref = brute_force_reference(model, rules, Mode.POSITIVE, 1)
    assert result.best_value == pytest.approx(ref, abs=1e-3)  # low-precision recheck


def test_brute_force_negative_singleton():
    dist = FrequencyDistribution({"a": 0.9, "b": 0.05, "c": 0.05})
    model = NormalizationModel(dist)
    rules = (Rule.explicit(1, ("a",)),)
    result = brute_force_optimal(model, rules, Mode.NEGATIVE, 1)
    assert result.best_active == frozenset({1})
    assert result.best_value == pytest.approx(0.5)


def test_brute_force_full_mass_prefers_smallest_set(instance_a):
    _, model, rules = instance_a
    result = brute_force_optimal(model, rules, Mode.POSITIVE, 5)
    assert result.best_value == 1.0
    assert result.best_active == frozenset({1})  # smallest mask with support


def test_brute_force_rule_guard(instance_a):
    _, model, _ = instance_a
    rules = tuple(Rule.explicit(i + 1, ("a",)) for i in range(26))
    with pytest.raises(TooManyRules):
        brute_force_optimal(model, rules, Mode.POSITIVE, 1)


def test_brute_force_matches_reference_on_random_instances():
    for seed in range(10):
        inst = gen_random_instance(5, 4, 6, "ranking", seed)
        for mode in (Mode.POSITIVE, Mode.NEGATIVE):
            got = brute_force_optimal(inst.model, inst.rules, mode, 1)
            ref = brute_force_reference(inst.model, inst.rules, mode, 1)
            assert got.best_value == pytest.approx(ref, abs=1e-12)
        inst = gen_random_instance(5, 4, 6, "normalization", seed)
        for mode in (Mode.POSITIVE, Mode.NEGATIVE):
            for k in (1, 2):
                got = brute_force_optimal(inst.model, inst.rules, mode, k)
                ref = brute_force_reference(inst.model, inst.rules, mode, k)
                assert got.best_value == pytest.approx(ref, abs=1e-12)
