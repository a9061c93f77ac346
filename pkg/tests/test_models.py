import math
from fractions import Fraction

import numpy as np
import pytest

from polopt.core import Mode, PasswordSpace, Policy, Rule, singleton_rules
from polopt.errors import (
    EmptyDataset,
    NoAllowedPassword,
    ParseError,
    ZeroMassPolicy,
)
from polopt.models import (
    FrequencyDistribution,
    NormalizationModel,
    PreferenceList,
    RankingModel,
    RankingPopulation,
    choose,
    induced_prob,
    load_population,
    load_withcount,
    p_k,
    ranking_from_normalization,
    save_population,
)


def dist_abc():
    return FrequencyDistribution({"a": 0.5, "b": 0.3, "c": 0.2})


def ban(dist, banned):
    space = PasswordSpace(dist.passwords)
    return Policy.singleton(singleton_rules(space), [space.order(w) + 1 for w in banned])


# --- choose -------------------------------------------------------------------


def test_choose_identity_when_all_allowed():
    space = PasswordSpace(("a", "b", "c"))
    policy = Policy.negative(singleton_rules(space), ())
    assert choose(PreferenceList(("a", "b", "c")), policy) == "a"


def test_choose_highest_ranked_allowed():
    space = PasswordSpace(("a", "b", "c"))
    policy = ban(FrequencyDistribution({"a": 1.0, "b": 0.0, "c": 0.0}), ["a"])
    assert choose(PreferenceList(("a", "b", "c")), policy) == "b"


def test_choose_errors_on_empty_policy():
    rules = (Rule.explicit(1, ("a", "b")),)
    policy = Policy.positive(rules, ())
    with pytest.raises(NoAllowedPassword):
        choose(PreferenceList(("a", "b")), policy)


# --- induced probabilities ------------------------------------------------------


def test_normalization_renormalizes():
    model = NormalizationModel(dist_abc())
    policy = ban(dist_abc(), ["a"])
    assert induced_prob(model, policy, "b") == pytest.approx(0.6)
    assert induced_prob(model, policy, "a") == 0.0


def test_ranking_symmetric_pair():
    space = PasswordSpace(("a", "b"))
    model = RankingModel(space, RankingPopulation.from_lists([("a", "b"), ("b", "a")]))
    policy = Policy.negative(singleton_rules(space), ())
    assert induced_prob(model, policy, "a") == pytest.approx(0.5)


def test_instance_a_full_policy(instance_a):
    _, model, rules = instance_a
    policy = Policy.positive(rules, (1, 2, 3))
    assert induced_prob(model, policy, "a") == pytest.approx(2 / 5)
    assert p_k(model, policy, 1) == pytest.approx(2 / 5)
    assert model.p_k_exact(policy, 1) == Fraction(2, 5)


def test_zero_mass_policy_raises():
    model = NormalizationModel(FrequencyDistribution({"a": 1.0, "b": 0.0}))
    policy = ban(model.dist, ["a"])
    with pytest.raises(ZeroMassPolicy):
        induced_prob(model, policy, "b")


def test_ranking_exhausted_list_raises():
    space = PasswordSpace(("a", "b", "c"))
    model = RankingModel(space, RankingPopulation.from_lists([("a",), ("b", "c")]))
    policy = ban(FrequencyDistribution({"a": 1.0, "b": 0.0, "c": 0.0}), ["a"])
    with pytest.raises(NoAllowedPassword):
        induced_prob(model, policy, "b")


# --- p_k ------------------------------------------------------------------------


def test_p_k_top_two():
    model = NormalizationModel(dist_abc())
    policy = ban(dist_abc(), [])
    assert p_k(model, policy, 2) == pytest.approx(0.8)


def test_p_k_saturates_at_support():
    model = NormalizationModel(dist_abc())
    policy = ban(dist_abc(), [])
    assert p_k(model, policy, 3) == 1.0
    assert p_k(model, policy, 17) == 1.0


def test_p_k_nondecreasing_and_sums_to_one(instance_a):
    _, model, rules = instance_a
    policy = Policy.positive(rules, (1, 3))
    values = [p_k(model, policy, k) for k in range(1, 6)]
    assert values == sorted(values)
    assert values[-1] == 1.0
    idx, probs = model.induced_items(policy)
    assert math.fsum(probs.tolist()) == pytest.approx(1.0, abs=1e-9)


# --- banning monotonicity (small-scale version; exhaustive one in acceptance) ----


def test_banning_only_raises_probabilities():
    model = NormalizationModel(dist_abc())
    base = ban(dist_abc(), [])
    banned = ban(dist_abc(), ["a"])
    for w in ("b", "c"):
        assert induced_prob(model, base, w) <= induced_prob(model, banned, w)


# --- ranking_from_normalization ---------------------------------------------------


def test_point_mass_heads_ranking():
    dist = FrequencyDistribution({"a": 1.0, "b": 0.0})
    prefs = ranking_from_normalization(dist, 7)
    assert prefs.passwords[0] == "a"
    assert set(prefs.passwords) == {"a", "b"}


def test_uniform_pair_is_fair():
    dist = FrequencyDistribution({"a": 0.5, "b": 0.5})
    rng = np.random.default_rng(11)
    heads = sum(ranking_from_normalization(dist, rng).passwords[0] == "a" for _ in range(4000))
    assert abs(heads / 4000 - 0.5) < 0.03


def test_sequential_scheme_probability():
    # Pr[(a,b)] = 0.9 for {a:0.9, b:0.1}
    dist = FrequencyDistribution({"a": 0.9, "b": 0.1})
    rng = np.random.default_rng(5)
    hits = sum(
        ranking_from_normalization(dist, rng).passwords == ("a", "b")
        for _ in range(10_000)
    )
    assert abs(hits / 10_000 - 0.9) < 0.01


def test_normalization_as_ranking_equivalence():
    """Empirical choose() distribution of sampled rankings matches the
    renormalized distribution (chi-square at 1e4 draws)."""
    from scipy import stats

    dist = FrequencyDistribution({"a": 0.5, "b": 0.25, "c": 0.15, "d": 0.1})
    model = NormalizationModel(dist)
    policy = ban(dist, ["a"])
    rng = np.random.default_rng(3)
    counts = {"b": 0, "c": 0, "d": 0}
    n = 10_000
    for _ in range(n):
        prefs = ranking_from_normalization(dist, rng)
        counts[choose(prefs, policy)] += 1
    expected = [n * induced_prob(model, policy, w) for w in ("b", "c", "d")]
    stat, pvalue = stats.chisquare([counts[w] for w in ("b", "c", "d")], expected)
    assert pvalue > 0.001


# --- file formats -----------------------------------------------------------------


def test_withcount_basic(tmp_path):
    path = tmp_path / "data.txt"
    path.write_text("5 aaa\n5 bbb\n")
    dist = load_withcount(str(path))
    assert dist.probs == {"aaa": 0.5, "bbb": 0.5}
    assert dist.total_count == 10 and dist.distinct_count == 2


def test_withcount_leading_spaces_and_internal_spaces(tmp_path):
    path = tmp_path / "data.txt"
    path.write_text("  290729 123456\n     1 pass word \n")
    dist = load_withcount(str(path))
    assert dist.counts["123456"] == 290729
    assert dist.counts["pass word "] == 1


def test_withcount_merges_duplicates(tmp_path):
    path = tmp_path / "data.txt"
    path.write_text("3 x\n2 y\n5 x\n")
    dist = load_withcount(str(path))
    assert dist.counts == {"x": 8, "y": 2}


def test_withcount_parse_error_carries_line(tmp_path):
    path = tmp_path / "data.txt"
    path.write_text("x y\n")
    with pytest.raises(ParseError) as err:
        load_withcount(str(path))
    assert err.value.line == 1


def test_withcount_empty_dataset(tmp_path):
    path = tmp_path / "data.txt"
    path.write_text("")
    with pytest.raises(EmptyDataset):
        load_withcount(str(path))


def test_population_round_trip(tmp_path, instance_a):
    _, model, _ = instance_a
    path = tmp_path / "pop.json"
    save_population(str(path), model.population)
    back = load_population(str(path))
    assert back.n == model.population.n
    assert set(back.entries) == set(model.population.entries)


def test_frequency_distribution_validation():
    with pytest.raises(ValueError):
        FrequencyDistribution({"a": 0.7, "b": 0.2})
    with pytest.raises(ValueError):
        FrequencyDistribution({"a": 1.5, "b": -0.5})
    with pytest.raises(EmptyDataset):
        FrequencyDistribution({})
