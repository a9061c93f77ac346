"""Full-information optimizers over the policy lattice.

- reduce_list: shrink a preference list to at most m entries that behave
  identically under every positive-rule policy;
- guess_and_check: exact minimizer of p(k, .) for small constant k,
  positive rules, ranking model;
- iterative_elimination: exact minimizer of p(1, .), positive rules,
  either model;
- sort_and_optimize: exact minimizer for singleton rules under the
  normalization model, any k, via one sort and a linear scan;
- brute_force_optimal: 2^m enumeration, any mode; the verification oracle
  for everything else and the only exact method for negative rules.

Deterministic tie-breaks throughout: "most popular password" ties resolve
to the lowest password in the space ordering, and optimal-subset ties
resolve to the smallest active-set bitmask (rule id i on bit i-1).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .core import Mode, Policy, Rule, signature_mask
from .errors import InvalidMode, NoAllowedPassword, TooManyRules, ZeroMassPolicy
from .models import (
    FrequencyDistribution,
    NormalizationModel,
    PolicyModel,
    PreferenceList,
    RankingModel,
)
from . import policyscan

__all__ = [
    "OptimizationResult",
    "TraceStep",
    "ReduceStats",
    "reduce_list",
    "guess_and_check",
    "guess_and_check_literal",
    "iterative_elimination",
    "sort_and_optimize",
    "brute_force_optimal",
]

BRUTE_FORCE_MAX_RULES = 25
EXACT_SCAN_MAX_N = 2048


@dataclass(frozen=True)
class TraceStep:
    """One examined policy: its active set, top password, and p(k) there.

    Samplers put the estimated value here; exact optimizers the true one.
    ``unbannable`` lists sampled passwords no inactive rule could ban
    (negative-rule heuristics only).
    """

    active: frozenset[int]
    top_password: str | None
    value: float
    unbannable: tuple[str, ...] = ()


@dataclass(frozen=True)
class OptimizationResult:
    best_active: frozenset[int] | None
    best_value: float | None
    exact_value: Fraction | None = None
    best_allowed: frozenset[str] | None = None
    estimate: float | None = None
    trace: tuple[TraceStep, ...] | None = None
    draws_used: int | None = None


@dataclass
class ReduceStats:
    """Instrumented query counters for reduce_list (Claim-style bounds)."""

    choose_queries: int = 0
    membership_queries: int = 0


def reduce_list(
    prefs: PreferenceList, rules: tuple[Rule, ...], stats: ReduceStats | None = None
) -> PreferenceList:
    """Reduce a preference list to at most m passwords.

    The reduced list picks the same password as the original under every
    positive-rule policy S subseteq [m]. Per iteration: take the most
    preferred password allowed by the current active set (one choose
    query), append it, and deactivate every rule containing it (up to
    |active| membership queries). At most m choose queries and m^2
    membership queries are issued.
    """
    stats = stats if stats is not None else ReduceStats()
    active: dict[int, Rule] = {r.id: r for r in rules}
    items = prefs.passwords
    reduced: list[str] = []
    pos = 0  # earlier items can never become allowed again: unions only shrink
    while active:
        stats.choose_queries += 1
        found = None
        while pos < len(items):
            cand = items[pos]
            if any(r.contains(cand) for r in active.values()):
                found = cand
                break
            pos += 1
        if found is None:
            if not reduced:
                raise NoAllowedPassword("no listed password belongs to any rule")
            break
        reduced.append(found)
        drop = []
        for rid, rule in active.items():
            stats.membership_queries += 1
            if rule.contains(found):
                drop.append(rid)
        for rid in drop:
            del active[rid]
    return PreferenceList(tuple(reduced))


# --- iterative elimination ----------------------------------------------------


def iterative_elimination(
    model: PolicyModel, rules: tuple[Rule, ...], mode: Mode | str = Mode.POSITIVE
) -> OptimizationResult:
    """Exact minimizer of p(1, A_S) over positive-rule policies.

    Starting from the full active set, repeatedly find the most popular
    allowed password and deactivate every rule containing it; return the
    policy along that trajectory with the smallest p(1). Works for either
    user model (the normalization model is a special case of ranking).
    """
    if Mode(mode) is not Mode.POSITIVE:
        raise InvalidMode("iterative elimination requires positive rules")
    space = model.space
    active = {r.id: r for r in rules}
    trace: list[TraceStep] = []
    keys: list = []  # exact comparison keys for the argmin
    states: list[frozenset[int]] = []
    while active:
        policy = Policy.positive(rules, active.keys())
        try:
            idx, probs = model.induced_items(policy)
        except (NoAllowedPassword, ZeroMassPolicy):
            break
        top = int(np.argmax(probs))  # first max = lowest space order
        w = space.passwords[int(idx[top])]
        value = float(probs[top])
        state = frozenset(active)
        trace.append(TraceStep(state, w, value))
        states.append(state)
        if isinstance(model, RankingModel):
            keys.append(model.p_k_exact(policy, 1))
        else:
            keys.append(value)
        drop = [rid for rid, rule in active.items() if rule.contains(w)]
        for rid in drop:
            del active[rid]
    if not trace:
        raise NoAllowedPassword("no usable policy along the elimination trajectory")
    best_i = min(range(len(keys)), key=lambda i: keys[i])
    best_state = states[best_i]
    best_policy = Policy.positive(rules, best_state)
    exact = model.p_k_exact(best_policy, 1)
    return OptimizationResult(
        best_active=best_state,
        best_value=float(exact),
        exact_value=exact,
        trace=tuple(trace),
    )


# --- guess and check ----------------------------------------------------------


def _induced_weight_cache(model: RankingModel, rules: tuple[Rule, ...]):
    cache: dict[frozenset[int], dict[int, int] | None] = {}

    def get(active: frozenset[int]) -> dict[int, int] | None:
        hit = cache.get(active, False)
        if hit is not False:
            return hit
        policy = Policy.positive(rules, active)
        try:
            weights = model.induced_weights(policy)
        except (NoAllowedPassword, ZeroMassPolicy):
            weights = None
        cache[active] = weights
        return weights

    return get


def _rules_containing(rules: tuple[Rule, ...], w: str) -> frozenset[int]:
    return frozenset(r.id for r in rules if r.contains(w))


def guess_and_check(
    model: RankingModel,
    rules: tuple[Rule, ...],
    k: int,
    mode: Mode | str = Mode.POSITIVE,
    max_k: int = 4,
) -> OptimizationResult:
    """Exact minimizer of p(k, A_S) for constant k, positive rules.

    For every guess (G, p) of the optimal solution's k most popular
    passwords and its k-th probability (p on the grid {1/n, ..., 1}),
    repeatedly ban any password outside G whose induced probability exceeds
    p by deactivating all rules containing it; surviving states are
    candidates and the best candidate wins.

    The elimination path for a fixed G does not depend on p except for its
    stopping point, so each guess's grid is resolved against one
    elimination chain; the result is identical to running the textbook
    per-(G, p) loop (see guess_and_check_literal, kept for verification).
    """
    if Mode(mode) is not Mode.POSITIVE:
        raise InvalidMode("guess-and-check requires positive rules")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > max_k:
        raise ValueError(f"k={k} beyond guard max_k={max_k}")
    if not isinstance(model, RankingModel):
        raise InvalidMode("guess-and-check needs a ranking population")

    n = model.n
    space = model.space
    reduced_union: set[str] = set()
    for prefs, _ in model.population.entries:
        reduced_union.update(reduce_list(prefs, rules).passwords)
    p_hat = sorted(space.order(w) for w in reduced_union)

    induced = _induced_weight_cache(model, rules)
    full = frozenset(r.id for r in rules)
    containing: dict[int, frozenset[int]] = {}

    def rules_of(idx: int) -> frozenset[int]:
        got = containing.get(idx)
        if got is None:
            got = containing[idx] = _rules_containing(rules, space.passwords[idx])
        return got

    candidates: dict[frozenset[int], Fraction] = {}
    guess_size = min(k, len(p_hat))
    for combo in itertools.combinations(p_hat, guess_size):
        g_set = set(combo)
        # elimination chain: states visited for this guess as p shrinks,
        # each with the weight of its worst violator outside G
        state = full
        chain: list[tuple[frozenset[int], int]] = []
        while True:
            weights = induced(state)
            if weights is None:
                break
            violators = {i: wt for i, wt in weights.items() if i not in g_set}
            if not violators:
                chain.append((state, 0))
                break
            top_w = max(violators.values())
            chain.append((state, top_w))
            victim = min(i for i, wt in violators.items() if wt == top_w)
            nxt = state - rules_of(victim)
            if not nxt:
                break
            state = nxt
        # the loop for guess p stops at the first state whose worst violator
        # is <= p; resolve every grid value p = j/n with one monotone sweep
        ptr = 0
        for j in range(n, 0, -1):
            while ptr < len(chain) and chain[ptr][1] > j:
                ptr += 1
            if ptr >= len(chain):
                break  # S ran empty (or unusable) for this p and all below
            state = chain[ptr][0]
            if state not in candidates:
                weights = induced(state)
                vals = sorted(weights.values(), reverse=True)
                candidates[state] = Fraction(sum(vals[:k]), n)
    if not candidates:
        raise NoAllowedPassword("no candidate policy survived any guess")
    best_state = min(candidates, key=lambda s: (candidates[s], signature_mask(s)))
    exact = candidates[best_state]
    return OptimizationResult(
        best_active=best_state,
        best_value=float(exact),
        exact_value=exact,
    )


def guess_and_check_literal(
    model: RankingModel,
    rules: tuple[Rule, ...],
    k: int,
    invariant_allowed: frozenset[str] | None = None,
) -> OptimizationResult:
    """Straight transcription of the guess-and-check loop; test oracle.

    Runs every (G, p) pair independently. When ``invariant_allowed`` is the
    optimal allowed set, asserts the defining invariant: under the correct
    guess, the optimal allowed set stays inside the working policy's
    allowed set at every elimination step.
    """
    n = model.n
    space = model.space
    reduced_union: set[str] = set()
    for prefs, _ in model.population.entries:
        reduced_union.update(reduce_list(prefs, rules).passwords)
    p_hat = sorted(space.order(w) for w in reduced_union)
    induced = _induced_weight_cache(model, rules)
    full = frozenset(r.id for r in rules)

    correct_guess = None
    if invariant_allowed is not None:
        opt_weights = None
        # locate the guess matching the optimal solution: its top-k picks
        for state_try in _all_subsets(full):
            pol = Policy.positive(rules, state_try)
            try:
                w = model.induced_weights(pol)
            except (NoAllowedPassword, ZeroMassPolicy):
                continue
            allowed = frozenset(
                x for x in space.passwords if pol.allows(x)
            )
            if allowed == invariant_allowed:
                opt_weights = w
                break
        if opt_weights is not None:
            ranked = sorted(opt_weights.items(), key=lambda t: (-t[1], t[0]))
            g_star = tuple(i for i, _ in ranked[: min(k, len(ranked))])
            p_star = Fraction(ranked[min(k, len(ranked)) - 1][1], n)
            correct_guess = (frozenset(g_star), p_star)

    best: tuple[Fraction, int, frozenset[int]] | None = None
    guess_size = min(k, len(p_hat))
    for combo in itertools.combinations(p_hat, guess_size):
        g_set = frozenset(combo)
        for j in range(1, n + 1):
            p = Fraction(j, n)
            checking = correct_guess is not None and (g_set, p) == correct_guess
            state = full
            while state:
                weights = induced(state)
                if weights is None:
                    state = frozenset()
                    break
                if checking:
                    pol = Policy.positive(rules, state)
                    assert all(pol.allows(x) for x in invariant_allowed), (
                        "invariant violated: optimal allowed set escaped"
                    )
                violators = {
                    i: wt for i, wt in weights.items()
                    if i not in g_set and Fraction(wt, n) > p
                }
                if not violators:
                    break
                top_w = max(violators.values())
                victim = min(i for i, wt in violators.items() if wt == top_w)
                state = state - _rules_containing(rules, space.passwords[victim])
            if not state:
                continue
            weights = induced(state)
            if weights is None:
                continue
            vals = sorted(weights.values(), reverse=True)
            value = Fraction(sum(vals[:k]), n)
            key = (value, signature_mask(state), state)
            if best is None or key[:2] < best[:2]:
                best = key
    if best is None:
        raise NoAllowedPassword("no candidate policy survived any guess")
    value, _, state = best
    return OptimizationResult(
        best_active=state, best_value=float(value), exact_value=value
    )


def _all_subsets(ids: frozenset[int]):
    ordered = sorted(ids)
    for r in range(len(ordered) + 1):
        yield from (frozenset(c) for c in itertools.combinations(ordered, r))


# --- sort and optimize --------------------------------------------------------


def sort_and_optimize(
    dist: FrequencyDistribution, k: int, exact: bool | None = None
) -> OptimizationResult:
    """Optimal blacklist under the normalization model, any k.

    Sort passwords by descending probability; among the suffixes
    A_i = {w_j : j >= i} pick the one minimizing
    (sum of the first k suffix probabilities) / (suffix mass). The optimum
    over suffixes is the optimum over all subsets. Equal probabilities keep
    the canonical password order (stable sort); value ties resolve to the
    longest suffix.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    probs = np.array([dist.probs[w] for w in dist.passwords])
    n = len(probs)
    order = np.argsort(-probs, kind="stable")
    sorted_probs = probs[order]
    use_exact = exact if exact is not None else n <= EXACT_SCAN_MAX_N

    best_i = None
    if use_exact:
        counts = dist.counts
        if counts is not None:
            vals = [counts.get(dist.passwords[i], 0) for i in order]
        else:
            vals = [Fraction(float(p)) for p in sorted_probs]
        prefix = list(itertools.accumulate(vals, initial=vals[0] * 0))
        total = prefix[n]
        best_val = None
        for i in range(n):
            denom = total - prefix[i]
            if denom == 0:
                continue
            win = prefix[min(i + k, n)] - prefix[i]
            value = Fraction(win, denom) if counts is not None else win / denom
            if best_val is None or value < best_val:
                best_val, best_i = value, i
        if best_i is None:
            raise ZeroMassPolicy("distribution has no positive mass")
        exact_value = best_val if isinstance(best_val, Fraction) else Fraction(best_val)
    else:
        suffix = np.cumsum(sorted_probs[::-1])[::-1]
        win = np.convolve(sorted_probs, np.ones(min(k, n)), mode="full")[
            min(k, n) - 1 : min(k, n) - 1 + n
        ]
        positive = (sorted_probs > 0)[::-1].cumsum()[::-1]  # suffix support sizes
        with np.errstate(invalid="ignore", divide="ignore"):
            values = np.where(suffix > 0, win / suffix, np.inf)
        values[(suffix > 0) & (positive <= k)] = 1.0
        best_i = int(np.argmin(values))
        if not np.isfinite(values[best_i]):
            raise ZeroMassPolicy("distribution has no positive mass")
        exact_value = None

    allowed = frozenset(dist.passwords[i] for i in order[best_i:])
    policy_value = (
        float(exact_value)
        if exact_value is not None
        else float(values[best_i])
    )
    return OptimizationResult(
        best_active=None,
        best_value=policy_value,
        exact_value=exact_value,
        best_allowed=allowed,
    )


# --- brute force --------------------------------------------------------------


def brute_force_optimal(
    model: PolicyModel,
    rules: tuple[Rule, ...],
    mode: Mode | str,
    k: int,
) -> OptimizationResult:
    """Exact argmin of p(k, A_S) over all S subseteq [m] (the oracle).

    Ties break to the smallest active-set bitmask. Policies whose induced
    distribution does not exist (empty or zero-mass allowed set, or an
    exhausted preference list) are skipped.
    """
    mode = Mode(mode)
    m = len(rules)
    if m > BRUTE_FORCE_MAX_RULES:
        raise TooManyRules(f"{m} rules exceed the 2^m guard ({BRUTE_FORCE_MAX_RULES})")
    if k < 1:
        raise ValueError("k must be >= 1")
    ids = [r.id for r in rules]
    id_of_bit = {i: rid for i, rid in enumerate(ids)}

    if isinstance(model, RankingModel):
        pw_sigs = policyscan.password_signatures(model.space.passwords, _rebit(rules))
        lists = [idx for idx, _ in model._lists]
        maxlen = max(len(l) for l in lists)
        lists_idx = np.full((len(lists), maxlen), -1, dtype=np.int64)
        for r, l in enumerate(lists):
            lists_idx[r, : len(l)] = l
        weights = np.array([w for _, w in model._lists], dtype=np.int64)
        values, _ = policyscan.ranking_values_chunked(
            pw_sigs, lists_idx, weights, model.n, m, k, mode
        )
    else:
        pw_sigs = policyscan.password_signatures(model.space.passwords, _rebit(rules))
        probs = model._probs
        if k == 1:
            sig_u, mass, topk, _ = policyscan.signature_groups(pw_sigs, probs, 1)
            values = policyscan.p1_values_all_policies(sig_u, mass, topk[:, 0], m, mode)
        else:
            sig_u, mass, topk, support = policyscan.signature_groups(pw_sigs, probs, min(k, len(probs)))
            values = policyscan.normalization_values_chunked(
                sig_u, mass, topk, support, m, min(k, len(probs)), mode
            )

    best_mask = int(np.argmin(values))
    if not np.isfinite(values[best_mask]):
        if isinstance(model, RankingModel):
            raise NoAllowedPassword("no usable policy in the lattice")
        raise ZeroMassPolicy("no usable policy in the lattice")
    active = frozenset(id_of_bit[b] for b in range(m) if best_mask >> b & 1)
    policy = Policy(mode, tuple(rules), active)
    exact = model.p_k_exact(policy, k)
    return OptimizationResult(
        best_active=active,
        best_value=float(exact),
        exact_value=exact,
    )


def _rebit(rules: tuple[Rule, ...]) -> tuple[Rule, ...]:
    """Renumber rules 1..m positionally so signatures use dense bits."""
    out = []
    for pos, r in enumerate(rules, start=1):
        if r.id == pos:
            out.append(r)
        elif r.members is not None:
            out.append(Rule(id=pos, members=r.members, label=r.label))
        else:
            out.append(Rule(id=pos, predicate=r.predicate, label=r.label))
    return tuple(out)
