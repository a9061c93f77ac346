"""Sample-access optimizers: policies built from users' sampled picks only.

The oracle abstracts "ask a random user for their favorite password under
policy A". Algorithms here never look at the underlying model; they see
draws, the rules, and (epsilon, delta) style accuracy targets.

All samplers are deterministic given (seed, instance, config): one RNG
stream per oracle drives both the draws and any randomized tie decisions.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import Mode, Policy, Rule, signature_mask
from .errors import (
    InvalidMode,
    NoAllowedPassword,
    OracleExhausted,
    ZeroMassPolicy,
)
from .exact import OptimizationResult, TraceStep
from .models import PolicyModel

__all__ = [
    "SampleOracle",
    "SamplingConfig",
    "sample_and_eliminate",
    "sample_constant_k",
    "negative_sample_random",
    "negative_sample_ban_smallest",
]


class SampleOracle:
    """Seeded source of one random user's favorite password under a policy.

    ``draw_batch`` returns password indices into the model's space; the
    draw counter advances by the batch size. Identical seeds give identical
    draw sequences. An optional ``max_draws`` budget raises OracleExhausted
    when exceeded.
    """

    def __init__(
        self,
        model: PolicyModel,
        seed,
        max_draws: int | None = None,
        dist_cache: dict | None = None,
    ):
        self._model = model
        self.space = model.space
        self.rng = np.random.default_rng(seed)
        self.max_draws = max_draws
        self._draws = 0
        # induced-distribution cache; may be shared across oracles over the
        # same model and rules (its contents are policy-determined)
        self._dist_cache: dict[tuple[Mode, frozenset[int]], tuple] = (
            dist_cache if dist_cache is not None else {}
        )

    @property
    def draws(self) -> int:
        return self._draws

    def _items(self, policy: Policy):
        key = (policy.mode, policy.active)
        hit = self._dist_cache.get(key)
        if hit is None:
            idx, probs = self._model.induced_items(policy)
            hit = (idx, np.cumsum(probs))
            self._dist_cache[key] = hit
        return hit

    def usable(self, policy: Policy) -> bool:
        try:
            self._items(policy)
        except (NoAllowedPassword, ZeroMassPolicy):
            return False
        return True

    def draw_batch(self, policy: Policy, size: int) -> np.ndarray:
        if self.max_draws is not None and self._draws + size > self.max_draws:
            raise OracleExhausted(f"draw budget {self.max_draws} exceeded")
        idx, cum = self._items(policy)
        u = self.rng.random(size)
        pos = np.searchsorted(cum, u, side="right")
        np.minimum(pos, len(idx) - 1, out=pos)
        self._draws += size
        return idx[pos]

    def draw(self, policy: Policy) -> str:
        return self.space.passwords[int(self.draw_batch(policy, 1)[0])]


@dataclass(frozen=True)
class SamplingConfig:
    """Accuracy targets and sampling knobs.

    With (epsilon, delta) set, the per-iteration sample size defaults to
    ceil((100/eps^2) * ln(4m/(eps*delta))) and elimination stops early once
    the top sampled frequency is at most eps/2. An explicit ``sample_size``
    overrides the formula (the experiment protocol fixes s directly); with
    ``epsilon`` unset there is no early stop.

    For the constant-k sampler, ``k`` is the optimization target (guarded
    by ``max_k``); stage-2 guesses use a probability grid of multiples of
    eps/4 on [0, 1] and comparisons padded by eps/4.
    """

    epsilon: float | None = None
    delta: float | None = None
    k: int = 1
    sample_size: int | None = None
    max_iterations: int | None = None
    max_k: int = 4

    def __post_init__(self):
        for name in ("epsilon", "delta"):
            v = getattr(self, name)
            if v is not None and not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0,1)")
        if self.sample_size is None and (self.epsilon is None or self.delta is None):
            raise ValueError("need either sample_size or both epsilon and delta")
        if self.sample_size is not None and self.sample_size < 1:
            raise ValueError("sample_size must be positive")
        if self.k < 1:
            raise ValueError("k must be >= 1")

    def per_iteration_samples(self, m: int) -> int:
        if self.sample_size is not None:
            return self.sample_size
        eps, delta = self.epsilon, self.delta
        return math.ceil((100.0 / eps**2) * math.log(4.0 * m / (eps * delta)))

    @property
    def early_exit(self) -> float | None:
        return None if self.epsilon is None else self.epsilon / 2.0


def _frequencies(drawn: np.ndarray, n_pw: int) -> np.ndarray:
    return np.bincount(drawn, minlength=n_pw)


class _RuleIndex:
    """Lazy password-index -> containing-rule-ids lookup."""

    def __init__(self, space, rules: tuple[Rule, ...]):
        self.space = space
        self.rules = rules
        self._cache: dict[int, frozenset[int]] = {}

    def rules_of(self, idx: int) -> frozenset[int]:
        got = self._cache.get(idx)
        if got is None:
            w = self.space.passwords[idx]
            got = frozenset(r.id for r in self.rules if r.contains(w))
            self._cache[idx] = got
        return got


def _argmin_trace(trace: list[TraceStep]) -> TraceStep:
    best = trace[0]
    for step in trace[1:]:
        if step.value < best.value:
            best = step
    return best


def sample_and_eliminate(
    oracle: SampleOracle,
    rules: tuple[Rule, ...],
    cfg: SamplingConfig,
    mode: Mode | str = Mode.POSITIVE,
) -> OptimizationResult:
    """Sampled analogue of iterative elimination, positive rules.

    Per iteration draw s users from the current policy; if the most
    frequent password's share is at most eps/2, keep the policy; otherwise
    deactivate every rule containing it. On rule exhaustion return the
    visited policy with the smallest estimate. Uses at most (m+1)*s draws
    and, with probability 1-delta, lands within eps of the optimum.
    """
    if Mode(mode) is not Mode.POSITIVE:
        raise InvalidMode("sample-and-eliminate requires positive rules")
    m = len(rules)
    s = cfg.per_iteration_samples(m)
    index = _RuleIndex(oracle.space, rules)
    n_pw = len(oracle.space.passwords)
    active = frozenset(r.id for r in rules)
    trace: list[TraceStep] = []
    iterations = 0
    while active:
        if cfg.max_iterations is not None and iterations >= cfg.max_iterations:
            break
        policy = Policy.positive(rules, active)
        try:
            drawn = oracle.draw_batch(policy, s)
        except (NoAllowedPassword, ZeroMassPolicy):
            break
        counts = _frequencies(drawn, n_pw)
        star = int(np.argmax(counts))  # ties: lowest password in space order
        p_hat = counts[star] / s
        trace.append(TraceStep(active, oracle.space.passwords[star], p_hat))
        iterations += 1
        if cfg.early_exit is not None and p_hat <= cfg.early_exit:
            return OptimizationResult(
                best_active=active,
                best_value=None,
                estimate=p_hat,
                trace=tuple(trace),
                draws_used=oracle.draws,
            )
        active = active - index.rules_of(star)
    if not trace:
        raise NoAllowedPassword("the starting policy could not be sampled")
    best = _argmin_trace(trace)
    return OptimizationResult(
        best_active=best.active,
        best_value=None,
        estimate=best.value,
        trace=tuple(trace),
        draws_used=oracle.draws,
    )


def _negative_sampler(
    oracle: SampleOracle,
    rules: tuple[Rule, ...],
    cfg: SamplingConfig,
    pick_rule,
) -> OptimizationResult:
    m = len(rules)
    s = cfg.per_iteration_samples(m)
    index = _RuleIndex(oracle.space, rules)
    n_pw = len(oracle.space.passwords)
    active: frozenset[int] = frozenset()
    trace: list[TraceStep] = []
    iterations = 0
    while True:
        if cfg.max_iterations is not None and iterations >= cfg.max_iterations:
            break
        policy = Policy.negative(rules, active)
        try:
            drawn = oracle.draw_batch(policy, s)
        except (NoAllowedPassword, ZeroMassPolicy):
            break
        counts = _frequencies(drawn, n_pw)
        star = int(np.argmax(counts))
        p_hat = counts[star] / s
        iterations += 1
        if cfg.early_exit is not None and p_hat <= cfg.early_exit:
            trace.append(TraceStep(active, oracle.space.passwords[star], p_hat))
            return OptimizationResult(
                best_active=active,
                best_value=None,
                estimate=p_hat,
                trace=tuple(trace),
                draws_used=oracle.draws,
            )
        # ban the most frequent sampled password with an available rule;
        # unbannable passwords are recorded and skipped
        sampled = np.flatnonzero(counts)
        by_freq = sampled[np.lexsort((sampled, -counts[sampled]))]
        unbannable: list[str] = []
        chosen_rule = None
        for idx in by_freq:
            available = sorted(index.rules_of(int(idx)) - active)
            if available:
                chosen_rule = pick_rule(available, counts, index, oracle)
                break
            unbannable.append(oracle.space.passwords[int(idx)])
        trace.append(
            TraceStep(active, oracle.space.passwords[star], p_hat, tuple(unbannable))
        )
        if chosen_rule is None:
            break  # no sampled password can still be banned
        active = active | {chosen_rule}
    if not trace:
        raise NoAllowedPassword("the empty negative policy could not be sampled")
    best = _argmin_trace(trace)
    return OptimizationResult(
        best_active=best.active,
        best_value=None,
        estimate=best.value,
        trace=tuple(trace),
        draws_used=oracle.draws,
    )


def negative_sample_random(
    oracle: SampleOracle,
    rules: tuple[Rule, ...],
    cfg: SamplingConfig,
    mode: Mode | str = Mode.NEGATIVE,
) -> OptimizationResult:
    """Negative-rule heuristic: ban via a uniformly random available rule."""
    if Mode(mode) is not Mode.NEGATIVE:
        raise InvalidMode("this heuristic requires negative rules")

    def pick(available, counts, index, orc):
        return available[int(orc.rng.integers(len(available)))]

    return _negative_sampler(oracle, rules, cfg, pick)


def negative_sample_ban_smallest(
    oracle: SampleOracle,
    rules: tuple[Rule, ...],
    cfg: SamplingConfig,
    mode: Mode | str = Mode.NEGATIVE,
) -> OptimizationResult:
    """Negative-rule heuristic: ban via the smallest available rule.

    Rule size is estimated from the current sample as the number of draws
    that landed inside the rule (its allowed-mass intersection); ties go to
    the lower rule id.
    """
    if Mode(mode) is not Mode.NEGATIVE:
        raise InvalidMode("this heuristic requires negative rules")

    def pick(available, counts, index, orc):
        sampled = np.flatnonzero(counts)
        sizes = []
        for rid in available:
            hits = sum(
                int(counts[i]) for i in sampled if rid in index.rules_of(int(i))
            )
            sizes.append((hits, rid))
        return min(sizes)[1]

    return _negative_sampler(oracle, rules, cfg, pick)


def sample_constant_k(
    oracle: SampleOracle,
    rules: tuple[Rule, ...],
    cfg: SamplingConfig,
    mode: Mode | str = Mode.POSITIVE,
) -> OptimizationResult:
    """Sampled guess-and-check for constant k, positive rules.

    Stage 1 samples each single-rule policy and keeps the passwords whose
    estimated probability exceeds eps/(2k); their union T is, with high
    probability, a superset of every password that can matter. Stage 2
    runs the guess-and-check elimination over guesses G subseteq T against
    frequency estimates from fresh per-policy samples, with a probability
    grid of multiples of eps/4 and comparisons padded by eps/4; the
    candidate with the smallest estimated p(k) wins.
    """
    if Mode(mode) is not Mode.POSITIVE:
        raise InvalidMode("constant-k sampling requires positive rules")
    if cfg.epsilon is None or cfg.delta is None:
        raise ValueError("sample_constant_k needs epsilon and delta")
    k = cfg.k
    if k > cfg.max_k:
        raise ValueError(f"k={k} beyond guard max_k={cfg.max_k}")
    eps = cfg.epsilon
    m = len(rules)
    s = cfg.per_iteration_samples(m)
    index = _RuleIndex(oracle.space, rules)
    n_pw = len(oracle.space.passwords)
    full = frozenset(r.id for r in rules)

    # stage 1: candidate reduced space
    threshold = eps / (2.0 * k)
    t_set: set[int] = set()
    for r in rules:
        policy = Policy.positive(rules, (r.id,))
        if not oracle.usable(policy):
            continue
        counts = _frequencies(oracle.draw_batch(policy, s), n_pw)
        t_set.update(np.flatnonzero(counts / s > threshold).tolist())

    estimates: dict[frozenset[int], np.ndarray | None] = {}

    def estimate(active: frozenset[int]) -> np.ndarray | None:
        got = estimates.get(active, False)
        if got is not False:
            return got
        policy = Policy.positive(rules, active)
        try:
            counts = _frequencies(oracle.draw_batch(policy, s), n_pw)
        except (NoAllowedPassword, ZeroMassPolicy):
            counts = None
        est = None if counts is None else counts / s
        estimates[active] = est
        return est

    if not t_set:
        freqs = estimate(full)
        est_val = None
        if freqs is not None:
            top = np.sort(freqs)[::-1][: min(k, n_pw)]
            est_val = float(top.sum())
        return OptimizationResult(
            best_active=full,
            best_value=None,
            estimate=est_val,
            draws_used=oracle.draws,
        )

    # stage 2: padded guess-and-check against sampled estimates
    pad = eps / 4.0
    grid = [j * eps / 4.0 for j in range(int(4.0 / eps) + 1)]
    if grid[-1] < 1.0:
        grid.append(1.0)
    candidates: dict[frozenset[int], float] = {}
    guess_size = min(k, len(t_set))
    for combo in itertools.combinations(sorted(t_set), guess_size):
        g_set = set(combo)
        for p in grid:
            state = full
            while True:
                freqs = estimate(state)
                if freqs is None:
                    state = None
                    break
                sampled = np.flatnonzero(freqs)
                violators = [i for i in sampled if i not in g_set and freqs[i] > p + pad]
                if not violators:
                    break
                victim = max(violators, key=lambda i: (freqs[i], -i))
                nxt = state - index.rules_of(int(victim))
                if not nxt:
                    state = None
                    break
                state = nxt
            if state is None or state in candidates:
                continue
            freqs = estimate(state)
            top = np.sort(freqs)[::-1][: min(k, n_pw)]
            candidates[state] = float(top.sum())
    if not candidates:
        freqs = estimate(full)
        est_val = None
        if freqs is not None:
            top = np.sort(freqs)[::-1][: min(k, n_pw)]
            est_val = float(top.sum())
        return OptimizationResult(
            best_active=full, best_value=None, estimate=est_val,
            draws_used=oracle.draws,
        )
    best_state = min(candidates, key=lambda st: (candidates[st], signature_mask(st)))
    return OptimizationResult(
        best_active=best_state,
        best_value=None,
        estimate=candidates[best_state],
        draws_used=oracle.draws,
    )
