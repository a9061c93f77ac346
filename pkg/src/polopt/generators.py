"""Structured test-instance generators with known ground truth.

- vertex-cover rankings: a graph plus threshold t becomes a singleton-rule
  ranking instance where some banned set achieves p(g+e-t-1, .) < 1 exactly
  when the graph has a vertex cover of size at most t;
- the two-sided impossibility distribution: a ranking sampler for which no
  single policy can be near-optimal for k=1 and k=L simultaneously;
- random small instances: oracle-equivalence test fodder.

Everything is deterministic given its seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import Mode, PasswordSpace, Policy, Rule, singleton_rules
from .errors import NoAllowedPassword
from .models import (
    FrequencyDistribution,
    NormalizationModel,
    PolicyModel,
    PreferenceList,
    RankingModel,
    RankingPopulation,
)

__all__ = [
    "VertexCoverInstance",
    "VertexCoverRankings",
    "gen_vertex_cover_rankings",
    "ImpossibilityParams",
    "ImpossibilityModel",
    "gen_impossibility_model",
    "gen_impossibility_sampler",
    "RandomInstance",
    "gen_random_instance",
]


# --- vertex cover reduction ----------------------------------------------------


@dataclass(frozen=True)
class VertexCoverInstance:
    """A simple undirected graph with a cover-size threshold t < g.

    Every vertex must be incident to at least one edge: a vertex word can
    only surface at the top of its own edges' lists, so the
    cover/achievability correspondence breaks down for isolated vertices
    (their words never enter the induced support).
    """

    g: int
    edges: tuple[tuple[int, int], ...]
    t: int

    def __post_init__(self):
        seen = set()
        touched = set()
        for u, v in self.edges:
            if u == v or not (0 <= u < self.g and 0 <= v < self.g):
                raise ValueError(f"bad edge ({u},{v})")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"duplicate edge ({u},{v})")
            seen.add(key)
            touched.update((u, v))
        if not self.edges:
            raise ValueError("need at least one edge (otherwise no users exist)")
        if touched != set(range(self.g)):
            raise ValueError("every vertex needs an incident edge")
        if not 0 <= self.t < self.g:
            raise ValueError("threshold must satisfy 0 <= t < g")

    @property
    def e(self) -> int:
        return len(self.edges)

    @property
    def k(self) -> int:
        return self.g + self.e - self.t - 1

    def has_cover(self) -> bool:
        """Exhaustively decide whether a vertex cover of size <= t exists."""
        import itertools

        for size in range(self.t + 1):
            for combo in itertools.combinations(range(self.g), size):
                chosen = set(combo)
                if all(u in chosen or v in chosen for u, v in self.edges):
                    return True
        return False


@dataclass(frozen=True)
class VertexCoverRankings:
    instance: VertexCoverInstance
    space: PasswordSpace
    rules: tuple[Rule, ...]
    population: RankingPopulation
    vertex_word: dict[int, str]
    edge_word: dict[tuple[int, int], str]

    def model(self) -> RankingModel:
        return RankingModel(self.space, self.population)


def gen_vertex_cover_rankings(inst: VertexCoverInstance, seed=0) -> VertexCoverRankings:
    """Build the 2e preference lists and singleton rules for a graph.

    Every edge (u,v) contributes two lists starting (w_u, w_uv, ...) and
    (w_v, w_uv, ...); from position 2 on both follow one shared seeded tail.
    The tail orders all vertex words before all edge words, so a list whose
    head and edge word are both banned falls through to a vertex word and
    never lifts another edge word to the top.
    """
    rng = np.random.default_rng(seed)
    vertex_word = {u: f"v{u}" for u in range(inst.g)}
    edge_word = {
        (min(u, v), max(u, v)): f"e{min(u, v)}_{max(u, v)}" for u, v in inst.edges
    }
    vwords = [vertex_word[u] for u in range(inst.g)]
    ewords = [edge_word[(min(u, v), max(u, v))] for u, v in inst.edges]
    space = PasswordSpace(tuple(vwords + ewords))
    tail = [vwords[i] for i in rng.permutation(inst.g)] + [
        ewords[i] for i in rng.permutation(inst.e)
    ]
    lists = []
    for u, v in inst.edges:
        ew = edge_word[(min(u, v), max(u, v))]
        for head in (vertex_word[u], vertex_word[v]):
            prefix = [head, ew]
            rest = [w for w in tail if w not in prefix]
            lists.append(prefix + rest)
    population = RankingPopulation.from_lists(lists)
    return VertexCoverRankings(
        instance=inst,
        space=space,
        rules=singleton_rules(space),
        population=population,
        vertex_word=vertex_word,
        edge_word=edge_word,
    )


# --- impossibility distribution -------------------------------------------------


@dataclass(frozen=True)
class ImpossibilityParams:
    """Parameters of the two-part ranking distribution.

    With probability q = 1/(2c) a user ranks the blocks W_1..W_r (each a
    fresh uniform permutation of t words) ahead of a permutation of the L
    words of X; otherwise the ranking is a uniform permutation of everything.
    Defaults follow the construction (t = L = ceil(log2 N),
    r = floor((N-L)/t)); t, L, r may be overridden independently, which is
    what makes desk-scale separations sharp.
    """

    c: float
    n_passwords: int
    t: int | None = None
    length_x: int | None = None
    r: int | None = None

    def __post_init__(self):
        if self.c <= 0.5:
            raise ValueError("c must exceed 1/2 so that q = 1/(2c) < 1")
        if self.n_passwords < 4:
            raise ValueError("need at least 4 passwords")

    @property
    def q(self) -> float:
        return 1.0 / (2.0 * self.c)

    def resolved(self) -> tuple[int, int, int]:
        """(t, L, r) after applying defaults."""
        log2n = max(1, math.ceil(math.log2(self.n_passwords)))
        t = self.t if self.t is not None else log2n
        length_x = self.length_x if self.length_x is not None else log2n
        r = (
            self.r
            if self.r is not None
            else (self.n_passwords - length_x) // t
        )
        if t < 1 or length_x < 1 or r < 1:
            raise ValueError(f"degenerate parameters (t={t}, L={length_x}, r={r})")
        return t, length_x, r


class ImpossibilityModel:
    """Ranking model for the impossibility distribution, with exact queries.

    Under any policy the induced pick distribution has a closed form: the
    block-ordered branch puts mass q uniformly on the allowed words of the
    first block that still has any (falling through to X), and the uniform
    branch spreads 1-q over the whole allowed set. ``sample_ranking`` draws
    whole rankings for tests that need the raw lists.
    """

    kind = "ranking"

    def __init__(self, params: ImpossibilityParams):
        self.params = params
        t, length_x, r = params.resolved()
        self.t, self.length_x, self.r = t, length_x, r
        blocks = []
        names: list[str] = []
        for i in range(r):
            block = tuple(f"w{i}_{j}" for j in range(t))
            blocks.append(block)
            names.extend(block)
        self.x_words = tuple(f"x{j}" for j in range(length_x))
        names.extend(self.x_words)
        self.blocks = tuple(blocks)
        self.space = PasswordSpace(tuple(names))
        self.w_words = tuple(w for b in blocks for w in b)

    def _allowed_structure(self, policy: Policy):
        allowed_blocks = [
            [self.space.order(w) for w in block if policy.allows(w)]
            for block in self.blocks
        ]
        allowed_x = [self.space.order(w) for w in self.x_words if policy.allows(w)]
        allowed_all = sorted(
            idx for block in allowed_blocks for idx in block
        ) + sorted(allowed_x)
        return allowed_blocks, allowed_x, sorted(allowed_all)

    def induced_items(self, policy: Policy):
        allowed_blocks, allowed_x, allowed_all = self._allowed_structure(policy)
        if not allowed_all:
            raise NoAllowedPassword("policy bans the whole space")
        q = self.params.q
        probs = {idx: (1.0 - q) / len(allowed_all) for idx in allowed_all}
        first = next((b for b in allowed_blocks if b), None)
        d1_targets = first if first is not None else allowed_x
        for idx in d1_targets:
            probs[idx] += q / len(d1_targets)
        idx_arr = np.array(sorted(probs), dtype=np.int64)
        return idx_arr, np.array([probs[i] for i in idx_arr])

    def induced_prob(self, policy: Policy, w: str) -> float:
        i = self.space.order(w)
        if not policy.allows(w):
            return 0.0
        idx, probs = self.induced_items(policy)
        pos = np.searchsorted(idx, i)
        return float(probs[pos]) if pos < len(idx) and idx[pos] == i else 0.0

    def p_k(self, policy: Policy, k: int) -> float:
        return float(self.p_k_exact(policy, k))

    def p_k_exact(self, policy: Policy, k: int) -> Fraction:
        if k < 1:
            raise ValueError("k must be >= 1")
        allowed_blocks, allowed_x, allowed_all = self._allowed_structure(policy)
        if not allowed_all:
            raise NoAllowedPassword("policy bans the whole space")
        q = Fraction(self.params.q)
        base = (1 - q) / len(allowed_all)
        probs = {idx: base for idx in allowed_all}
        first = next((b for b in allowed_blocks if b), None)
        d1_targets = first if first is not None else allowed_x
        for idx in d1_targets:
            probs[idx] += q / len(d1_targets)
        vals = sorted(probs.values(), reverse=True)
        return sum(vals[:k])

    def sample_ranking(self, rng: np.random.Generator) -> PreferenceList:
        if rng.random() <= self.params.q:
            order: list[str] = []
            for block in self.blocks:
                order.extend(block[i] for i in rng.permutation(len(block)))
            order.extend(self.x_words[i] for i in rng.permutation(len(self.x_words)))
        else:
            pw = self.space.passwords
            order = [pw[i] for i in rng.permutation(len(pw))]
        return PreferenceList(tuple(order))


def gen_impossibility_model(params: ImpossibilityParams) -> ImpossibilityModel:
    return ImpossibilityModel(params)


def gen_impossibility_sampler(params: ImpossibilityParams, seed=0):
    """A seeded sample oracle over the impossibility distribution."""
    from .sampling import SampleOracle

    return SampleOracle(ImpossibilityModel(params), seed)


# --- random instances -----------------------------------------------------------


@dataclass(frozen=True)
class RandomInstance:
    space: PasswordSpace
    rules: tuple[Rule, ...]
    model: PolicyModel
    kind: str
    seed: int

    def to_json(self) -> str:
        """Deterministic serialization (byte-identical for equal seeds)."""
        obj = {
            "kind": self.kind,
            "seed": self.seed,
            "passwords": list(self.space.passwords),
            "rules": [sorted(r.members) for r in self.rules],
        }
        if isinstance(self.model, RankingModel):
            obj["population"] = [
                {"weight": w, "list": list(prefs.passwords)}
                for prefs, w in self.model.population.entries
            ]
        else:
            obj["probs"] = {w: self.model.dist.probs[w] for w in self.space.passwords}
        return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def gen_random_instance(
    n_passwords: int, m: int, n_users: int, model_kind: str, seed: int
) -> RandomInstance:
    """Random explicit rules plus a random model, reproducible from the seed.

    Rules include each password independently with probability 1/2 and are
    redrawn until none is empty and their union covers the space, so the
    full positive policy is always usable. Rankings are uniform
    permutations; frequency distributions come from uniform spacings.
    """
    rng = np.random.default_rng(seed)
    space = PasswordSpace(tuple(f"pw{j:02d}" for j in range(n_passwords)))
    for _ in range(100_000):
        matrix = rng.integers(0, 2, size=(m, n_passwords)).astype(bool)
        if matrix.any(axis=1).all() and matrix.any(axis=0).all():
            break
    else:
        raise RuntimeError("could not draw a covering rule matrix")
    rules = tuple(
        Rule.explicit(i + 1, (space.passwords[j] for j in np.flatnonzero(matrix[i])))
        for i in range(m)
    )
    if model_kind == "ranking":
        lists = [
            [space.passwords[j] for j in rng.permutation(n_passwords)]
            for _ in range(n_users)
        ]
        model: PolicyModel = RankingModel(space, RankingPopulation.from_lists(lists))
    elif model_kind == "normalization":
        cuts = np.sort(rng.random(n_passwords - 1))
        gaps = np.diff(np.concatenate([[0.0], cuts, [1.0]]))
        gaps = gaps / gaps.sum()
        dist = FrequencyDistribution(
            {w: float(p) for w, p in zip(space.passwords, gaps)}
        )
        model = NormalizationModel(dist, space)
    else:
        raise ValueError(f"unknown model kind {model_kind!r}")
    return RandomInstance(space=space, rules=rules, model=model, kind=model_kind, seed=seed)
