"""Dataset ingestion, baselines, and the multi-run sampling protocol.

The protocol: for each sample size s and each seeded run, hand the chosen
algorithm a fresh oracle over the dataset distribution, take the policy it
returns, and score that policy's true p(1, .) against the full dataset
(never against the sample). Aggregates per (algorithm, s): mean, min, and
the fraction of runs whose allowed set equals the optimal policy's.

Reports are deterministic byte-for-byte given the plan (no timestamps).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import policyscan
from .core import Mode, Policy, Rule
from .errors import TooManyRules
from .exact import OptimizationResult, brute_force_optimal, iterative_elimination, _rebit
from .models import FrequencyDistribution, NormalizationModel, load_withcount
from .rules import Complement
from .sampling import (
    SampleOracle,
    SamplingConfig,
    negative_sample_ban_smallest,
    negative_sample_random,
    sample_and_eliminate,
    sample_constant_k,
)

__all__ = [
    "ingest_dataset",
    "complement_rules",
    "SignatureIndex",
    "compute_baselines",
    "ExperimentPlan",
    "run_experiment",
    "report_to_json",
    "report_to_csv",
    "ALGORITHMS",
]

ALGORITHMS: dict[str, tuple[Callable, Mode]] = {
    "sample-elim": (sample_and_eliminate, Mode.POSITIVE),
    "sample-k": (sample_constant_k, Mode.POSITIVE),
    "neg-random": (negative_sample_random, Mode.NEGATIVE),
    "neg-smallest": (negative_sample_ban_smallest, Mode.NEGATIVE),
}


def ingest_dataset(path: str) -> FrequencyDistribution:
    """Load a withcount file into a normalized distribution.

    Duplicate passwords are merged by summing counts; the result keeps the
    exact counts plus ``total_count``/``distinct_count`` for reporting.
    """
    return load_withcount(path)


def complement_rules(rules: tuple[Rule, ...], space=None) -> tuple[Rule, ...]:
    """The logical complements of a rule list (positive <-> negative forms)."""
    out = []
    for r in rules:
        label = f"not ({r.label})" if r.label else ""
        if r.predicate is not None:
            inner = r.predicate
            if isinstance(inner, Complement):
                out.append(Rule.from_predicate(r.id, inner.of, label=label))
            else:
                out.append(Rule.from_predicate(r.id, Complement(inner), label=label))
        else:
            if space is None:
                raise ValueError("explicit rules need the space to complement")
            members = frozenset(space.passwords) - r.members
            out.append(Rule.explicit(r.id, members, label=label))
    return tuple(out)


class SignatureIndex:
    """Signature-collapsed view of (distribution, rules) for fast policy math.

    Groups passwords by rule-membership bitmask so that p(1, A_S), allowed
    mass, and allowed-set identity are O(#signatures) per policy, and the
    whole 2^m lattice is enumerable for Table-style baselines.
    """

    def __init__(self, model: NormalizationModel, rules: tuple[Rule, ...]):
        self.model = model
        self.rules = rules
        self.ids = [r.id for r in rules]
        self.m = len(rules)
        self.pw_sigs = policyscan.password_signatures(
            model.space.passwords, _rebit(rules)
        )
        probs = model._probs
        self.sig_u, self.mass, topk, self.support = policyscan.signature_groups(
            self.pw_sigs, probs, 1
        )
        self.maxprob = topk[:, 0]
        self.total = float(self.mass.sum())
        # group index per password, for fast allowed masks over the space
        self.group_of_pw = np.searchsorted(self.sig_u, self.pw_sigs)

    def mask_of(self, active) -> int:
        bit = {rid: i for i, rid in enumerate(self.ids)}
        mask = 0
        for rid in active:
            mask |= 1 << bit[rid]
        return mask

    def allowed_groups(self, active, mode: Mode) -> np.ndarray:
        mask = self.mask_of(active)
        inter = (self.sig_u & mask) != 0
        return inter if Mode(mode) is Mode.POSITIVE else ~inter

    def allowed_key(self, active, mode: Mode) -> bytes:
        """Canonical identity of the allowed set (signature coverage)."""
        return self.allowed_groups(active, mode).tobytes()

    def p1_of(self, active, mode: Mode) -> float:
        ag = self.allowed_groups(active, mode)
        mass = float(self.mass[ag].sum())
        if mass <= 0:
            return float("inf")
        return float(self.maxprob[ag].max()) / mass

    def p1_lattice(self, mode: Mode) -> np.ndarray:
        if self.m > 25:
            raise TooManyRules(f"{self.m} rules exceed the 2^m guard (25)")
        return policyscan.p1_values_all_policies(
            self.sig_u, self.mass, self.maxprob, self.m, Mode(mode)
        )

    def active_from_mask(self, mask: int) -> frozenset[int]:
        return frozenset(self.ids[b] for b in range(self.m) if mask >> b & 1)


class IndexedNormalizationModel(NormalizationModel):
    """NormalizationModel whose allowed-set test runs off signatures."""

    def __init__(self, dist: FrequencyDistribution, rules: tuple[Rule, ...]):
        super().__init__(dist)
        self.index = SignatureIndex(self, rules)

    def allowed_indices(self, policy: Policy) -> np.ndarray:
        idx = self.index
        ag = idx.allowed_groups(policy.active, policy.mode)
        return np.flatnonzero(ag[idx.group_of_pw])


def render_witness(active, rules: tuple[Rule, ...], mode: Mode,
                   positive_labels: dict[int, str] | None = None) -> str:
    """Human-readable rule combination, Table-style.

    Positive policies render as OR over active rules; negative policies as
    the intersection of the complements (AND over positive forms when
    available).
    """
    if not active:
        return "(no active rules)" if Mode(mode) is Mode.NEGATIVE else "(empty policy)"
    labels = {r.id: r.describe() for r in rules}
    parts = [
        positive_labels.get(rid, labels[rid]) if positive_labels else labels[rid]
        for rid in sorted(active)
    ]
    joiner = " OR " if Mode(mode) is Mode.POSITIVE else " AND "
    return joiner.join(parts)


def compute_baselines(
    model: NormalizationModel,
    positive_rules: tuple[Rule, ...],
    positive_labels: dict[int, str] | None = None,
) -> dict:
    """Reference rows for a dataset: no-policy, means, best single rule,
    and brute-force optima for positive rules and their negative
    complements.
    """
    m = len(positive_rules)
    if m > 25:
        raise TooManyRules(f"{m} rules exceed the 2^m baseline guard (25)")
    idx = SignatureIndex(model, positive_rules)
    if positive_labels is None:
        positive_labels = {r.id: r.describe() for r in positive_rules}

    pos_vals = idx.p1_lattice(Mode.POSITIVE)
    # negative complements: a password's complement-signature is the bit flip
    full = (1 << m) - 1
    neg_sigs = np.bitwise_xor(idx.sig_u, full)
    neg_vals = policyscan.p1_values_all_policies(
        neg_sigs, idx.mass, idx.maxprob, m, Mode.NEGATIVE
    )

    def summarize(values: np.ndarray, mode: Mode) -> dict:
        finite = np.isfinite(values)
        best_mask = int(np.argmin(values))
        active = idx.active_from_mask(best_mask)
        return {
            "mean_p1": float(values[finite].mean()),
            "optimal_p1": float(values[best_mask]),
            "optimal_active": sorted(active),
            "optimal_witness": render_witness(active, positive_rules, mode, positive_labels),
        }

    singles = [(float(pos_vals[1 << b]), idx.ids[b]) for b in range(m)]
    best_single = min(singles)
    return {
        "no_policy_p1": float(idx.maxprob.max() / idx.total),
        "positive": summarize(pos_vals, Mode.POSITIVE),
        "negative": summarize(neg_vals, Mode.NEGATIVE),
        "best_single_positive": {
            "p1": best_single[0],
            "rule": best_single[1],
            "witness": positive_labels.get(best_single[1], str(best_single[1])),
        },
    }


@dataclass(frozen=True)
class ExperimentPlan:
    """What to run: dataset, mode, rules, algorithms, sizes, seeds.

    ``sample_sizes`` are per-iteration sample counts handed to the
    algorithms verbatim (the derived-from-epsilon size only applies when a
    size is not given). With ``epsilon`` unset the samplers never take the
    early exit, matching the fixed-s protocol.
    """

    mode: Mode
    algorithms: tuple[str, ...]
    sample_sizes: tuple[int, ...]
    runs_per_size: int
    seed: int
    k: int = 1
    epsilon: float | None = None
    delta: float | None = None
    dataset: str | None = None
    rules_file: str | None = None
    workers: int = 1

    def __post_init__(self):
        if not self.sample_sizes or list(self.sample_sizes) != sorted(self.sample_sizes):
            raise ValueError("sample_sizes must be nonempty and ascending")
        if self.runs_per_size < 1:
            raise ValueError("runs_per_size must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        for name in self.algorithms:
            if name not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {name!r}")
            if ALGORITHMS[name][1] is not Mode(self.mode):
                raise ValueError(f"algorithm {name!r} does not run in {self.mode} mode")

    @classmethod
    def from_json(cls, path: str) -> "ExperimentPlan":
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        return cls(
            mode=Mode(obj["mode"]),
            algorithms=tuple(obj["algorithms"]),
            sample_sizes=tuple(int(s) for s in obj["sample_sizes"]),
            runs_per_size=int(obj["runs_per_size"]),
            seed=int(obj["seed"]),
            k=int(obj.get("k", 1)),
            epsilon=obj.get("epsilon"),
            delta=obj.get("delta"),
            dataset=obj.get("dataset"),
            rules_file=obj.get("rules"),
            workers=int(obj.get("workers", 1)),
        )


def _optimal_reference(index: SignatureIndex, model, rules, mode: Mode):
    """The optimum %-optimal compares against: iterative elimination for
    positive rules, brute force for negative rules."""
    if Mode(mode) is Mode.POSITIVE:
        result = iterative_elimination(model, rules)
        active = result.best_active
        value = result.best_value
    else:
        vals = index.p1_lattice(Mode.NEGATIVE)
        mask = int(np.argmin(vals))
        active = index.active_from_mask(mask)
        value = float(vals[mask])
    return active, value, index.allowed_key(active, mode)


def run_experiment(
    plan: ExperimentPlan,
    model: NormalizationModel | None = None,
    rules: tuple[Rule, ...] | None = None,
) -> dict:
    """Execute the plan and return the report object.

    Per-run seeds derive from (plan.seed, algorithm index, sample size,
    run index) through numpy's SeedSequence, so any cell is reproducible in
    isolation and reports are byte-identical across invocations. On
    KeyboardInterrupt the partial report is returned with partial=True.
    """
    if rules is None:
        if plan.rules_file is None:
            raise ValueError("rules are required (plan.rules_file or rules=)")
        from .rules import load_rule_config

        rules_mode, rules = load_rule_config(plan.rules_file)
        if Mode(rules_mode) is not Mode(plan.mode):
            raise ValueError("rules file mode differs from the plan mode")
    if model is None:
        if plan.dataset is None:
            raise ValueError("plan has no dataset and no model was passed")
        dist = ingest_dataset(plan.dataset)
        model = IndexedNormalizationModel(dist, rules)
    index = (
        model.index
        if isinstance(model, IndexedNormalizationModel) and model.index.rules == rules
        else SignatureIndex(model, rules)
    )
    opt_active, opt_value, opt_key = _optimal_reference(index, model, rules, plan.mode)

    shared_cache: dict = {}

    def one_run(name, algo_i, size, run):
        fn, mode = ALGORITHMS[name]
        entropy = [plan.seed, algo_i, size, run]
        oracle = SampleOracle(
            model, np.random.SeedSequence(entropy), dist_cache=shared_cache
        )
        cfg = SamplingConfig(
            epsilon=plan.epsilon, delta=plan.delta, k=plan.k, sample_size=size
        )
        result: OptimizationResult = fn(oracle, rules, cfg)
        active = result.best_active
        return {
            "run": run,
            "seed_entropy": entropy,
            "active": sorted(active),
            "p1": index.p1_of(active, mode),
            "estimate": result.estimate,
            "draws": result.draws_used,
            "optimal": index.allowed_key(active, mode) == opt_key,
        }

    cells = []
    interrupted = False
    try:
        for algo_i, name in enumerate(plan.algorithms):
            for size in plan.sample_sizes:
                run_ids = range(plan.runs_per_size)
                if plan.workers > 1:
                    # runs are independent; results keyed by run index, so
                    # the report does not depend on completion order
                    from concurrent.futures import ThreadPoolExecutor

                    with ThreadPoolExecutor(max_workers=plan.workers) as pool:
                        runs = list(
                            pool.map(lambda r: one_run(name, algo_i, size, r), run_ids)
                        )
                else:
                    runs = [one_run(name, algo_i, size, r) for r in run_ids]
                values = [r["p1"] for r in runs]
                cells.append(
                    {
                        "algorithm": name,
                        "sample_size": size,
                        "mean_p1": float(np.mean(values)),
                        "min_p1": float(np.min(values)),
                        "pct_optimal": 100.0 * sum(r["optimal"] for r in runs) / len(runs),
                        "runs": runs,
                    }
                )
    except KeyboardInterrupt:
        interrupted = True
    report = {
        "schema": 1,
        "plan": {
            "mode": Mode(plan.mode).value,
            "algorithms": list(plan.algorithms),
            "sample_sizes": list(plan.sample_sizes),
            "runs_per_size": plan.runs_per_size,
            "seed": plan.seed,
            "k": plan.k,
            "epsilon": plan.epsilon,
            "delta": plan.delta,
            "dataset": plan.dataset,
        },
        "optimal": {
            "active": sorted(opt_active),
            "p1": opt_value,
            "witness": render_witness(opt_active, rules, plan.mode),
        },
        "cells": cells,
        "partial": interrupted,
    }
    return report


def report_to_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def report_to_csv(report: dict) -> str:
    lines = ["algorithm,sample_size,mean_p1,min_p1,pct_optimal"]
    for cell in report["cells"]:
        lines.append(
            f'{cell["algorithm"]},{cell["sample_size"]},'
            f'{cell["mean_p1"]!r},{cell["min_p1"]!r},{cell["pct_optimal"]!r}'
        )
    return "\n".join(lines) + "\n"
