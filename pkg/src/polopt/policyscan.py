"""Vectorized evaluation of p(k, A_S) over the whole policy lattice.

Passwords are collapsed to rule-membership signatures (bitmask of the rules
containing the password, rule id i on bit i-1) and every S subseteq [m] is
evaluated at once. Two regimes:

- k = 1: O(m 2^m) via subset-sum/subset-max transforms over signature
  aggregates, which is what makes 21-rule datasets enumerable;
- general k: chunked dense evaluation over (policy, signature) tables.

Invalid policies (empty or zero-mass allowed set, or a population list with
no allowed password) get value +inf.
"""

from __future__ import annotations

import numpy as np

from .core import Mode, Rule

__all__ = [
    "password_signatures",
    "signature_groups",
    "subset_sum_transform",
    "subset_max_transform",
    "p1_values_all_policies",
    "normalization_values_chunked",
    "ranking_values_chunked",
]


def password_signatures(passwords, rules: tuple[Rule, ...]) -> np.ndarray:
    """int64 membership bitmask per password (rule id i -> bit i-1)."""
    sigs = np.zeros(len(passwords), dtype=np.int64)
    for r in rules:
        bit = np.int64(1) << np.int64(r.id - 1)
        if r.members is not None:
            hits = np.fromiter((w in r.members for w in passwords), dtype=bool, count=len(passwords))
        else:
            hits = np.fromiter((r.predicate.matches(w) for w in passwords), dtype=bool, count=len(passwords))
        sigs[hits] |= bit
    return sigs


def signature_groups(sigs: np.ndarray, probs: np.ndarray, k: int):
    """Aggregate per-signature data: mass, top-k probs (desc), support count.

    Returns (unique_sigs, mass[G], topk[G, k], support[G]).
    """
    order = np.argsort(sigs, kind="stable")
    ss, ps = sigs[order], probs[order]
    uniq, starts = np.unique(ss, return_index=True)
    bounds = np.append(starts, len(ss))
    g = len(uniq)
    mass = np.zeros(g)
    support = np.zeros(g, dtype=np.int64)
    topk = np.zeros((g, k))
    for i in range(g):
        chunk = ps[bounds[i]:bounds[i + 1]]
        mass[i] = chunk.sum()
        support[i] = int((chunk > 0).sum())
        top = np.sort(chunk)[::-1][:k]
        topk[i, : len(top)] = top
    return uniq, mass, topk, support


def subset_sum_transform(values: np.ndarray, m: int) -> np.ndarray:
    """Z[X] = sum of values[g] over g subseteq X (in-place butterfly)."""
    out = values.copy()
    for b in range(m):
        view = out.reshape(-1, 2, 1 << b)
        view[:, 1, :] += view[:, 0, :]
    return out


def subset_max_transform(values: np.ndarray, m: int) -> np.ndarray:
    """M[X] = max of values[g] over g subseteq X."""
    out = values.copy()
    for b in range(m):
        view = out.reshape(-1, 2, 1 << b)
        np.maximum(view[:, 1, :], view[:, 0, :], out=view[:, 1, :])
    return out


def _scatter_by_signature(sigs, mass, maxprob, m):
    size = 1 << m
    mass_by = np.zeros(size)
    max_by = np.zeros(size)
    np.add.at(mass_by, sigs, mass)
    np.maximum.at(max_by, sigs, maxprob)
    return mass_by, max_by


def p1_values_all_policies(
    sigs: np.ndarray, mass: np.ndarray, maxprob: np.ndarray, m: int, mode: Mode
) -> np.ndarray:
    """p(1, A_S) for every mask S in [0, 2^m), +inf where unusable.

    ``sigs``/``mass``/``maxprob`` are per-signature aggregates (normalization
    model): total probability and largest single probability per signature.
    """
    mode = Mode(mode)
    size = 1 << m
    mass_by, max_by = _scatter_by_signature(sigs, mass, maxprob, m)
    full = size - 1
    flip = np.arange(size, dtype=np.int64) ^ full  # complement index: ~S
    z = subset_sum_transform(mass_by, m)
    if mode is Mode.POSITIVE:
        total = mass_by.sum()
        masses = total - z[flip]
        # max prob among signatures intersecting S: per-bit maxima folded in
        numer = np.zeros(size)
        for b in range(m):
            hit = (sigs >> b) & 1 == 1
            best = maxprob[hit].max() if hit.any() else 0.0
            view = numer.reshape(-1, 2, 1 << b)
            np.maximum(view[:, 1, :], best, out=view[:, 1, :])
    else:
        # negative / singleton: allowed signatures are subsets of ~S
        mz = subset_max_transform(max_by, m)
        masses = z[flip]
        numer = mz[flip]
    values = np.full(size, np.inf)
    ok = masses > 0
    values[ok] = numer[ok] / masses[ok]
    if mode is Mode.POSITIVE:
        values[0] = np.inf  # empty positive policy allows nothing
    return values


def normalization_values_chunked(
    sigs: np.ndarray,
    mass: np.ndarray,
    topk: np.ndarray,
    support: np.ndarray,
    m: int,
    k: int,
    mode: Mode,
    chunk_budget: int = 4_000_000,
) -> np.ndarray:
    """p(k, A_S) for every mask (normalization model), dense over signatures."""
    mode = Mode(mode)
    size = 1 << m
    g = len(sigs)
    values = np.full(size, np.inf)
    chunk = max(1, chunk_budget // max(1, g * k))
    masks = np.arange(size, dtype=np.int64)
    for start in range(0, size, chunk):
        sl = masks[start : start + chunk]
        inter = (sl[:, None] & sigs[None, :]) != 0
        allowed = inter if mode is Mode.POSITIVE else ~inter
        masses = allowed @ mass
        supports = allowed @ support
        cand = np.where(allowed[:, :, None], topk[None, :, :], 0.0).reshape(len(sl), -1)
        kk = min(k, cand.shape[1])
        part = np.partition(cand, cand.shape[1] - kk, axis=1)[:, cand.shape[1] - kk :]
        numer = part.sum(axis=1)
        vals = np.full(len(sl), np.inf)
        ok = masses > 0
        vals[ok] = numer[ok] / masses[ok]
        vals[ok & (supports <= k)] = 1.0
        values[start : start + chunk] = vals
    if mode is Mode.POSITIVE:
        values[0] = np.inf
    return values


def ranking_values_chunked(
    pw_sigs: np.ndarray,
    lists_idx: np.ndarray,
    weights: np.ndarray,
    n: int,
    m: int,
    k: int,
    mode: Mode,
    chunk_budget: int = 4_000_000,
) -> tuple[np.ndarray, np.ndarray]:
    """p(k, A_S) for every mask (ranking model).

    ``lists_idx`` is an (L, maxlen) int64 matrix of password indices padded
    with -1. Returns (values, topk_weight) where topk_weight holds the exact
    integer numerator (sum of the k largest pick-weights) and values =
    topk_weight / n with +inf where the policy is unusable (some list has no
    allowed password, or the empty positive policy).
    """
    mode = Mode(mode)
    size = 1 << m
    n_pw = len(pw_sigs)
    n_lists, maxlen = lists_idx.shape
    values = np.full(size, np.inf)
    top_out = np.zeros(size, dtype=np.int64)
    lists_pad = np.where(lists_idx < 0, n_pw, lists_idx)
    chunk = max(1, chunk_budget // max(1, n_lists * maxlen))
    masks = np.arange(size, dtype=np.int64)
    for start in range(0, size, chunk):
        sl = masks[start : start + chunk]
        inter = (sl[:, None] & pw_sigs[None, :]) != 0
        allowed = inter if mode is Mode.POSITIVE else ~inter
        allowed_pad = np.concatenate([allowed, np.zeros((len(sl), 1), dtype=bool)], axis=1)
        along = allowed_pad[:, lists_pad]  # (chunk, L, maxlen)
        has = along.any(axis=2)
        first = np.argmax(along, axis=2)
        chosen = lists_pad[np.arange(n_lists)[None, :], first]
        counts = np.zeros((len(sl), n_pw + 1), dtype=np.int64)
        rows = np.repeat(np.arange(len(sl)), n_lists)
        np.add.at(counts, (rows, chosen.ravel()), np.tile(weights, len(sl)))
        counts = counts[:, :n_pw]
        kk = min(k, n_pw)
        part = np.partition(counts, n_pw - kk, axis=1)[:, n_pw - kk :]
        numer = part.sum(axis=1)
        valid = has.all(axis=1)
        vals = np.full(len(sl), np.inf)
        vals[valid] = numer[valid] / n
        values[start : start + chunk] = vals
        top_out[start : start + chunk] = np.where(valid, numer, 0)
    if mode is Mode.POSITIVE:
        values[0] = np.inf
        top_out[0] = 0
    return values, top_out
