"""Random factor graphs: null, planted, Poissonized, HSBM, conditioned and resampled."""
from __future__ import annotations

import itertools
from math import comb

import numpy as np

from .model import FactorGraph, HsbmSpec, ModelSpec, is_simple
from .rng import as_generator

REJECTION_BUDGET = 10**5


class RejectionBudgetExceeded(RuntimeError):
    pass


def sample_labels(pi, n, rng):
    return rng.choice(len(pi), size=n, p=pi).astype(np.int64)


def sample_null(spec: ModelSpec, n, m, seed=None) -> FactorGraph:
    """m clauses with neighbourhoods uniform on V^k and weights drawn from p."""
    rng = as_generator(seed)
    vars_ = rng.integers(0, n, size=(m, spec.k), dtype=np.int64)
    wids = _draw_wids(spec, m, rng)
    return FactorGraph(n, vars_, wids)


def _draw_wids(spec, m, rng):
    ids = np.array([p.id for p in spec.weights.psis], dtype=np.int64)
    return ids[rng.choice(len(ids), size=m, p=spec.weights.probs)]


def _members_by_class(sigma, q):
    order = np.argsort(sigma, kind="stable")
    counts = np.bincount(sigma, minlength=q)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    return order, counts, starts


def sample_planted_given(spec: ModelSpec, sigma, m, seed=None) -> FactorGraph:
    """m clauses drawn i.i.d. with probability proportional to p(psi) psi(sigma_tuple).

    The pair (psi, colour pattern) is drawn from its exact marginal
    p(psi) psi(c) prod_s |{v: sigma_v = c_s}|, then each coordinate is a
    uniform member of its colour class.
    """
    rng = as_generator(seed)
    sigma = np.asarray(sigma, dtype=np.int64)
    n, k, q = len(sigma), spec.k, spec.q
    order, counts, starts = _members_by_class(sigma, q)
    tables = spec.weights.stacked()
    w = tables * spec.weights.probs.reshape((-1,) + (1,) * k)
    for axis in range(k):
        shape = [1] * (k + 1)
        shape[axis + 1] = q
        w = w * counts.reshape(shape)
    flat = w.ravel()
    idx = rng.choice(flat.size, size=m, p=flat / flat.sum())
    unravel = np.unravel_index(idx, w.shape)
    ids = np.array([p.id for p in spec.weights.psis], dtype=np.int64)
    vars_ = np.empty((m, k), dtype=np.int64)
    for s in range(k):
        c = unravel[s + 1]
        offset = np.floor(rng.random(m) * counts[c]).astype(np.int64)
        vars_[:, s] = order[starts[c] + offset]
    return FactorGraph(n, vars_, ids[unravel[0]])


def sample_planted(spec: ModelSpec, n, m, seed=None):
    """Draw sigma* i.i.d. from pi and then m planted clauses. Returns (sigma, graph)."""
    rng = as_generator(seed)
    sigma = sample_labels(spec.pi, n, rng)
    return sigma, sample_planted_given(spec, sigma, m, rng)


def sample_poisson_model(spec: ModelSpec, n, seed=None, planted=True):
    """Clause count m ~ Poisson(d n / k); planted or null clauses.

    Returns (sigma, graph); for the null model sigma is an independent
    pi-i.i.d. assignment so both branches share one signature.
    """
    rng = as_generator(seed)
    m = int(rng.poisson(spec.d * n / spec.k))
    if planted:
        return sample_planted(spec, n, m, rng)
    sigma = sample_labels(spec.pi, n, rng)
    return sigma, sample_null(spec, n, m, rng)


def condition_simple(spec: ModelSpec, n, seed=None, planted=True, budget=REJECTION_BUDGET):
    """Rejection-sample the Poissonized model until no clause repeats a variable
    and no two clauses share a variable set. Returns (sigma, graph, attempts)."""
    rng = as_generator(seed)
    for attempt in range(1, budget + 1):
        sigma, g = sample_poisson_model(spec, n, rng, planted=planted)
        if is_simple(g):
            return sigma, g.mark_simple(), attempt
    raise RejectionBudgetExceeded(f"no simple graph after {budget} attempts")


def gamma_resample(g: FactorGraph, spec: ModelSpec, gamma, seed=None, return_mask=False):
    """Replace each clause, independently with probability gamma, by a fresh null clause."""
    if not 0 <= gamma <= 1:
        raise ValueError("gamma must lie in [0, 1]")
    rng = as_generator(seed)
    mask = rng.random(g.m) < gamma
    r = int(mask.sum())
    vars_ = np.array(g.vars)
    wids = np.array(g.wids)
    if r:
        fresh = sample_null(spec, g.n, r, rng)
        vars_[mask] = fresh.vars
        wids[mask] = fresh.wids
    out = FactorGraph(g.n, vars_, wids)
    return (out, mask) if return_mask else out


# ---------------------------------------------------------------- edge-inclusion models

def _uniform_distinct_sets(pools, mults, count, rng):
    """count distinct vertex sets, uniform among sets made of mults[i] distinct
    vertices from pools[i]; returned as rows sorted within the row."""
    k = sum(mults)
    if count == 0:
        return np.zeros((0, k), np.int64)
    total = 1
    for pool, r in zip(pools, mults):
        total *= comb(len(pool), r)
    if total <= 4 * count + 1000:
        # Small universe: enumerate it and choose without replacement.
        parts = [list(itertools.combinations(pool, r)) for pool, r in zip(pools, mults)]
        universe = np.array([sum(combo, ()) for combo in itertools.product(*parts)],
                            dtype=np.int64).reshape(-1, k)
        pick = rng.choice(len(universe), size=count, replace=False)
        return np.sort(universe[pick], axis=1)
    rows = np.zeros((0, k), np.int64)
    while True:
        batch = int(1.2 * (count - len(rows))) + 16
        cols = []
        for pool, r in zip(pools, mults):
            for _ in range(r):
                cols.append(pool[rng.integers(0, len(pool), size=batch)])
        cand = np.sort(np.stack(cols, axis=1), axis=1)
        ok = np.all(cand[:, 1:] != cand[:, :-1], axis=1) if k > 1 else np.ones(batch, bool)
        rows = np.concatenate([rows, cand[ok]])
        # Keep first occurrences in draw order: equivalent to sequential
        # rejection of repeats, i.e. uniform sampling without replacement.
        _, first = np.unique(rows, axis=0, return_index=True)
        rows = rows[np.sort(first)]
        if len(rows) >= count:
            return rows[:count]


def _edge_inclusion_graph(n, k, sigma, q, prob_of_pattern, rng):
    order, counts, starts = _members_by_class(sigma, q)
    pools = [order[starts[c]:starts[c] + counts[c]] for c in range(q)]
    blocks = []
    for pattern in itertools.combinations_with_replacement(range(q), k):
        classes, mults = np.unique(pattern, return_counts=True)
        avail = 1
        for c, r in zip(classes, mults):
            avail *= comb(int(counts[c]), int(r))
        if avail == 0:
            continue
        p = prob_of_pattern(pattern)
        if p > 1:
            raise ValueError(f"hyperedge probability {p} exceeds 1")
        count = int(rng.binomial(avail, p))
        blocks.append(_uniform_distinct_sets([pools[c] for c in classes],
                                             [int(r) for r in mults], count, rng))
    vars_ = np.concatenate(blocks) if blocks else np.zeros((0, k), np.int64)
    vars_ = vars_[np.lexsort(vars_.T[::-1])] if len(vars_) else vars_
    return FactorGraph(n, vars_, np.zeros(len(vars_), np.int64), simple=True)


def sample_hsbm(h: HsbmSpec, n, seed=None, sigma=None):
    """Each distinct k-set is a hyperedge independently with probability
    M(sigma_set) / C(n, k-1). Returns (sigma, simple graph)."""
    rng = as_generator(seed)
    if sigma is None:
        sigma = sample_labels(h.pi, n, rng)
    norm = comb(n, h.k - 1)
    if h.d * h.m0.max() / norm > 1:
        raise ValueError("d * max(M0) / C(n, k-1) exceeds 1")
    m = h.m
    g = _edge_inclusion_graph(n, h.k, sigma, h.q, lambda pat: m[pat] / norm, rng)
    return sigma, g


def sample_er_hypergraph(n, d, k, seed=None):
    """Each distinct k-set is a hyperedge independently with probability d / C(n, k-1)."""
    rng = as_generator(seed)
    p = d / comb(n, k - 1)
    if p > 1:
        raise ValueError("edge probability exceeds 1")
    return _edge_inclusion_graph(n, k, np.zeros(n, np.int64), 1, lambda pat: p, rng)
