"""Cycle census: hypergraph l-cycles X_l and signed factor-graph cycles X_zeta.

Hypergraph cycles are classes of (distinct vertices v_1..v_l, distinct
hyperedges a_1..a_l) with {v_i, v_{i+1}} in a_i, up to rotation and
reflection. The counter walks from each vertex through larger-indexed
vertices only, so every class is met exactly twice (once per direction).

Signed cycles record, for each step, the weight id of the clause and the
slots (s, t) through which the walk enters and leaves it. A cycle is
written starting at its smallest vertex; of the two traversal directions
the one whose first clause has the smaller index than its last clause is
kept. At order 1 (a clause repeating a variable) both slot orders count.
"""
from __future__ import annotations

from collections import defaultdict

import numpy as np
from numba import njit

from .model import FactorGraph, ModelSpec, as_factor_spec
from .spectral import compute_phi, first_cycle_length


class NonSimpleGraph(ValueError):
    pass


def incidence(g: FactorGraph):
    """CSR incidence: for vertex v, clauses inc_clause[ptr[v]:ptr[v+1]] (one entry per slot)."""
    m, k = g.vars.shape if g.m else (0, 0)
    flat_v = g.vars.ravel()
    flat_c = np.repeat(np.arange(m, dtype=np.int64), k)
    order = np.argsort(flat_v, kind="stable")
    ptr = np.zeros(g.n + 1, dtype=np.int64)
    np.add.at(ptr, flat_v + 1, 1)
    return np.cumsum(ptr), flat_c[order], np.tile(np.arange(k, dtype=np.int64), m)[order]


@njit(cache=True)
def _hyper_cycle_kernel(n, clause_vars, ptr, inc_clause, kmax):
    m, k = clause_vars.shape
    counts = np.zeros(kmax + 1, np.int64)
    visited = np.zeros(n, np.bool_)
    used = np.zeros(max(m, 1), np.bool_)
    path_v = np.empty(kmax + 1, np.int64)
    path_e = np.empty(kmax + 1, np.int64)
    it_inc = np.empty(kmax + 1, np.int64)
    it_slot = np.empty(kmax + 1, np.int64)
    for s in range(n):
        depth = 0
        path_v[0] = s
        visited[s] = True
        it_inc[0] = ptr[s]
        it_slot[0] = 0
        while depth >= 0:
            u = path_v[depth]
            pushed = False
            while it_inc[depth] < ptr[u + 1]:
                a = inc_clause[it_inc[depth]]
                if used[a] or it_slot[depth] >= k:
                    it_inc[depth] += 1
                    it_slot[depth] = 0
                    continue
                w = clause_vars[a, it_slot[depth]]
                it_slot[depth] += 1
                if w == u:
                    continue
                if w == s:
                    if depth + 1 >= 2:
                        counts[depth + 1] += 1
                    continue
                if w < s or visited[w] or depth + 1 >= kmax:
                    continue
                used[a] = True
                path_e[depth] = a
                depth += 1
                path_v[depth] = w
                visited[w] = True
                it_inc[depth] = ptr[w]
                it_slot[depth] = 0
                pushed = True
                break
            if not pushed:
                visited[u] = False
                depth -= 1
                if depth >= 0:
                    used[path_e[depth]] = False
    return counts


def count_hyper_cycles(g: FactorGraph, kmax, start=None):
    """X_l(G) for l = start..kmax on a simple graph; start defaults to 3 for k=2, else 2."""
    if not g.simple:
        raise NonSimpleGraph("cycle counting needs a simple graph (condition or sample an HSBM)")
    k = g.vars.shape[1] if g.m else 2
    start = first_cycle_length(k) if start is None else start
    if g.m == 0 or kmax < 2:
        return {ell: 0 for ell in range(start, kmax + 1)}
    ptr, inc_clause, _ = incidence(g)
    raw = _hyper_cycle_kernel(g.n, np.ascontiguousarray(g.vars), ptr, inc_clause, int(kmax))
    return {ell: int(raw[ell] // 2) for ell in range(start, kmax + 1)}


def count_zeta_cycles(g: FactorGraph, kmax):
    """X_zeta(G) for every signature of order <= kmax that occurs in G.

    Keys are tuples of (weight id, s, t) triples with 0-based slots.
    """
    counts = defaultdict(int)
    if g.m == 0:
        return dict(counts)
    vars_ = g.vars
    k = vars_.shape[1]
    wids = g.wids
    ptr, inc_clause, inc_slot = incidence(g)
    visited = np.zeros(g.n, bool)
    used = np.zeros(g.m, bool)
    clauses, steps = [], []

    def walk(start, u, depth):
        for idx in range(ptr[u], ptr[u + 1]):
            a = inc_clause[idx]
            if used[a]:
                continue
            s = inc_slot[idx]
            for t in range(k):
                if t == s:
                    continue
                w = vars_[a, t]
                step = (int(wids[a]), int(s), int(t))
                if w == start:
                    if depth == 0 or clauses[0] < a:
                        counts[tuple(steps) + (step,)] += 1
                    continue
                if w < start or visited[w] or depth + 1 >= kmax:
                    continue
                used[a] = True
                visited[w] = True
                clauses.append(a)
                steps.append(step)
                walk(start, w, depth + 1)
                steps.pop()
                clauses.pop()
                visited[w] = False
                used[a] = False

    for v in range(g.n):
        visited[v] = True
        walk(v, v, 0)
        visited[v] = False
    return dict(counts)


def zeta_order_totals(zcounts, kmax):
    out = {ell: 0 for ell in range(1, kmax + 1)}
    for sig, c in zcounts.items():
        if len(sig) <= kmax:
            out[len(sig)] += c
    return out


def zeta_params(spec, zeta):
    """(lambda_zeta, lambda*_zeta, delta_zeta) for a signature of (weight id, s, t) triples."""
    spec = as_factor_spec(spec)
    ell = len(zeta)
    lam = (spec.d / spec.k) ** ell / (2 * ell)
    phi = np.eye(spec.q)
    for wid, s, t in zeta:
        i = spec.weights.index(wid)
        lam *= spec.weights.probs[i]
        phi = phi @ compute_phi(spec.weights.psis[i], spec, s, t)
    tr = float(np.trace(phi))
    return lam, lam * tr, tr - 1.0


def all_signatures(spec: ModelSpec, ell):
    """Every signature of order ell (|Psi| k (k-1))^ell of them."""
    import itertools
    steps = [(p.id, s, t) for p in spec.weights.psis
             for s in range(spec.k) for t in range(spec.k) if s != t]
    return itertools.product(steps, repeat=ell)


def lambda_sum_bruteforce(spec, ell):
    """Sum over S_ell of lambda_zeta * delta_zeta^2 by explicit enumeration."""
    spec = as_factor_spec(spec)
    return sum(lz * dz * dz for lz, _, dz in (zeta_params(spec, z) for z in all_signatures(spec, ell)))


def lambda_sum_reduced(spec, ell, centered=True):
    """The same sum through ((k-1)d)^l / (2l) E[(tr prod Phi_psi_i - 1)^2].

    With centered=True the expectation is evaluated as tr((Xi*)^l), using
    tr prod Phi - 1 = tr prod (Phi - 1 pi^T), valid under (SYM). The
    uncentered form tr Xi^l - 2 tr Phi^l + 1 is algebraically equal but
    cancels catastrophically once ((k-1)d)^l is large.
    """
    from .spectral import mean_phi, xi_matrix
    spec = as_factor_spec(spec)
    scale = ((spec.k - 1) * spec.d) ** ell / (2 * ell)
    if centered:
        return scale * np.trace(np.linalg.matrix_power(xi_matrix(spec), ell))
    xi = np.linalg.matrix_power(xi_matrix(spec, centered=False), ell)
    phi = np.linalg.matrix_power(mean_phi(spec), ell)
    return scale * (np.trace(xi) - 2 * np.trace(phi) + 1)


def lambda_identity_check(spec, L=40):
    """Compare exp(sum_{l<=L} sum_{S_l} lambda delta^2) with prod (1-(k-1)d lam)^{-1/2}
    over the eigenvalues lam of Xi*. Returns a dict with lhs, rhs, gap and a tail bound."""
    from .spectral import ks_threshold
    spec = as_factor_spec(spec)
    summ = ks_threshold(spec)
    x = (spec.k - 1) * spec.d
    if x * summ.lambda_ks >= 1:
        raise ValueError("d is not below the KS threshold; the series diverges")
    log_lhs = sum(lambda_sum_reduced(spec, ell) for ell in range(1, L + 1))
    eigs = np.real(np.asarray(summ.xi_star_eigs))
    rhs = float(np.prod((1 - x * eigs) ** -0.5))
    r = x * summ.lambda_ks
    # Remaining terms are bounded by (q^2/2) sum_{l>L} r^l / l.
    tail = len(eigs) / 2 * r ** (L + 1) / ((L + 1) * (1 - r)) if r > 0 else 0.0
    lhs = float(np.exp(log_lhs))
    return {"lhs": lhs, "rhs": rhs, "gap": abs(lhs - rhs), "tail_bound": tail * rhs, "L": L}
