"""Exact brute-force quantities at small n: likelihood ratios, posteriors,
two-point marginals, posterior overlaps, information terms.

Assignments are enumerated in mixed-radix order (vertex 0 is the most
significant digit). Sums are accumulated in log space block by block and
merged in a fixed order, so results do not depend on scheduling.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb, factorial, log

import numpy as np
from scipy.special import logsumexp

from .model import FactorGraph, HsbmSpec, ModelSpec, as_factor_spec, is_simple, product_mean
from .rng import as_generator

STATE_BUDGET = 2 * 10**7
PAIR_BUDGET = 10**9
BLOCK = 1 << 15


class BudgetExceeded(RuntimeError):
    pass


def _check_budget(q, n, budget):
    if q ** n > budget:
        raise BudgetExceeded(f"q^n = {q}^{n} exceeds the state budget {budget}")


def decode(indices, n, q):
    """Labels (len(indices), n) for mixed-radix assignment indices."""
    idx = np.asarray(indices, dtype=np.int64)
    powers = q ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return (idx[:, None] // powers[None, :]) % q


def _mixture_table(spec: ModelSpec):
    return np.tensordot(spec.weights.probs, spec.weights.stacked(), axes=(0, 0))


def _log_weights(spec: ModelSpec, g: FactorGraph, labels):
    """log pi(sigma) + log psi_G(sigma) - m log E_{p,u} psi(sigma_omega) for each row."""
    q, k = spec.q, spec.k
    out = np.log(spec.pi)[labels].sum(axis=1)
    if g.m == 0:
        return out
    logtabs = {p.id: np.log(p.table).ravel() for p in spec.weights.psis}
    radix = q ** np.arange(k - 1, -1, -1)
    for wid, row in zip(g.wids, g.vars):
        flat = labels[:, row] @ radix
        out += logtabs[int(wid)][flat]
    # Normalizer depends on sigma only through its colour counts.
    counts = np.stack([(labels == c).sum(axis=1) for c in range(q)], axis=1)
    uniq, inv = np.unique(counts, axis=0, return_inverse=True)
    mix = _mixture_table(spec)
    n = labels.shape[1]
    lognorm = np.array([log(product_mean(mix, row / n)) for row in uniq])
    return out - g.m * lognorm[inv.ravel()]


def _blocks(q, n):
    total = q ** n
    for lo in range(0, total, BLOCK):
        yield lo, min(total, lo + BLOCK)


def exact_log_likelihood(spec, g: FactorGraph, budget=STATE_BUDGET):
    spec = as_factor_spec(spec)
    _check_budget(spec.q, g.n, budget)
    parts = [logsumexp(_log_weights(spec, g, decode(np.arange(lo, hi), g.n, spec.q)))
             for lo, hi in _blocks(spec.q, g.n)]
    return float(logsumexp(parts))


def exact_likelihood(spec, g: FactorGraph, budget=STATE_BUDGET):
    """L(G) = sum_sigma pi(sigma) psi_G(sigma) / (E_{p,u} psi(sigma_omega))^m."""
    return float(np.exp(exact_log_likelihood(spec, g, budget)))


@dataclass
class PosteriorTable:
    n: int
    q: int
    log_masses: np.ndarray
    log_likelihood: float

    @property
    def masses(self):
        return np.exp(self.log_masses)

    def labels(self):
        return decode(np.arange(self.q ** self.n), self.n, self.q)

    def expect(self, f):
        """<f(sigma)> for a function of one label vector (vectorized over rows)."""
        return float(np.dot(self.masses, f(self.labels())))

    def marginals(self):
        """(n, q) table of P(sigma_v = i | G)."""
        lab = self.labels()
        w = self.masses
        return np.stack([np.bincount(lab[:, v], weights=w, minlength=self.q)
                         for v in range(self.n)])


def exact_posterior(spec, g: FactorGraph, budget=STATE_BUDGET) -> PosteriorTable:
    spec = as_factor_spec(spec)
    _check_budget(spec.q, g.n, budget)
    logw = np.concatenate([_log_weights(spec, g, decode(np.arange(lo, hi), g.n, spec.q))
                           for lo, hi in _blocks(spec.q, g.n)])
    logl = float(logsumexp(logw))
    return PosteriorTable(g.n, spec.q, logw - logl, logl)


def two_point(spec, g: FactorGraph, u, v, table: PosteriorTable | None = None):
    """Joint posterior of (sigma_u, sigma_v) as a q x q matrix."""
    if u == v:
        raise ValueError("two-point marginal needs u != v")
    t = table if table is not None else exact_posterior(spec, g)
    lab = t.labels()
    out = np.zeros((t.q, t.q))
    np.add.at(out, (lab[:, u], lab[:, v]), t.masses)
    return out


def conditional_marginals(table: PosteriorTable, pin_vertex, pin_label):
    """P(sigma_u = i | G, sigma_pin = label) for every u."""
    lab = table.labels()
    w = table.masses * (lab[:, pin_vertex] == pin_label)
    w = w / w.sum()
    return np.stack([np.bincount(lab[:, u], weights=w, minlength=table.q)
                     for u in range(table.n)])


def posterior_overlap_expectation(spec, g: FactorGraph, table: PosteriorTable | None = None,
                                  pair_budget=PAIR_BUDGET, pair_samples=200_000, seed=0):
    """<|| R(sigma1, sigma2) - pi pi^T ||_1> for two independent posterior draws.

    Exact double sum when the number of pairs fits pair_budget, otherwise an
    average over pair_samples pairs drawn from the table.
    """
    spec = as_factor_spec(spec)
    t = table if table is not None else exact_posterior(spec, g)
    q, n = t.q, t.n
    lab = t.labels()
    w = t.masses
    base = np.outer(spec.pi, spec.pi)
    onehot = np.eye(q)[lab]  # (S, n, q)
    if len(w) ** 2 <= pair_budget:
        keep = w > 0
        w1, oh = w[keep], onehot[keep].astype(float)
        cols = [np.ascontiguousarray(oh[:, :, i]) for i in range(q)]
        total = 0.0
        step = max(1, 2**21 // len(w1))
        for lo in range(0, len(w1), step):
            dev = np.zeros((min(step, len(w1) - lo), len(w1)))
            for i in range(q):
                for j in range(q):
                    dev += np.abs(cols[i][lo:lo + step] @ cols[j].T / n - base[i, j])
            total += float(w1[lo:lo + step] @ dev @ w1)
        return total
    rng = as_generator(seed)
    i = rng.choice(len(w), size=pair_samples, p=w)
    j = rng.choice(len(w), size=pair_samples, p=w)
    r = np.einsum("anq,anr->aqr", onehot[i], onehot[j]) / n
    return float(np.abs(r - base).sum(axis=(1, 2)).mean())


def independent_overlap_baseline(pi, n, samples=20000, seed=0):
    """E || R - pi pi^T ||_1 for two independent pi-i.i.d. assignments."""
    rng = as_generator(seed)
    q = len(pi)
    a = rng.choice(q, size=(samples, n), p=pi)
    b = rng.choice(q, size=(samples, n), p=pi)
    r = np.zeros((samples, q, q))
    for i in range(q):
        for j in range(q):
            r[:, i, j] = np.mean((a == i) & (b == j), axis=1)
    return float(np.abs(r - np.outer(pi, pi)).sum(axis=(1, 2)).mean())


# ---------------------------------------------------------------- information terms

def single_letter_term(spec):
    """(d/k) E_{p,pi}[(psi/xi) log(psi/xi)]."""
    spec = as_factor_spec(spec)
    xi = spec.xi
    total = 0.0
    for psi, p in zip(spec.weights.psis, spec.weights.probs):
        r = psi.table / xi
        total += p * product_mean(r * np.log(r), spec.pi)
    return spec.d / spec.k * total


def hsbm_single_letter_term(h: HsbmSpec):
    """(d/k) sum M0 log M0 prod pi."""
    return h.d / h.k * product_mean(h.m0 * np.log(h.m0), h.pi)


def mutual_information_terms(spec, n, samples, seed=0, budget=STATE_BUDGET):
    """Monte-Carlo E log L(G*) over Poissonized planted graphs plus the
    closed-form single-letter term.

    i_estimate is the asymptotic-formula estimate
    I/n ~ single_letter - E log L / n; it is not the exact mutual information.
    """
    from .samplers import sample_poisson_model
    from .rng import ROLE_PLANTED, stream
    fspec = as_factor_spec(spec)
    _check_budget(fspec.q, n, budget)
    logs = np.array([exact_log_likelihood(fspec, sample_poisson_model(
        fspec, n, stream(seed, ROLE_PLANTED, i))[1], budget) for i in range(samples)])
    e_log_l = float(logs.mean())
    single = single_letter_term(fspec)
    out = {
        "e_log_l": e_log_l, "e_log_l_se": float(logs.std(ddof=1) / np.sqrt(samples)) if samples > 1 else None,
        "d_kl": e_log_l, "single_letter": single,
        "i_estimate_per_vertex": single - e_log_l / n,
        "label": "asymptotic-formula estimate", "n": n, "samples": samples,
    }
    if isinstance(spec, HsbmSpec):
        out["single_letter_hsbm"] = hsbm_single_letter_term(spec)
    return out


def free_energy_derivative_functional(spec, g: FactorGraph, table: PosteriorTable | None = None):
    """(1/k) E_{psi ~ p, omega ~ Unif(V^k)} [B log B] with
    B = < psi(sigma_omega) / E_{p,u} psi'(sigma_omega') > under the posterior of g."""
    spec = as_factor_spec(spec)
    t = table if table is not None else exact_posterior(spec, g)
    lab = t.labels()
    q, n, k = spec.q, g.n, spec.k
    counts = np.stack([(lab == c).sum(axis=1) for c in range(q)], axis=1)
    uniq, inv = np.unique(counts, axis=0, return_inverse=True)
    mix = _mixture_table(spec)
    norm = np.array([product_mean(mix, row / n) for row in uniq])[inv.ravel()]
    w = t.masses / norm
    radix = q ** np.arange(k - 1, -1, -1)
    tables = [p.table.ravel() for p in spec.weights.psis]
    total = 0.0
    for omega in itertools.product(range(n), repeat=k):
        flat = lab[:, list(omega)] @ radix
        joint = np.bincount(flat, weights=w, minlength=q ** k)
        for tab, p in zip(tables, spec.weights.probs):
            b = float(joint @ tab)
            total += p * b * np.log(b)
    return total / (k * n ** k)


# ---------------------------------------------------------------- conditioned and edge models

def _set_rates(spec: ModelSpec, labels, n):
    """Per-assignment Poisson rate mu_S of every distinct k-set S (rows: assignments)."""
    k, q = spec.k, spec.q
    mix = _mixture_table(spec)
    counts = np.stack([(labels == c).sum(axis=1) for c in range(q)], axis=1)
    norm = np.array([product_mean(mix, row / n) for row in counts]) * n ** k
    sets = list(itertools.combinations(range(n), k))
    radix = q ** np.arange(k - 1, -1, -1)
    flat_mix = mix.ravel()
    rates = np.zeros((len(labels), len(sets)))
    for j, s in enumerate(sets):
        acc = 0.0
        for omega in itertools.permutations(s):
            acc = acc + flat_mix[labels[:, list(omega)] @ radix]
        rates[:, j] = acc
    return sets, rates * (spec.d * n / k) / norm[:, None]


def conditioned_likelihood(spec, g: FactorGraph, method="ratio", budget=STATE_BUDGET):
    """Likelihood ratio of the planted and null Poissonized models both conditioned
    on the graph being simple; 0 for a non-simple graph.

    method="ratio": L(G) * P_null(simple) / P_planted(simple).
    method="edges": each k-set independently present with probability
    mu_S / (1 + mu_S) under a prior on sigma tilted by P(simple | sigma).
    """
    fspec = as_factor_spec(spec)
    n, k, q = g.n, fspec.k, fspec.q
    _check_budget(q, n, budget)
    if not is_simple(g):
        return 0.0
    lab = decode(np.arange(q ** n), n, q)
    sets, rates = _set_rates(fspec, lab, n)
    log_prior = np.log(fspec.pi)[lab].sum(axis=1)
    mu0 = fspec.d * n / k * factorial(k) / n ** k
    log_p_simple_null = len(sets) * np.log1p(mu0)
    log_p_simple_sigma = np.log1p(rates).sum(axis=1)
    log_p_simple_planted = float(logsumexp(log_prior + log_p_simple_sigma))
    if method == "ratio":
        return float(np.exp(exact_log_likelihood(fspec, g, budget)
                            + log_p_simple_null - log_p_simple_planted))
    # Clause-level factor given presence: p(psi) psi(sigma_omega) / sum over orderings and psi.
    mix = _mixture_table(fspec)
    radix = q ** np.arange(k - 1, -1, -1)
    index = {s: j for j, s in enumerate(sets)}
    present = np.zeros(len(sets), bool)
    log_w = log_prior + log_p_simple_sigma - log_p_simple_planted
    log_w0 = 0.0
    flat_mix = mix.ravel()
    for wid, row in zip(g.wids, g.vars):
        j = index[tuple(sorted(map(int, row)))]
        present[j] = True
        i = fspec.weights.index(int(wid))
        psi = fspec.weights.psis[i].table.ravel()
        p = fspec.weights.probs[i]
        num = p * psi[lab[:, row] @ radix]
        den = sum(flat_mix[lab[:, list(om)] @ radix] for om in itertools.permutations(row))
        log_w = log_w + np.log(rates[:, j] / (1 + rates[:, j])) + np.log(num / den)
        # Null: the set rate is mu0 and every (ordering, psi) has mass p / k!.
        log_w0 += np.log(mu0 / (1 + mu0)) + np.log(p / factorial(k))
    absent = ~present
    log_w = log_w - np.log1p(rates[:, absent]).sum(axis=1)
    log_w0 -= absent.sum() * np.log1p(mu0)
    return float(np.exp(logsumexp(log_w) - log_w0))


def hsbm_edge_likelihood(h: HsbmSpec, g: FactorGraph, budget=STATE_BUDGET):
    """Exact ratio P_HSBM(G) / P_ER(G) for the edge-inclusion models with
    probabilities M(sigma_S)/C(n,k-1) and d/C(n,k-1)."""
    n, k, q = g.n, h.k, h.q
    _check_budget(q, n, budget)
    lab = decode(np.arange(q ** n), n, q)
    norm = comb(n, k - 1)
    p0 = h.d / norm
    present = g.edge_set()
    radix = q ** np.arange(k - 1, -1, -1)
    mflat = h.m.ravel()
    log_w = np.log(h.pi)[lab].sum(axis=1)
    for s in itertools.combinations(range(n), k):
        p = mflat[lab[:, list(s)] @ radix] / norm
        if s in present:
            log_w += np.log(p / p0)
        else:
            log_w += np.log1p(-p) - np.log1p(-p0)
    return float(np.exp(logsumexp(log_w)))


def sbm_closed_form_likelihood(q, a, b, g: FactorGraph, budget=STATE_BUDGET):
    """Uniform-prior graph SBM ratio through monochromatic edge and non-edge counts."""
    n = g.n
    _check_budget(q, n, budget)
    d = (a + (q - 1) * b) / q
    lab = decode(np.arange(q ** n), n, q)
    edges = np.array(sorted(g.edge_set()), dtype=np.int64).reshape(-1, 2)
    counts = np.stack([(lab == c).sum(axis=1) for c in range(q)], axis=1)
    mono_total = (counts * (counts - 1) // 2).sum(axis=1)
    e0 = (lab[:, edges[:, 0]] == lab[:, edges[:, 1]]).sum(axis=1) if len(edges) else np.zeros(len(lab))
    ne = len(edges)
    et0 = mono_total - e0
    log_w = (-n * log(q)
             + e0 * log(q * a / (a + (q - 1) * b))
             + (ne - e0) * log(q * b / (a + (q - 1) * b))
             + et0 * (np.log1p(-a / n) - np.log1p(-d / n))
             + (comb(n, 2) - ne - et0) * (np.log1p(-b / n) - np.log1p(-d / n)))
    return float(np.exp(logsumexp(log_w)))


def enumerate_graphs(n, m, k, wids):
    """Every labelled graph with m clauses over V^k and weight ids from wids."""
    tuples = list(itertools.product(range(n), repeat=k))
    for placement in itertools.product(tuples, repeat=m):
        for ws in itertools.product(wids, repeat=m):
            yield FactorGraph(n, np.array(placement, np.int64).reshape(m, k), np.array(ws, np.int64))


def null_probability(spec: ModelSpec, g: FactorGraph):
    """P(G(n, m) = G) = prod_a p(psi_a) / n^k."""
    probs = np.array([spec.weights.probs[spec.weights.index(int(w))] for w in g.wids])
    return float(np.prod(probs)) / g.n ** (spec.k * g.m)


def change_of_measure_total(spec, n, m, budget=STATE_BUDGET):
    """sum over all graphs of P_null(G) L(G); equals 1."""
    fspec = as_factor_spec(spec)
    ids = [p.id for p in fspec.weights.psis]
    terms = [null_probability(fspec, g) * exact_likelihood(fspec, g, budget)
             for g in enumerate_graphs(n, m, fspec.k, ids)]
    return float(np.sum(np.sort(terms)))
