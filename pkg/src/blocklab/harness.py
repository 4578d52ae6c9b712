"""Short-cycle hypothesis test and the weak-recovery probe.

The statistic is T_n(G) = prod_{l=l0}^{K_n} (1 + alpha_l)^{X_l(G)} with l0 = 3
for graphs and 2 for hypergraphs. Calibration draws Erdos-Renyi graphs of the
same degree; calibration, evaluation and planted draws use disjoint seed roles.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from functools import partial

import numpy as np
from scipy.stats import spearmanr

from . import oracle
from .cycles import count_hyper_cycles
from .limit_law import DivergentRegime, optimal_power
from .model import HsbmSpec, as_factor_spec, empty_graph, overlap_A
from .rng import (ROLE_NULL_CALIBRATE, ROLE_NULL_EVALUATE, ROLE_PLANTED, run_indexed,
                  stream)
from .samplers import sample_er_hypergraph, sample_hsbm, sample_poisson_model
from .spectral import alphas as b_alphas
from .spectral import cycle_means, first_cycle_length, hsbm_b_matrix, ks_threshold

REFERENCE_SAMPLES = 200_000


def default_kn(n):
    """max(3, ceil(log log n) + 3)."""
    return max(3, math.ceil(math.log(math.log(n))) + 3)


def _alpha_of(alphas, ell):
    if isinstance(alphas, dict):
        return float(alphas.get(ell, 0.0))
    return float(alphas[ell - 1]) if ell - 1 < len(alphas) else 0.0


def log_test_statistic(g, alphas, kn, start=None):
    """log T_n(G). alphas is a mapping l -> alpha_l or a sequence indexed from l = 1."""
    k = g.vars.shape[1] if g.m else 2
    start = first_cycle_length(k) if start is None else start
    if kn < start:
        raise ValueError(f"K_n = {kn} is below the first cycle length {start}")
    counts = count_hyper_cycles(g, kn, start)
    return float(sum(c * math.log1p(_alpha_of(alphas, ell)) for ell, c in counts.items()))


def test_statistic(g, alphas, kn, start=None):
    return math.exp(log_test_statistic(g, alphas, kn, start))


@dataclass
class Calibration:
    c_threshold: float
    randomization: float
    degenerate: bool
    alpha: float
    samples: int

    def reject(self, t, rng=None):
        """Reject when T > C; at T == C reject with the randomization probability."""
        t = np.asarray(t, float)
        out = t > self.c_threshold
        if self.randomization > 0:
            rng = rng if rng is not None else np.random.default_rng(0)
            tie = t == self.c_threshold
            out = out | (tie & (rng.random(t.shape) < self.randomization))
        return out


def calibrate_values(values, alpha, randomized=False):
    """Smallest C with P(T > C) <= alpha <= P(T >= C) under the empirical law.

    alpha >= 1 gives a C below the minimum. An all-equal sample yields the
    never-reject test with a warning.
    """
    x = np.sort(np.asarray(values, float))
    n = len(x)
    if n == 0:
        raise ValueError("no calibration values")
    if alpha >= 1:
        return Calibration(float(np.nextafter(x[0], -np.inf)), 0.0, False, alpha, n)
    if x[0] == x[-1]:
        warnings.warn("degenerate null sample: every statistic is equal, the test never rejects")
        return Calibration(float(x[-1]), 0.0, True, alpha, n)
    uniq, first = np.unique(x, return_index=True)
    n_ge = n - first
    n_gt = np.concatenate([n_ge[1:], [0]])
    tol = 1e-9
    ok = np.nonzero((n_gt <= alpha * n + tol) & (alpha * n <= n_ge + tol))[0]
    i = int(ok[0]) if len(ok) else len(uniq) - 1
    c = float(uniq[i])
    gamma = 0.0
    if randomized:
        at = (n_ge[i] - n_gt[i]) / n
        gamma = float(np.clip((alpha - n_gt[i] / n) / at, 0.0, 1.0)) if at > 0 else 0.0
    return Calibration(c, gamma, False, alpha, n)


def _null_log_t(args):
    n, d, k, seed, role, i, alphas, kn = args
    g = sample_er_hypergraph(n, d, k, stream(seed, role, i))
    return log_test_statistic(g, alphas, kn)


def _planted_log_t(args):
    h, n, seed, i, alphas, kn = args
    _, g = sample_hsbm(h, n, stream(seed, ROLE_PLANTED, i))
    return log_test_statistic(g, alphas, kn)


def hsbm_alphas(h: HsbmSpec, lmax):
    return b_alphas(hsbm_b_matrix(h), lmax)


def null_log_statistics(h: HsbmSpec, n, kn, samples, seed, role=ROLE_NULL_CALIBRATE,
                        workers=None, alphas=None):
    alphas = hsbm_alphas(h, kn) if alphas is None else alphas
    jobs = [(n, h.d, h.k, seed, role, i, alphas, kn) for i in range(samples)]
    return np.array(run_indexed(_null_log_t, jobs, workers))


def planted_log_statistics(h: HsbmSpec, n, kn, samples, seed, workers=None, alphas=None):
    alphas = hsbm_alphas(h, kn) if alphas is None else alphas
    jobs = [(h, n, seed, i, alphas, kn) for i in range(samples)]
    return np.array(run_indexed(_planted_log_t, jobs, workers))


def calibrate(h: HsbmSpec, n, alpha, kn=None, null_samples=None, seed=0, workers=None,
              randomized=False):
    """Threshold for T_n from fresh Erdos-Renyi draws with the degree and arity of h.

    Works on log T so ties between equal statistics are exact.
    """
    kn = default_kn(n) if kn is None else kn
    null_samples = int(math.ceil(50 / alpha)) if null_samples is None else null_samples
    if null_samples < 50 / alpha:
        raise ValueError(f"need at least 50/alpha = {math.ceil(50 / alpha)} null samples")
    logs = null_log_statistics(h, n, kn, null_samples, seed, ROLE_NULL_CALIBRATE, workers)
    return calibrate_values(logs, alpha, randomized), logs


@dataclass
class TestReport:
    alpha: float
    c_threshold: float
    empirical_size: float
    size_se: float
    empirical_power: float
    power_se: float
    beta_star_reference: float | None
    beta_star_se: float | None
    n: int
    kn: int
    seed: int
    null_samples: int
    eval_samples: int
    planted_samples: int
    d: float
    d_ks: float
    regime: str
    randomization: float = 0.0
    note: str = ""
    reference: dict | None = field(default=None, repr=False)

    def to_dict(self):
        out = asdict(self)
        out["d_ks"] = "inf" if math.isinf(self.d_ks) else self.d_ks
        return out


def _rate(x):
    x = np.asarray(x, float)
    return float(x.mean()), float(np.sqrt(x.mean() * (1 - x.mean()) / len(x)))


def power_experiment(h: HsbmSpec, n, alpha=0.05, kn=None, samples=400, seed=0, workers=None,
                     null_samples=None, randomized=False, reference=True,
                     reference_samples=REFERENCE_SAMPLES):
    """Calibrate on fresh nulls, then measure size on independent nulls and power on
    HSBM draws; attach the limit-law optimal power when d is below the KS threshold."""
    kn = default_kn(n) if kn is None else kn
    if null_samples is None:
        null_samples = max(samples, math.ceil(50 / alpha))
    lmax = max(kn, 64)
    al = hsbm_alphas(h, lmax)
    cal, _ = calibrate(h, n, alpha, kn, null_samples, seed, workers, randomized)
    ev = null_log_statistics(h, n, kn, samples, seed, ROLE_NULL_EVALUATE, workers, al)
    pl = planted_log_statistics(h, n, kn, samples, seed, workers, al)
    rng = stream(seed, ROLE_NULL_EVALUATE, 1 << 40)
    size, size_se = _rate(cal.reject(ev, rng))
    power, power_se = _rate(cal.reject(pl, rng))
    d_ks = ks_threshold(h).d_ks_hsbm
    ref, beta, beta_se = None, None, None
    regime = "below KS" if h.d < d_ks else "at or above KS"
    note = "" if h.d < d_ks else "power at a single n; no limit statement"
    if reference and h.d < d_ks:
        start = first_cycle_length(h.k)
        try:
            ref = optimal_power(al[start - 1:], cycle_means(h.k, h.d, lmax, start), alpha,
                                reference_samples, seed, k=h.k, d=h.d, workers=workers)
            beta, beta_se = ref["beta_star"], ref["se_null"]
        except DivergentRegime as exc:
            note = f"no limit-law reference: {exc}"
    return TestReport(alpha, math.exp(cal.c_threshold), size, size_se, power, power_se, beta, beta_se,
                      n, kn, seed, null_samples, samples, samples, float(h.d), float(d_ks),
                      regime, cal.randomization, note, ref)


# ---------------------------------------------------------------- weak recovery probe

def _pair_deviation(table, pi):
    """Mean over u < v of the total variation between P(sigma_u, sigma_v | G) and pi pi^T."""
    lab = table.labels()
    onehot = np.eye(table.q)[lab]
    joint = np.einsum("s,sua,svb->uvab", table.masses, onehot, onehot)
    base = np.outer(pi, pi)
    iu = np.triu_indices(table.n, 1)
    return float(0.5 * np.abs(joint[iu] - base).sum(axis=(1, 2)).mean())


def pinned_estimate(table, pi, pin_vertex, pin_label):
    """argmax_i P(sigma_u = i | G, sigma_pin = label) / pi_i; ties go to the smallest label."""
    cond = oracle.conditional_marginals(table, pin_vertex, pin_label)
    return np.argmax(cond / pi[None, :], axis=1)


def _probe_one(args):
    spec, n, seed, d_index, i = args
    rng = stream(seed, ROLE_PLANTED, d_index, i)
    fspec = as_factor_spec(spec)
    sigma, g = sample_poisson_model(fspec, n, rng)
    table = oracle.exact_posterior(fspec, g)
    return _diagnostics(fspec, g, sigma, table)


def _diagnostics(fspec, g, sigma, table):
    pi = fspec.pi
    overlap = oracle.posterior_overlap_expectation(fspec, g, table)
    est = pinned_estimate(table, pi, 0, int(sigma[0]))
    a = overlap_A(sigma[1:], est[1:], fspec.q)
    return overlap, a, _pair_deviation(table, pi)


def _empty_diagnostics(pi, n, sigma):
    """d = 0: the posterior is the prior product."""
    q = len(pi)
    lab = oracle.decode(np.arange(q ** n), n, q)
    logm = np.log(pi)[lab].sum(axis=1)
    table = oracle.PosteriorTable(n, q, logm, 0.0)
    from .model import ModelSpec, WeightFunction, WeightPrior
    flat = ModelSpec(2, q, pi, WeightPrior((WeightFunction(0, np.ones((q, q))),),
                                           np.array([1.0])), 1.0)
    return _diagnostics(flat, empty_graph(n, 2), sigma, table)


def _probe_empty(args):
    pi, n, seed, d_index, i = args
    rng = stream(seed, ROLE_PLANTED, d_index, i)
    sigma = rng.choice(len(pi), size=n, p=pi)
    return _empty_diagnostics(np.asarray(pi), n, sigma)


def weak_recovery_probe(spec, n, samples, seed=0, d_grid=None, workers=None):
    """Three diagnostics per degree, averaged over planted graphs at small n:
    the posterior overlap deviation, the overlap A of the pinned estimator
    (one vertex's true label revealed, A measured on the rest) and the mean
    two-point deviation. Returns per-d records and rank correlations with d."""
    base = as_factor_spec(spec)
    grid = [base.d] if d_grid is None else list(d_grid)
    records = []
    for j, d in enumerate(grid):
        if d == 0:
            jobs = [(base.pi, n, seed, j, i) for i in range(samples)]
            vals = np.array(run_indexed(_probe_empty, jobs, workers))
        else:
            s = spec.with_degree(d)
            jobs = [(s, n, seed, j, i) for i in range(samples)]
            vals = np.array(run_indexed(_probe_one, jobs, workers))
        mean = vals.mean(axis=0)
        se = vals.std(axis=0, ddof=1) / np.sqrt(samples) if samples > 1 else np.zeros(3)
        records.append({"d": float(d), "overlap_deviation": float(mean[0]),
                        "overlap_deviation_se": float(se[0]), "A": float(mean[1]),
                        "A_se": float(se[1]), "two_point_deviation": float(mean[2]),
                        "two_point_deviation_se": float(se[2]), "samples": samples})
    report = {"n": n, "seed": seed, "q": base.q, "records": records,
              "baseline_overlap": oracle.independent_overlap_baseline(
                  base.pi, n, seed=int(stream(seed, 0).integers(1 << 31)))}
    if len(grid) >= 3:
        ds = [r["d"] for r in records]
        report["rank_correlation"] = {
            key: float(spearmanr(ds, [r[key] for r in records]).statistic)
            for key in ("overlap_deviation", "A", "two_point_deviation")}
    return report
