"""Monte-Carlo simulation of the limiting likelihood ratio, its quantile and the
power of the optimal test.

Under the null the cycle counts are independent Poisson(mean_l); under the
planted measure they are Poisson((1 + alpha_l) mean_l). Both laws are pushed
through the same functional prod_l (1 + alpha_l)^{X_l} exp(-alpha_l mean_l).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import ROLE_BOOTSTRAP, ROLE_LIMIT_NULL, ROLE_LIMIT_PLANTED, run_indexed, stream
from .spectral import DEFAULT_LMAX

CHUNK = 1 << 16
NORMAL_MEAN = 1e12
BOOTSTRAP = 200


class DivergentRegime(ValueError):
    pass


@dataclass
class LimitLawSample:
    values: np.ndarray
    truncation: int
    regime: str

    @property
    def value(self):
        return float(self.values[0])


def truncate(alphas, means, lmax=DEFAULT_LMAX, eps=1e-12):
    """Keep terms up to lmax or the first one with alpha^2 * mean below eps."""
    alphas = np.asarray(alphas, float)[:lmax]
    means = np.asarray(means, float)[:lmax]
    small = np.nonzero(alphas ** 2 * means < eps)[0]
    cut = len(alphas) if len(small) == 0 else max(int(small[0]), 1)
    return alphas[:cut], means[:cut]


def check_convergent(alphas, means):
    """The second moment prod exp(alpha^2 mean) must be finite: the ratio
    of consecutive terms alpha_l^2 mean_l must fall below 1."""
    a = np.asarray(alphas, float)
    m = np.asarray(means, float)
    w = a * a * m
    if len(w) >= 4 and w[-1] > 1e-8 and w[-1] >= w[-2]:
        raise DivergentRegime("alpha_l^2 * mean_l does not decay: second moment is infinite")


def _log1p_minus(a):
    """log(1 + a) - a, accurate for tiny a."""
    a = np.asarray(a, float)
    series = -a * a / 2 + a ** 3 / 3 - a ** 4 / 4
    return np.where(np.abs(a) < 1e-4, series, np.log1p(a) - a)


def _log_values(alphas, means, planted, master, role, chunk_index, size):
    """Centered form sum (X_l - mean_l) log(1 + alpha_l) + mean_l (log(1 + alpha_l) - alpha_l).

    Counts with mean above NORMAL_MEAN are drawn from the matching normal
    law: numpy cannot draw Poisson variables that large, and at that size
    the two laws agree far beyond Monte-Carlo resolution.
    """
    rng = stream(master, role, chunk_index)
    lam = means * (1 + alphas) if planted else means
    big = lam > NORMAL_MEAN
    dev = np.empty((size, len(lam)))
    dev[:, ~big] = rng.poisson(lam[~big], size=(size, int((~big).sum()))) - means[~big]
    if big.any():
        dev[:, big] = (rng.standard_normal((size, int(big.sum()))) * np.sqrt(lam[big])
                       + (lam[big] - means[big]))
    return dev @ np.log1p(alphas) + float(np.dot(means, _log1p_minus(alphas)))


def _chunk_job(args):
    return _log_values(*args)


def sample_log_l(alphas, means, samples, seed, planted=False, workers=None):
    """log of the truncated product for `samples` independent draws."""
    alphas = np.asarray(alphas, float)
    means = np.asarray(means, float)
    role = ROLE_LIMIT_PLANTED if planted else ROLE_LIMIT_NULL
    jobs = []
    for c, start in enumerate(range(0, samples, CHUNK)):
        jobs.append((alphas, means, planted, seed, role, c, min(CHUNK, samples - start)))
    parts = run_indexed(_chunk_job, jobs, workers)
    return np.concatenate(parts) if parts else np.zeros(0)


def sample_L_infinity(alphas, means, L=DEFAULT_LMAX, seed=0, samples=1, workers=None,
                      check=True):
    """Draws of prod_l (1+alpha_l)^{X_l} e^{-alpha_l mean_l} with X_l ~ Poisson(mean_l)."""
    a, m = truncate(alphas, means, L)
    if check:
        check_convergent(alphas, means)
    vals = np.exp(sample_log_l(a, m, samples, seed, planted=False, workers=workers))
    return LimitLawSample(vals, len(a), "null")


def sample_L_star_infinity(alphas, means, L=DEFAULT_LMAX, seed=0, samples=1, workers=None,
                           check=True):
    """Same functional with X_l ~ Poisson((1 + alpha_l) mean_l)."""
    a, m = truncate(alphas, means, L)
    if check:
        check_convergent(alphas, means)
    vals = np.exp(sample_log_l(a, m, samples, seed, planted=True, workers=workers))
    return LimitLawSample(vals, len(a), "planted")


def smallest_valid_threshold(values, alpha):
    """Smallest C with P(T > C) <= alpha <= P(T >= C) under the empirical law of values.

    Returns +inf when no sample value qualifies (alpha = 0) and a value below
    the minimum when alpha >= 1.
    """
    x = np.sort(np.asarray(values, float))
    n = len(x)
    if alpha >= 1:
        return float(np.nextafter(x[0], -np.inf))
    uniq, first = np.unique(x, return_index=True)
    n_ge = n - first
    n_gt = np.concatenate([n_ge[1:], [0]])
    tol = 1e-9
    ok = (n_gt <= alpha * n + tol) & (alpha * n <= n_ge + tol)
    idx = np.nonzero(ok)[0]
    return float(uniq[idx[0]]) if len(idx) else float("inf")


def _weighted_quantile_sorted(x, w, p):
    """Type-7 style quantile for integer resampling weights on sorted x."""
    cw = np.cumsum(w)
    total = cw[-1]
    h = (total - 1) * p
    lo = int(np.floor(h))
    frac = h - lo
    i_lo = np.searchsorted(cw, lo + 1)
    i_hi = np.searchsorted(cw, min(lo + 2, total))
    return x[i_lo] + frac * (x[i_hi] - x[i_lo])


def _powers(null, wn, plant, wp, c, alpha_level):
    """(E[L 1{L>C}] + g E[L 1{L=C}], P(L*>C) + g P(L*=C), E[L 1{L>C}]) where g
    randomizes at an atom so that the null rejection probability is alpha."""
    wn = np.ones(len(null)) if wn is None else wn
    wp = np.ones(len(plant)) if wp is None else wp
    tn, tp = wn.sum(), wp.sum()
    above, at = null > c, null == c
    p_above = wn[above].sum() / tn
    p_at = wn[at].sum() / tn
    g = float(np.clip((alpha_level - p_above) / p_at, 0.0, 1.0)) if p_at > 0 else 0.0
    strict = float(np.dot(wn[above], null[above]) / tn)
    beta_null = strict + g * float(np.dot(wn[at], null[at]) / tn)
    beta_plant = float((wp[plant > c].sum() + g * wp[plant == c].sum()) / tp)
    return beta_null, beta_plant, strict


def optimal_power(alphas, means, alpha_level=0.05, samples=10**6, seed=0, L=DEFAULT_LMAX,
                  k=2, d=None, workers=None, bootstrap=BOOTSTRAP):
    """Quantile C_alpha of L_infinity and two estimates of the optimal power.

    (i)  E[L 1{L >= C}] from null draws (change of measure),
    (ii) P(L* >= C) from planted draws.
    When the null law puts mass on C itself, the test rejects there with
    the probability that makes its size exactly alpha; beta_star_strict is
    the conservative never-at-C variant.
    The threshold is the type-7 (1 - alpha) quantile of the null draws; if
    d < 1/(k-1) the law has atoms and the smallest C with
    P(L > C) <= alpha <= P(L >= C) is used instead. Bootstrap standard
    errors recompute C on every resample.
    """
    if not 0 < alpha_level < 1:
        raise ValueError("alpha must lie in (0, 1)")
    a, m = truncate(alphas, means, L)
    check_convergent(alphas, means)
    atomic = d is not None and d < 1 / (k - 1)
    log_null = sample_log_l(a, m, samples, seed, planted=False, workers=workers)
    log_plant = sample_log_l(a, m, samples, seed, planted=True, workers=workers)
    null = np.sort(np.exp(log_null))
    plant = np.sort(np.exp(log_plant))

    def threshold(x_sorted, w=None):
        if atomic:
            vals = x_sorted if w is None else np.repeat(x_sorted, w)
            return smallest_valid_threshold(vals, alpha_level)
        if w is None:
            return float(np.quantile(x_sorted, 1 - alpha_level))
        return float(_weighted_quantile_sorted(x_sorted, w, 1 - alpha_level))

    c = threshold(null)
    beta_null, beta_plant, beta_strict = _powers(null, None, plant, None, c, alpha_level)

    rng = stream(seed, ROLE_BOOTSTRAP)
    boots = np.empty((bootstrap, 3))
    for b in range(bootstrap):
        wn = rng.poisson(1.0, size=len(null))
        wp = rng.poisson(1.0, size=len(plant))
        cb = threshold(null, wn) if not atomic else c
        bn, bp, _ = _powers(null, wn, plant, wp, cb, alpha_level)
        boots[b] = (bn, bp, bn - bp)
    se = boots.std(axis=0, ddof=1)
    support = None
    if atomic:
        vals, cnt = np.unique(np.round(log_null, 12), return_counts=True)
        top = np.argsort(-cnt)[:20]
        support = [{"value": float(np.exp(vals[i])), "prob": float(cnt[i] / samples)} for i in top]
    return {
        "c_alpha": c, "beta_star": beta_null, "beta_star_planted": beta_plant,
        "beta_star_strict": beta_strict,
        "se_null": float(se[0]), "se_planted": float(se[1]), "se_diff": float(se[2]),
        "ci": [beta_null - 1.96 * float(se[0]), beta_null + 1.96 * float(se[0])],
        "agree_2se": bool(abs(beta_null - beta_plant) <= 2 * se[2]),
        "L": len(a), "regime": "atomic" if atomic else "continuous",
        "support": support, "samples": samples, "alpha": alpha_level,
        "mean_null": float(np.mean(null)),
        "se_mean_null": float(np.std(null, ddof=1) / np.sqrt(len(null))),
    }
