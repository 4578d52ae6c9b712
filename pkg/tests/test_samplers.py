import itertools
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from blocklab.model import ModelSpec, hsbm_to_factor_spec, is_simple, symmetric_sbm, symmetrize
from blocklab.rng import stream
from blocklab.samplers import (RejectionBudgetExceeded, condition_simple, gamma_resample,
                               sample_er_hypergraph, sample_hsbm, sample_null, sample_planted,
                               sample_planted_given, sample_poisson_model)


def chi2_ok(observed, expected, level=1e-4):
    return stats.chisquare(observed, expected).pvalue > level


def mixture_spec():
    t = np.array([[[2.0, 1.0], [0.5, 1.5]], [[1.0, 0.7], [3.0, 1.2]]])
    return ModelSpec(3, 2, np.array([0.3, 0.7]), symmetrize([t]), 2.0)


def test_planted_clause_law_matches_exact():
    spec = mixture_spec()
    sigma = np.array([0, 1, 1, 0, 1])
    g = sample_planted_given(spec, sigma, 60_000, seed=1)
    n, k = len(sigma), 3
    cells = {}
    for p, psi in zip(spec.weights.probs, spec.weights.psis):
        for tup in itertools.product(range(n), repeat=k):
            cells[(psi.id,) + tup] = p * psi.table[tuple(sigma[list(tup)])]
    keys = list(cells)
    w = np.array([cells[c] for c in keys])
    index = {c: i for i, c in enumerate(keys)}
    obs = np.zeros(len(keys))
    for wid, row in zip(g.wids, g.vars):
        obs[index[(int(wid),) + tuple(int(v) for v in row)]] += 1
    assert chi2_ok(obs, w / w.sum() * g.m)


def test_null_is_uniform():
    spec = mixture_spec()
    g = sample_null(spec, 4, 40_000, seed=2)
    flat = np.ravel_multi_index(g.vars.T, (4, 4, 4))
    assert chi2_ok(np.bincount(flat, minlength=64), np.full(64, g.m / 64))
    ids, counts = np.unique(g.wids, return_counts=True)
    assert chi2_ok(counts, spec.weights.probs * g.m)


def test_uniform_within_pattern_when_all_labels_equal():
    spec = hsbm_to_factor_spec(symmetric_sbm(2, 5, 1))
    g = sample_planted_given(spec, np.zeros(5, np.int64), 25_000, seed=3)
    flat = g.vars[:, 0] * 5 + g.vars[:, 1]
    assert chi2_ok(np.bincount(flat, minlength=25), np.full(25, g.m / 25))


def test_poisson_clause_count():
    spec = hsbm_to_factor_spec(symmetric_sbm(2, 5, 1))
    ms = [sample_poisson_model(spec, 50, stream(3, 7, i))[1].m for i in range(2000)]
    assert abs(np.mean(ms) - 75) < 4 * np.sqrt(75 / 2000)
    sigma, g = sample_poisson_model(spec, 50, 0, planted=False)
    assert len(sigma) == 50


def test_determinism():
    spec = mixture_spec()
    a = sample_planted(spec, 30, 40, seed=stream(9, 3, 0))
    b = sample_planted(spec, 30, 40, seed=stream(9, 3, 0))
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1].vars, b[1].vars)
    h = symmetric_sbm(2, 5, 1)
    assert np.array_equal(sample_hsbm(h, 200, 4)[1].vars, sample_hsbm(h, 200, 4)[1].vars)


def test_condition_simple():
    spec = hsbm_to_factor_spec(symmetric_sbm(2, 5, 1))
    sigma, g, attempts = condition_simple(spec, 60, seed=5)
    assert is_simple(g) and g.simple and attempts >= 1
    with pytest.raises(RejectionBudgetExceeded):
        condition_simple(spec.with_degree(40.0), 6, seed=0, budget=5)


def test_gamma_extremes():
    spec = mixture_spec()
    _, g = sample_planted(spec, 20, 50, seed=6)
    same = gamma_resample(g, spec, 0.0, seed=1)
    assert np.array_equal(same.vars, g.vars) and np.array_equal(same.wids, g.wids)
    fresh, mask = gamma_resample(g, spec, 1.0, seed=1, return_mask=True)
    assert mask.all()
    assert fresh.m == 50 and not np.array_equal(fresh.vars, g.vars)
    with pytest.raises(ValueError):
        gamma_resample(g, spec, 1.5)


def test_gamma_fraction():
    spec = mixture_spec()
    _, g = sample_planted(spec, 100, 4000, seed=7)
    _, mask = gamma_resample(g, spec, 0.3, seed=2, return_mask=True)
    assert abs(mask.mean() - 0.3) < 4 * np.sqrt(0.3 * 0.7 / 4000)


def test_er_edge_count_and_simplicity():
    counts = [sample_er_hypergraph(300, 3.0, 2, stream(8, 7, i)).m for i in range(300)]
    p = 3.0 / 299
    mean = comb(300, 2) * p
    assert abs(np.mean(counts) - mean) < 4 * np.sqrt(mean * (1 - p) / 300)
    g = sample_er_hypergraph(300, 3.0, 3, 1)
    assert is_simple(g) and g.vars.shape[1] == 3


def test_hsbm_edge_counts_by_pattern():
    h = symmetric_sbm(2, 5, 1)
    sigma = np.array([0] * 100 + [1] * 100)
    within, across = [], []
    for i in range(200):
        _, g = sample_hsbm(h, 200, stream(8, 3, i), sigma=sigma)
        same = sigma[g.vars[:, 0]] == sigma[g.vars[:, 1]]
        within.append(same.sum())
        across.append((~same).sum())
    e_within = 2 * comb(100, 2) * 5 / 199
    e_across = 100 * 100 * 1 / 199
    assert abs(np.mean(within) - e_within) < 4 * np.sqrt(e_within / 200)
    assert abs(np.mean(across) - e_across) < 4 * np.sqrt(e_across / 200)


@settings(max_examples=20, deadline=None)
@given(st.integers(4, 40), st.integers(2, 3), st.integers(0, 10**6))
def test_hsbm_graphs_are_simple(n, k, seed):
    h = symmetric_sbm(2, 3.0, 1.0, k=k)
    _, g = sample_hsbm(h, n, seed)
    assert is_simple(g)
    assert np.all(np.diff(g.vars, axis=1) > 0) if g.m else True


def test_hsbm_rejects_probabilities_above_one():
    with pytest.raises(ValueError):
        sample_hsbm(symmetric_sbm(2, 50, 1), 10, 0)
