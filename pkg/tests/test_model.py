import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blocklab.model import (FactorGraph, HsbmSpec, ModelSpec, SpecError, WeightFunction,
                            WeightPrior, empty_graph, hsbm_to_factor_spec, is_simple, load_spec,
                            overlap_A, overlap_A_tilde, overlap_matrix, permute_weight,
                            read_graph, read_labels, save_spec, sbm_from_lambda, spec_from_dict,
                            spec_to_dict, symmetric_hsbm_tensor, symmetric_sbm, symmetrize,
                            write_graph, write_labels)


def remap(table, theta):
    """Independent entry-by-entry construction of psi^theta."""
    q, k = table.shape[0], table.ndim
    out = np.empty_like(table)
    for s in itertools.product(range(q), repeat=k):
        out[s] = table[tuple(s[theta[j]] for j in range(k))]
    return out


def distinct_table(q, k, seed=0):
    return np.random.default_rng(seed).permutation(q ** k).reshape((q,) * k) + 1.0


def test_identity_permutation_keeps_table():
    psi = WeightFunction(0, distinct_table(3, 3))
    assert np.array_equal(permute_weight(psi, (0, 1, 2)).table, psi.table)


def test_swap_on_pairs():
    psi = WeightFunction(0, np.array([[1.0, 3.0], [5.0, 7.0]]))
    # labels 1-based in the statement: psi(1,2)=3, psi(2,1)=5
    assert permute_weight(psi, (1, 0))(0, 1) == 5.0


def test_cyclic_shift_matches_remap():
    t = distinct_table(3, 3, seed=4)
    for theta in itertools.permutations(range(3)):
        assert np.array_equal(permute_weight(WeightFunction(0, t), theta).table, remap(t, theta))


def test_permutation_arity_mismatch():
    with pytest.raises(SpecError):
        permute_weight(WeightFunction(0, np.ones((2, 2))), (0, 1, 2))


@pytest.mark.parametrize("k", [2, 3])
def test_composition_exhaustive(k):
    psi = WeightFunction(0, distinct_table(2, k, seed=k))
    for theta in itertools.permutations(range(k)):
        for eta in itertools.permutations(range(k)):
            twice = permute_weight(permute_weight(psi, theta), eta).table
            eta_theta = tuple(eta[theta[i]] for i in range(k))
            assert np.array_equal(twice, permute_weight(psi, eta_theta).table)


@settings(max_examples=40, deadline=None)
@given(st.permutations(range(4)), st.permutations(range(4)))
def test_composition_k4(theta, eta):
    psi = WeightFunction(0, distinct_table(2, 4, seed=1))
    twice = permute_weight(permute_weight(psi, theta), eta).table
    assert np.array_equal(twice, permute_weight(psi, [eta[theta[i]] for i in range(4)]).table)


def test_prior_must_be_closed():
    t = np.array([[1.0, 2.0], [3.0, 4.0]])
    with pytest.raises(SpecError):
        WeightPrior((WeightFunction(0, t),), np.array([1.0]))
    prior = symmetrize([t])
    assert len(prior.psis) == 2 and np.allclose(prior.probs, 0.5)


def test_weights_must_be_positive():
    with pytest.raises(SpecError):
        WeightFunction(0, np.array([[1.0, 0.0], [0.0, 1.0]]))


def test_table_size_cap():
    with pytest.raises(SpecError):
        WeightFunction(0, np.ones((11,) * 6))


def test_modelspec_validation():
    prior = WeightPrior((WeightFunction(0, np.ones((2, 2))),), np.array([1.0]))
    with pytest.raises(SpecError):
        ModelSpec(2, 2, np.array([0.7, 0.7]), prior, 1.0)
    with pytest.raises(SpecError):
        ModelSpec(2, 2, np.array([0.5, 0.5]), prior, 0.0)


def test_hsbm_validation():
    with pytest.raises(SpecError):
        HsbmSpec(2, 2, np.array([0.5, 0.5]), np.array([[2.0, 1.0], [0.5, 2.0]]), 1.0)
    with pytest.raises(SpecError):
        HsbmSpec(2, 2, np.array([0.5, 0.5]), np.array([[2.0, 1.0], [1.0, 2.0]]), 1.0)
    h = HsbmSpec(2, 2, np.array([0.5, 0.5]), np.array([[1.5, 0.5], [0.5, 1.5]]), 1.0)
    assert h.degree_balanced
    u = HsbmSpec(2, 2, np.array([0.5, 0.5]), np.array([[2.0, 0.5], [0.5, 1.0]]), 1.0)
    assert not u.degree_balanced


def test_sbm_to_factor_spec():
    f = hsbm_to_factor_spec(symmetric_sbm(2, 5, 1))
    assert f.d == 3
    assert len(f.weights.psis) == 1 and f.weights.probs[0] == 1
    assert np.allclose(f.weights.psis[0].table, [[5, 1], [1, 5]])


def test_all_ones_tensor_is_constant_weight():
    f = hsbm_to_factor_spec(HsbmSpec(3, 2, np.array([0.5, 0.5]), np.ones((2, 2, 2)), 2.5))
    assert np.allclose(f.weights.psis[0].table, 2.5)


def test_symmetric_k3_tensor():
    t = symmetric_hsbm_tensor(3, 2, 7.0, 2.0)
    for s in itertools.product(range(2), repeat=3):
        assert t[s] == (7.0 if len(set(s)) == 1 else 2.0)
    h = symmetric_sbm(2, 7.0, 2.0, k=3)
    assert np.allclose(h.m, t)


def test_sbm_from_lambda():
    h = sbm_from_lambda(2, 2 / 3, 3.0)
    assert np.allclose(h.m, [[5, 1], [1, 5]])


def test_overlap_matrix_examples():
    assert np.allclose(overlap_matrix([0, 1], [0, 1], 2), [[0.5, 0], [0, 0.5]])
    assert np.allclose(overlap_matrix([0, 0, 1, 1], [1, 1, 0, 0], 2), [[0, 0.5], [0.5, 0]])


def test_overlap_matrix_against_loop():
    rng = np.random.default_rng(3)
    s1, s2 = rng.integers(0, 3, 6), rng.integers(0, 3, 6)
    r = np.zeros((3, 3))
    for a, b in zip(s1, s2):
        r[a, b] += 1 / 6
    assert np.allclose(overlap_matrix(s1, s2, 3), r, atol=1e-15)


def test_overlap_matrix_length_mismatch():
    with pytest.raises(ValueError):
        overlap_matrix([0, 1], [0], 2)


def test_overlap_A_examples():
    assert overlap_A([0, 0, 1, 1], [1, 1, 0, 0], 2) == 1
    assert overlap_A([0, 0, 1, 1], [0, 1, 0, 1], 2) == 0.5
    assert overlap_A([0, 1, 2, 2], [0, 1, 2, 2], 3) == 1


def test_overlap_A_empty_class_contributes_zero():
    assert overlap_A([0, 0, 0], [0, 0, 0], 2) == 0.5


def test_overlap_A_large_q_uses_assignment():
    rng = np.random.default_rng(0)
    s = rng.permutation(np.repeat(np.arange(10), 3))
    perm = rng.permutation(10)
    assert overlap_A(s, perm[s], 10) == pytest.approx(1.0)


def test_overlap_A_tilde():
    pi = np.array([0.5, 0.5])
    assert overlap_A_tilde([0, 0, 1, 1], [1, 1, 0, 0], pi) == pytest.approx(1.0)


labels = st.lists(st.integers(0, 2), min_size=3, max_size=12)


@settings(max_examples=60, deadline=None)
@given(labels, st.data())
def test_overlap_properties(s1, data):
    s1 = np.array(s1)
    s2 = np.array(data.draw(st.lists(st.integers(0, 2), min_size=len(s1), max_size=len(s1))))
    r = overlap_matrix(s1, s2, 3)
    assert np.allclose(r.sum(axis=1), np.bincount(s1, minlength=3) / len(s1))
    assert np.allclose(r.sum(axis=0), np.bincount(s2, minlength=3) / len(s1))
    a = overlap_A(s1, s2, 3)
    perm = np.array(data.draw(st.permutations(range(3))))
    assert overlap_A(s1, perm[s2], 3) == pytest.approx(a)
    assert overlap_A(perm[s1], perm[s2], 3) == pytest.approx(a)
    if len(set(s1.tolist())) == 3:
        assert a >= 1 / 3 - 1e-12


def test_spec_json_roundtrip(tmp_path):
    h = symmetric_sbm(3, 4.0, 1.0)
    save_spec(h, tmp_path / "h.json")
    h2 = load_spec(tmp_path / "h.json")
    assert isinstance(h2, HsbmSpec) and np.allclose(h2.m, h.m)
    f = hsbm_to_factor_spec(h)
    f2 = spec_from_dict(spec_to_dict(f))
    assert np.allclose(f2.weights.psis[0].table, f.weights.psis[0].table)
    assert np.allclose(spec_from_dict({"sbm": {"q": 2, "lambda": 2 / 3, "d": 3}}).m,
                       [[5, 1], [1, 5]])
    with pytest.raises(SpecError):
        spec_from_dict({"k": 2, "q": 2})


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.integers(0, 6), st.integers(2, 3), st.integers(0, 10**6))
def test_graph_text_roundtrip(n, m, k, seed):
    import tempfile
    from pathlib import Path
    rng = np.random.default_rng(seed)
    g = FactorGraph(n, rng.integers(0, n, (m, k)), rng.integers(0, 3, m))
    with tempfile.TemporaryDirectory() as d:
        p = Path(d) / "g.txt"
        write_graph(g, p)
        first = p.read_text().splitlines()[0]
        assert first == f"{n} {m} {k}"
        h = read_graph(p)
        assert np.array_equal(h.vars.reshape(m, k), g.vars.reshape(m, k))
        assert np.array_equal(h.wids, g.wids)
        assert h.simple == is_simple(g)
        lp = Path(d) / "l.json"
        sigma = rng.integers(0, 3, n)
        write_labels(sigma, lp)
        assert min(json.loads(lp.read_text())["labels"]) >= 1
        assert np.array_equal(read_labels(lp), sigma)


def test_is_simple():
    assert is_simple(empty_graph(3, 2))
    assert not is_simple(FactorGraph(3, [[0, 0]], [0]))
    assert not is_simple(FactorGraph(3, [[0, 1], [1, 0]], [0, 0]))
    assert is_simple(FactorGraph(3, [[0, 1], [1, 2]], [0, 0]))
    with pytest.raises(ValueError):
        FactorGraph(3, [[0, 0]], [0], simple=True)
    with pytest.raises(ValueError):
        FactorGraph(3, [[0, 3]], [0])
