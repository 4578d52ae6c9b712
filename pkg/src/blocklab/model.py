"""Core value types: weight functions, model specs, factor graphs, overlaps.

Community labels are 0-based inside the library and 1-based in every
external format (JSON specs, graph text files, CLI output).
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from math import comb
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

MAX_TABLE_SIZE = 10**6
ATOL = 1e-10


class SpecError(ValueError):
    """Raised when a model specification violates its invariants."""


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class WeightFunction:
    """A strictly positive table psi on [q]^k, stored densely with shape (q,)*k."""

    id: int
    table: np.ndarray

    def __post_init__(self):
        t = _frozen(self.table)
        if t.ndim < 1 or len(set(t.shape)) != 1:
            raise SpecError("weight table must have shape (q,)*k")
        if t.size > MAX_TABLE_SIZE:
            raise SpecError(f"q^k = {t.size} exceeds the cap {MAX_TABLE_SIZE}")
        if not np.all(np.isfinite(t)) or np.any(t <= 0):
            raise SpecError(f"weight function {self.id} must be strictly positive")
        object.__setattr__(self, "table", t)

    @property
    def k(self):
        return self.table.ndim

    @property
    def q(self):
        return self.table.shape[0]

    def __call__(self, *labels):
        return float(self.table[tuple(labels)])


def permute_weight(psi: WeightFunction, theta) -> WeightFunction:
    """Return psi^theta with psi^theta(s_1..s_k) = psi(s_theta(1), ..., s_theta(k)).

    ``theta`` is a 0-based permutation of range(k).
    """
    theta = tuple(int(t) for t in theta)
    if len(theta) != psi.k:
        raise SpecError(f"permutation of length {len(theta)} for arity {psi.k}")
    if sorted(theta) != list(range(psi.k)):
        raise SpecError(f"{theta} is not a permutation of range({psi.k})")
    # out[s] = table[s[theta[0]], ..., s[theta[k-1]]]; axis j of the input is
    # indexed by output axis theta[j], so the output is a transpose.
    inverse = np.argsort(theta)
    return WeightFunction(psi.id, np.transpose(psi.table, axes=inverse))


@dataclass(frozen=True, eq=False)
class WeightPrior:
    """Finite prior p over weight functions, closed under coordinate permutations."""

    psis: tuple
    probs: np.ndarray

    def __post_init__(self):
        psis = tuple(self.psis)
        probs = _frozen(self.probs)
        if not psis or len(psis) != len(probs):
            raise SpecError("prior needs one probability per weight function")
        if np.any(probs <= 0) or abs(probs.sum() - 1) > 1e-12:
            raise SpecError("prior probabilities must be positive and sum to 1")
        shapes = {p.table.shape for p in psis}
        if len(shapes) != 1:
            raise SpecError("all weight functions must share (q, k)")
        ids = [p.id for p in psis]
        if len(set(ids)) != len(ids):
            raise SpecError("weight function ids must be distinct")
        object.__setattr__(self, "psis", psis)
        object.__setattr__(self, "probs", probs)
        self._check_closure()

    def _check_closure(self):
        k = self.psis[0].k
        for psi, p in zip(self.psis, self.probs):
            for theta in itertools.permutations(range(k)):
                img = permute_weight(psi, theta).table
                if not any(np.allclose(img, other.table, atol=ATOL, rtol=0)
                           and abs(p - po) <= 1e-12
                           for other, po in zip(self.psis, self.probs)):
                    raise SpecError(
                        f"prior is not closed under permutation {theta} of weight {psi.id}")

    @property
    def k(self):
        return self.psis[0].k

    @property
    def q(self):
        return self.psis[0].q

    def index(self, wid):
        for i, psi in enumerate(self.psis):
            if psi.id == wid:
                return i
        raise KeyError(wid)

    def stacked(self):
        """All tables as one array of shape (|Psi|, q, ..., q)."""
        return np.stack([p.table for p in self.psis])


def symmetrize(psis, probs=None) -> WeightPrior:
    """Close a list of tables under coordinate permutations, splitting mass evenly.

    Each input table receives its probability (uniform by default); that mass
    is shared equally among its distinct permuted images.
    """
    tables = [np.asarray(t.table if isinstance(t, WeightFunction) else t, float) for t in psis]
    probs = np.full(len(tables), 1 / len(tables)) if probs is None else np.asarray(probs, float)
    k = tables[0].ndim
    out_tables, out_probs = [], []
    for t, p in zip(tables, probs):
        images = []
        for theta in itertools.permutations(range(k)):
            img = np.transpose(t, axes=np.argsort(theta))
            if not any(np.allclose(img, u, atol=ATOL, rtol=0) for u in images):
                images.append(img)
        for img in images:
            for j, u in enumerate(out_tables):
                if np.allclose(img, u, atol=ATOL, rtol=0):
                    out_probs[j] += p / len(images)
                    break
            else:
                out_tables.append(img)
                out_probs.append(p / len(images))
    funcs = tuple(WeightFunction(i, t) for i, t in enumerate(out_tables))
    return WeightPrior(funcs, np.array(out_probs))


def _check_pi(pi, q):
    pi = _frozen(pi)
    if pi.shape != (q,):
        raise SpecError(f"pi must have length q={q}")
    if np.any(pi <= 0) or abs(pi.sum() - 1) > 1e-12:
        raise SpecError("pi must be positive and sum to 1")
    return pi


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Planted factor model: arity k, q communities, prior pi, weight prior, degree d."""

    k: int
    q: int
    pi: np.ndarray
    weights: WeightPrior
    d: float

    def __post_init__(self):
        if self.k < 2 or self.q < 2:
            raise SpecError("need k >= 2 and q >= 2")
        if self.weights.k != self.k or self.weights.q != self.q:
            raise SpecError("weight tables do not match (q, k)")
        if not self.d > 0:
            raise SpecError("average degree must be positive")
        object.__setattr__(self, "pi", _check_pi(self.pi, self.q))
        if not (np.isfinite(self.xi) and self.xi > 0):
            raise SpecError("xi must be finite and positive")

    @property
    def xi(self):
        """E_{p,pi} psi(sigma) for sigma i.i.d. from pi."""
        return float(self.weights.probs @ np.array([product_mean(p.table, self.pi)
                                                    for p in self.weights.psis]))

    def with_degree(self, d):
        return ModelSpec(self.k, self.q, self.pi, self.weights, d)


def product_mean(table, pi):
    """E[table(sigma)] for sigma with i.i.d. coordinates drawn from pi."""
    out = np.asarray(table, float)
    for _ in range(out.ndim):
        out = out @ pi
    return float(out)


@dataclass(frozen=True, eq=False)
class HsbmSpec:
    """Hypergraph SBM: symmetric tensor M0 normalized so that E_pi M0 = 1, degree d."""

    k: int
    q: int
    pi: np.ndarray
    m0: np.ndarray
    d: float
    degree_balanced: bool = field(init=False)

    def __post_init__(self):
        if self.k < 2 or self.q < 2:
            raise SpecError("need k >= 2 and q >= 2")
        m0 = _frozen(self.m0)
        if m0.shape != (self.q,) * self.k:
            raise SpecError("m0 must have shape (q,)*k")
        if m0.size > MAX_TABLE_SIZE:
            raise SpecError(f"q^k = {m0.size} exceeds the cap {MAX_TABLE_SIZE}")
        if np.any(m0 <= 0):
            raise SpecError("m0 entries must be positive")
        for theta in itertools.permutations(range(self.k)):
            if not np.allclose(np.transpose(m0, theta), m0, atol=ATOL, rtol=0):
                raise SpecError("m0 must be a symmetric tensor")
        pi = _check_pi(self.pi, self.q)
        if abs(product_mean(m0, pi) - 1) > ATOL:
            raise SpecError("m0 must satisfy sum M0 prod(pi) = 1")
        if not self.d > 0:
            raise SpecError("average degree must be positive")
        object.__setattr__(self, "m0", m0)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "degree_balanced",
                           bool(np.max(np.abs(vertex_degrees(m0, pi) - 1)) <= ATOL))

    @property
    def m(self):
        return self.d * self.m0

    def with_degree(self, d):
        return HsbmSpec(self.k, self.q, self.pi, self.m0, d)


def vertex_degrees(m0, pi):
    """sum over i_1..i_{k-1} of M0(i_1, ..., i_{k-1}, i) prod pi, for each i."""
    out = np.asarray(m0, float)
    for _ in range(out.ndim - 1):
        out = np.tensordot(pi, out, axes=(0, 0))
    return out


def symmetric_hsbm_tensor(k, q, a, b):
    """Tensor with value a when all k labels agree and b otherwise."""
    t = np.full((q,) * k, float(b))
    for i in range(q):
        t[(i,) * k] = a
    return t


def symmetric_sbm(q, a, b, k=2) -> HsbmSpec:
    """Symmetric (H)SBM with uniform pi, entries a on the diagonal and b elsewhere.

    The tensor is rescaled by its pi-average d, so M = d * M0 has entries a and b.
    """
    pi = np.full(q, 1 / q)
    t = symmetric_hsbm_tensor(k, q, a, b)
    d = product_mean(t, pi)
    return HsbmSpec(k, q, pi, t / d, d)


def sbm_from_lambda(q, lam, d) -> HsbmSpec:
    """Graph SBM (k=2) with transition parameter lam = (a-b)/(a+(q-1)b) and degree d."""
    if not -1 / (q - 1) < lam < 1:
        raise SpecError("lambda must lie in (-1/(q-1), 1)")
    a = d * (1 + (q - 1) * lam)
    b = d * (1 - lam)
    return symmetric_sbm(q, a, b)


def hsbm_to_factor_spec(h: HsbmSpec) -> ModelSpec:
    """View an HSBM as a planted factor model with a point-mass prior on M = d*M0."""
    psi = WeightFunction(0, h.m)
    return ModelSpec(h.k, h.q, h.pi, WeightPrior((psi,), np.array([1.0])), h.d)


def erdos_renyi_spec(k, d, q=2):
    """Factor spec with a constant weight: planted and null models coincide."""
    pi = np.full(q, 1 / q)
    psi = WeightFunction(0, np.ones((q,) * k))
    return ModelSpec(k, q, pi, WeightPrior((psi,), np.array([1.0])), d)


@dataclass(frozen=True, eq=False)
class FactorGraph:
    """Factor graph on n variables; clause a has ordered neighbours vars[a] and weight id wids[a]."""

    n: int
    vars: np.ndarray
    wids: np.ndarray
    simple: bool = False

    def __post_init__(self):
        v = np.asarray(self.vars, dtype=np.int64)
        w = np.asarray(self.wids, dtype=np.int64)
        if v.ndim != 2:
            v = v.reshape(len(w), -1) if len(w) else v.reshape(0, 0)
        if len(v) != len(w):
            raise ValueError("one weight id per clause is required")
        if v.size and (v.min() < 0 or v.max() >= self.n):
            raise ValueError("clause variable outside range(n)")
        v.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "vars", v)
        object.__setattr__(self, "wids", w)
        if self.simple and not is_simple(self):
            raise ValueError("graph flagged simple but has repeated variables or clauses")

    @property
    def m(self):
        return len(self.wids)

    @property
    def k(self):
        return self.vars.shape[1] if self.vars.ndim == 2 and self.vars.size else 0

    def mark_simple(self):
        return FactorGraph(self.n, self.vars, self.wids, simple=True)

    def edge_set(self):
        return {tuple(sorted(map(int, row))) for row in self.vars}


def empty_graph(n, k):
    return FactorGraph(n, np.zeros((0, k), np.int64), np.zeros(0, np.int64), simple=True)


def is_simple(g: FactorGraph) -> bool:
    """Every clause touches k distinct variables and no two clauses share a variable set."""
    if g.m == 0:
        return True
    s = np.sort(g.vars, axis=1)
    if np.any(s[:, 1:] == s[:, :-1]):
        return False
    return len(np.unique(s, axis=0)) == g.m


def overlap_matrix(s1, s2, q) -> np.ndarray:
    """R(i, j) = fraction of positions v with s1[v] = i and s2[v] = j."""
    s1 = np.asarray(s1)
    s2 = np.asarray(s2)
    if s1.shape != s2.shape:
        raise ValueError("assignments must have equal length")
    r = np.zeros((q, q))
    np.add.at(r, (s1, s2), 1.0)
    return r / len(s1)


def _best_permutation_value(ratio):
    q = ratio.shape[0]
    if q <= 8:
        return max(ratio[np.arange(q), list(perm)].sum()
                   for perm in itertools.permutations(range(q)))
    rows, cols = linear_sum_assignment(ratio, maximize=True)
    return ratio[rows, cols].sum()


def overlap_A(s1, s2, q) -> float:
    """max over relabelings of the average per-class recovery rate of s1 by s2.

    A class of s1 with no members contributes 0.
    """
    counts = overlap_matrix(s1, s2, q) * len(s1)
    sizes = counts.sum(axis=1, keepdims=True)
    ratio = np.divide(counts, sizes, out=np.zeros_like(counts), where=sizes > 0)
    return float(_best_permutation_value(ratio) / q)


def overlap_A_tilde(s1, s2, pi) -> float:
    """Like overlap_A but with class sizes replaced by n * pi_i."""
    pi = np.asarray(pi, float)
    q = len(pi)
    ratio = overlap_matrix(s1, s2, q) / pi[:, None]
    return float(_best_permutation_value(ratio) / q)


# ---------------------------------------------------------------- JSON and text IO

def spec_to_dict(spec):
    if isinstance(spec, HsbmSpec):
        return {"k": spec.k, "q": spec.q, "pi": spec.pi.tolist(), "d": spec.d,
                "m0": spec.m0.tolist()}
    return {"k": spec.k, "q": spec.q, "pi": spec.pi.tolist(), "d": spec.d,
            "weights": [{"id": psi.id, "p": float(p), "table": psi.table.tolist()}
                        for psi, p in zip(spec.weights.psis, spec.weights.probs)]}


def spec_from_dict(obj):
    """Build a ModelSpec or HsbmSpec from the canonical JSON layout.

    Besides the explicit "weights"/"m0" forms, a shorthand
    {"sbm": {"q":..., "a":..., "b":..., "k": 2}} or {"sbm": {"q", "lambda", "d"}}
    is accepted for symmetric block models.
    """
    try:
        if "sbm" in obj:
            s = obj["sbm"]
            if "lambda" in s:
                return sbm_from_lambda(int(s["q"]), float(s["lambda"]), float(s["d"]))
            return symmetric_sbm(int(s["q"]), float(s["a"]), float(s["b"]), int(s.get("k", 2)))
        k, q, d = int(obj["k"]), int(obj["q"]), float(obj["d"])
        pi = np.asarray(obj.get("pi", np.full(q, 1 / q)), float)
        if "m0" in obj:
            return HsbmSpec(k, q, pi, np.asarray(obj["m0"], float), d)
        entries = obj["weights"]
        psis = tuple(WeightFunction(int(e.get("id", i)), np.asarray(e["table"], float))
                     for i, e in enumerate(entries))
        probs = np.array([float(e["p"]) for e in entries])
        return ModelSpec(k, q, pi, WeightPrior(psis, probs), d)
    except KeyError as exc:
        raise SpecError(f"missing key {exc} in model spec") from None


def load_spec(path):
    return spec_from_dict(json.loads(Path(path).read_text()))


def save_spec(spec, path):
    Path(path).write_text(json.dumps(spec_to_dict(spec), indent=2))


def as_factor_spec(spec) -> ModelSpec:
    return hsbm_to_factor_spec(spec) if isinstance(spec, HsbmSpec) else spec


def write_graph(g: FactorGraph, path):
    """Header 'n m k', then one line 'wid v1 ... vk' per clause with 1-based variables."""
    k = g.vars.shape[1] if g.vars.ndim == 2 else 0
    lines = [f"{g.n} {g.m} {k}"]
    lines += [" ".join(map(str, [int(w), *(int(v) + 1 for v in row)]))
              for w, row in zip(g.wids, g.vars)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_graph(path) -> FactorGraph:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    n, m, k = map(int, rows[0])
    body = np.array([list(map(int, r)) for r in rows[1:1 + m]], dtype=np.int64).reshape(m, k + 1)
    g = FactorGraph(n, body[:, 1:] - 1, body[:, 0])
    return g.mark_simple() if is_simple(g) else g


def write_labels(sigma, path):
    Path(path).write_text(json.dumps({"labels": [int(s) + 1 for s in sigma]}))


def read_labels(path):
    return np.array(json.loads(Path(path).read_text())["labels"], dtype=np.int64) - 1


def n_hyperedge_slots(n, k):
    """C(n, k-1), the normalizer of hyperedge inclusion probabilities."""
    return comb(n, k - 1)
