"""Threshold quantities: Phi matrices, the Xi* operator, KS threshold, B, alpha_l,
the (SYM) and (MIN) checks, F(R) and the single-vertex channel information I0."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .model import HsbmSpec, ModelSpec, WeightFunction, as_factor_spec, vertex_degrees

DEFAULT_LMAX = 64


def _table(psi):
    return psi.table if isinstance(psi, WeightFunction) else np.asarray(psi, float)


def pair_conditional_mean(table, pi, s=0, t=1):
    """E_pi[psi(sigma) | sigma_s = i, sigma_t = j] as a q x q matrix."""
    t_ = np.moveaxis(np.asarray(table, float), (s, t), (0, 1))
    for _ in range(t_.ndim - 2):
        t_ = t_ @ pi
    return t_


def compute_phi(psi, spec: ModelSpec, s=0, t=1):
    """Phi_{psi,s,t}(i, j) = xi^{-1} E_pi[psi | sigma_s=i, sigma_t=j] pi_j (slots 0-based)."""
    if s == t:
        raise ValueError("slots must differ")
    return pair_conditional_mean(_table(psi), spec.pi, s, t) * spec.pi[None, :] / spec.xi


def mean_phi(spec: ModelSpec):
    return sum(p * compute_phi(psi, spec) for psi, p in zip(spec.weights.psis, spec.weights.probs))


def check_sym(spec):
    """(SYM): E_pi[psi | sigma_s = tau] equals xi for every psi, slot s and label tau.

    Returns (ok, max absolute deviation).
    """
    spec = as_factor_spec(spec)
    worst = 0.0
    for psi in spec.weights.psis:
        for s in range(spec.k):
            t = np.moveaxis(psi.table, s, 0)
            for _ in range(spec.k - 1):
                t = t @ spec.pi
            worst = max(worst, float(np.max(np.abs(t - spec.xi))))
    return worst <= 1e-10 * max(1.0, spec.xi), worst


def xi_matrix(spec: ModelSpec, centered=True):
    """E_p[A_psi (x) A_psi] with A = Phi - 1 pi^T (centered) or A = Phi."""
    q = spec.q
    out = np.zeros((q * q, q * q))
    rank_one = np.outer(np.ones(q), spec.pi)
    for psi, p in zip(spec.weights.psis, spec.weights.probs):
        a = compute_phi(psi, spec)
        if centered:
            a = a - rank_one
        out += p * np.kron(a, a)
    return out


def _pi_symmetric_eigs(mat, pi):
    """Eigenvalues of an operator self-adjoint for the diag(weights) inner product."""
    w = np.sqrt(pi)
    sym = (w[:, None] * mat) / w[None, :]
    asym = np.max(np.abs(sym - sym.T)) if sym.size else 0.0
    if asym <= 1e-9 * max(1.0, np.max(np.abs(sym))):
        return np.linalg.eigvalsh((sym + sym.T) / 2), True
    return np.linalg.eigvals(mat), False


@dataclass
class SpectralSummary:
    phi_psi: dict
    phi: np.ndarray
    xi_star_eigs: np.ndarray
    lambda_ks: float
    d_ks: float
    sym_ok: bool
    sym_violation: float
    self_adjoint: bool
    b: np.ndarray | None = None
    b_eigs: np.ndarray | None = None
    d_ks_hsbm: float | None = None
    alphas: np.ndarray | None = None

    def to_dict(self):
        def arr(x):
            return None if x is None else np.real_if_close(np.asarray(x)).tolist()
        return {
            "d_ks": _finite(self.d_ks), "lambda_ks": self.lambda_ks,
            "eigs": arr(self.xi_star_eigs), "sym_ok": self.sym_ok,
            "sym_violation": self.sym_violation, "phi": arr(self.phi),
            "b": arr(self.b), "b_eigs": arr(self.b_eigs),
            "d_ks_hsbm": _finite(self.d_ks_hsbm), "alphas": arr(self.alphas),
        }


def _finite(x):
    if x is None:
        return None
    return "inf" if np.isinf(x) else float(x)


def ks_threshold(spec, lmax=DEFAULT_LMAX) -> SpectralSummary:
    """Eigenvalues of Xi*, lambda_KS = max |eig| and d_KS = 1 / ((k-1) lambda_KS).

    An HsbmSpec is accepted and converted to its point-mass factor form; the
    B-matrix path is then attached for comparison.
    """
    h = spec if isinstance(spec, HsbmSpec) else None
    spec = as_factor_spec(spec)
    sym_ok, viol = check_sym(spec)
    xs = xi_matrix(spec)
    eigs, self_adj = _pi_symmetric_eigs(xs, np.kron(spec.pi, spec.pi))
    eigs = np.sort(np.real_if_close(eigs))[::-1] if self_adj else eigs
    lam = float(np.max(np.abs(eigs))) if len(eigs) else 0.0
    if lam <= 1e-14:
        lam, d_ks = 0.0, np.inf
    else:
        d_ks = 1.0 / ((spec.k - 1) * lam)
    out = SpectralSummary(
        phi_psi={psi.id: compute_phi(psi, spec) for psi in spec.weights.psis},
        phi=mean_phi(spec), xi_star_eigs=eigs, lambda_ks=lam, d_ks=d_ks,
        sym_ok=sym_ok, sym_violation=viol, self_adjoint=self_adj)
    if h is not None:
        b = hsbm_b_matrix(h)
        ev = b_eigenvalues(b)
        out.b = b
        out.b_eigs = ev
        lam2 = abs(ev[1])
        out.d_ks_hsbm = np.inf if lam2 <= 1e-14 else lam2 ** -2
        out.alphas = alphas(b, lmax)
    return out


def hsbm_b_matrix(h: HsbmSpec):
    """B(i, j) = sum over i_1..i_{k-2} of M0(i_1, .., i_{k-2}, i, j) pi_j prod pi."""
    t = h.m0
    for _ in range(h.k - 2):
        t = np.tensordot(h.pi, t, axes=(0, 0))
    return t * h.pi[None, :]


def degree_condition(h: HsbmSpec):
    """Max deviation of the per-label expected degree factor from 1."""
    return float(np.max(np.abs(vertex_degrees(h.m0, h.pi) - 1)))


def b_eigenvalues(b):
    """Eigenvalues of B sorted by decreasing absolute value."""
    ev = np.linalg.eigvals(b)
    ev = np.real_if_close(ev, tol=1e6)
    return ev[np.argsort(-np.abs(ev), kind="stable")]


def _remove_perron(b):
    """B minus its rank-one part at eigenvalue 1, so tr(C^l) = tr(B^l) - 1 without
    the cancellation that swamps small alpha_l at large l."""
    vals, right = np.linalg.eig(b)
    i = int(np.argmin(np.abs(vals - 1.0)))
    if abs(vals[i] - 1.0) > 1e-9:
        return None
    lvals, left = np.linalg.eig(b.T)
    j = int(np.argmin(np.abs(lvals - 1.0)))
    r, w = np.real(right[:, i]), np.real(left[:, j])
    return b - np.outer(r, w) / np.dot(w, r)


def alphas(b, lmax=DEFAULT_LMAX, start=1):
    """alpha_l = tr(B^l) - 1 for l = start..lmax (index 0 of the result is l=start)."""
    b = np.asarray(b, float)
    c = _remove_perron(b)
    shift = 0.0 if c is not None else 1.0
    c = b if c is None else c
    out = []
    power = np.linalg.matrix_power(c, start)
    for _ in range(start, lmax + 1):
        out.append(np.trace(power) - shift)
        power = power @ c
    return np.array(out)


def alphas_from_eigs(b, lmax=DEFAULT_LMAX, start=1):
    """Same coefficients as sum over the non-leading eigenvalues of lambda_i^l."""
    ev = b_eigenvalues(b)[1:]
    ells = np.arange(start, lmax + 1)
    return np.real(np.sum(ev[None, :] ** ells[:, None], axis=1))


def factor_alphas(spec, lmax=DEFAULT_LMAX, start=1):
    """Point-mass factor specs: alpha_l from the averaged Phi, tr(Phi^l) - 1."""
    spec = as_factor_spec(spec)
    return alphas(mean_phi(spec), lmax, start)


def cycle_means(k, d, lmax=DEFAULT_LMAX, start=1):
    """Null Poisson means ((k-1) d)^l / (2 l) for l = start..lmax."""
    ells = np.arange(start, lmax + 1)
    return ((k - 1) * d) ** ells / (2 * ells)


def first_cycle_length(k):
    return 3 if k == 2 else 2


# ---------------------------------------------------------------- (MIN) and F(R)

def f_of_r(spec, r, check=True):
    """F(R) = sum over sigma, tau of E_p[psi(sigma) psi(tau)] prod_s R(sigma_s, tau_s).

    For an HsbmSpec the weight is M0 itself (so that F(pi pi^T) = 1).
    """
    r = np.asarray(r, float)
    if isinstance(spec, HsbmSpec):
        tables, probs, pi, k = [spec.m0], [1.0], spec.pi, spec.k
    else:
        tables = [p.table for p in spec.weights.psis]
        probs, pi, k = spec.weights.probs, spec.pi, spec.k
    if check:
        if (np.max(np.abs(r.sum(axis=1) - pi)) > 1e-8 or np.max(np.abs(r.sum(axis=0) - pi)) > 1e-8
                or np.any(r < -1e-12)):
            raise ValueError("R must be nonnegative with both marginals equal to pi")
    total = 0.0
    for t, p in zip(tables, probs):
        # Contract psi (x) psi with R along each of the k slot pairs.
        acc = t
        for _ in range(k):
            # Sum the current slot (axis 0) against R and move the result last.
            acc = np.tensordot(r, acc, axes=(1, 0))
            acc = np.moveaxis(acc, 0, -1)
        total += p * float(np.sum(acc * t))
    return total


def f_symmetric_hsbm(k, q, a, b, r):
    """Closed form of F for M0 = b + (a - b) 1{all labels equal} with uniform pi."""
    r = np.asarray(r, float)
    return b * b + 2 * b * (a - b) * q ** (1 - k) + (a - b) ** 2 * float(np.sum(r ** k))


def _project_rpi(r, pi, iters=500):
    """Alternating row/column scaling plus clipping onto {R >= 0, R 1 = pi, R^T 1 = pi}."""
    r = np.clip(r, 1e-15, None)
    for _ in range(iters):
        r = r * (pi / r.sum(axis=1))[:, None]
        r = r * (pi / r.sum(axis=0))[None, :]
    return r


def check_min(spec, starts=20, grid=11, seed=0, tol=1e-7):
    """Numerical verdict on whether F is minimized over R_pi at pi pi^T.

    Multi-start local search in a Sinkhorn parametrization of R_pi, plus a
    lattice scan for q <= 3. Returns a dict with the verdict and the best
    competitor found.
    """
    pi = spec.pi
    q = len(pi)
    base = f_of_r(spec, np.outer(pi, pi))
    rng = np.random.default_rng(seed)
    best_val, best_r = np.inf, None

    def objective(x):
        r = _project_rpi(np.exp(x.reshape(q, q)), pi, iters=200)
        return f_of_r(spec, r, check=False)

    for _ in range(starts):
        x0 = rng.normal(scale=2.0, size=q * q)
        res = minimize(objective, x0, method="Nelder-Mead" if q * q <= 4 else "Powell",
                       options={"maxiter": 4000, "xatol": 1e-8, "fatol": 1e-12})
        r = _project_rpi(np.exp(res.x.reshape(q, q)), pi, iters=200)
        v = f_of_r(spec, r, check=False)
        if v < best_val:
            best_val, best_r = v, r
    if q <= 3:
        for r in _lattice_rpi(pi, grid):
            v = f_of_r(spec, r, check=False)
            if v < best_val - 1e-15:
                best_val, best_r = v, r
    dist = float(np.abs(best_r - np.outer(pi, pi)).sum())
    ok = best_val >= base - tol and (best_val > base + tol or dist < 1e-3)
    return {"min_at_product": bool(ok), "f_product": base, "f_best": best_val,
            "best_r": best_r, "distance": dist, "heuristic": True}


def _lattice_rpi(pi, grid):
    """Points of R_pi obtained by fixing the free (q-1)^2 block on a lattice."""
    q = len(pi)
    free = (q - 1) * (q - 1)
    axes = [np.linspace(0, min(pi), grid)] * free
    for vals in itertools.product(*axes):
        r = np.zeros((q, q))
        r[:q - 1, :q - 1] = np.reshape(vals, (q - 1, q - 1))
        r[:q - 1, q - 1] = pi[:q - 1] - r[:q - 1, :q - 1].sum(axis=1)
        r[q - 1, :] = pi - r[:q - 1, :].sum(axis=0)
        if np.all(r >= -1e-12):
            yield np.clip(r, 0, None)


# ---------------------------------------------------------------- channel information

def transition_matrix(q, lam):
    """lam * I + (1 - lam) / q * 1 1^T."""
    return lam * np.eye(q) + (1 - lam) / q * np.ones((q, q))


def i0(q, lam):
    """Mutual information between a uniform label and its image under transition_matrix."""
    if not -1 / (q - 1) < lam < 1:
        raise ValueError("lambda must lie in (-1/(q-1), 1)")
    a = 1 + (q - 1) * lam
    out = a / q * np.log(a)
    if lam != 1:
        out += (q - 1) * (1 - lam) / q * np.log(1 - lam)
    return float(out)


def channel_information(joint):
    """Mutual information of a joint probability table, by direct summation."""
    joint = np.asarray(joint, float)
    px = joint.sum(axis=1, keepdims=True)
    py = joint.sum(axis=0, keepdims=True)
    mask = joint > 0
    return float(np.sum(joint[mask] * np.log(joint[mask] / (px * py)[mask])))
