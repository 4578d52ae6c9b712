"""Command-line entry point.

Every command prints its JSON document and writes it to a new timestamped
file under --out. Numerical records live under "records"; the timestamp,
version and config digest live under "metadata", so reruns with the same
seed give identical "records".

Exit codes: 0 success, 2 configuration error, 3 some grid cells failed.
"""
from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import itertools
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .cycles import count_hyper_cycles, count_zeta_cycles
from .harness import default_kn, power_experiment, weak_recovery_probe
from .limit_law import DivergentRegime, optimal_power
from .model import (HsbmSpec, SpecError, as_factor_spec, load_spec, read_graph, spec_from_dict,
                    spec_to_dict, write_graph, write_labels)
from .rng import ROLE_GENERIC, run_indexed, stream
from .samplers import (condition_simple, gamma_resample, sample_er_hypergraph, sample_hsbm,
                       sample_poisson_model)
from .spectral import (DEFAULT_LMAX, check_min, cycle_means, factor_alphas, first_cycle_length,
                       hsbm_b_matrix, i0, ks_threshold)
from .spectral import alphas as b_alphas

EXIT_CONFIG = 2
EXIT_PARTIAL = 3


class ConfigError(click.ClickException):
    exit_code = EXIT_CONFIG


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(np.real_if_close(x).tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if np.isnan(x):
            return None
        return "inf" if np.isinf(x) else x
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def _dump(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True)


def _digest(obj):
    return hashlib.sha256(json.dumps(_jsonable(obj), sort_keys=True).encode()).hexdigest()[:16]


def _stamp():
    return _dt.datetime.now(_dt.timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")


def _emit(ctx, command, config, records, csv_rows=None):
    out = Path(ctx.obj["out"])
    out.mkdir(parents=True, exist_ok=True)
    stamp = _stamp()
    doc = {"metadata": {"command": command, "timestamp": stamp, "version": __version__,
                        "config_digest": _digest(config), "config": config},
           "records": records}
    text = _dump(doc)
    path = out / f"{command}-{stamp}.json"
    path.write_text(text)
    if csv_rows:
        _write_csv(out / f"{command}-{stamp}.csv", csv_rows)
    click.echo(_dump(records))
    return path


def _write_csv(path, rows):
    cols = []
    for r in rows:
        cols += [c for c in r if c not in cols]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({c: _jsonable(r.get(c)) for c in cols})
    Path(path).write_text(buf.getvalue())


def _load_spec(path_or_obj):
    try:
        if isinstance(path_or_obj, dict):
            return spec_from_dict(path_or_obj)
        return load_spec(path_or_obj)
    except (OSError, ValueError, SpecError) as exc:
        raise ConfigError(f"cannot load model spec: {exc}") from None


def _load_graph(path):
    try:
        return read_graph(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read graph {path}: {exc}") from None


@click.group()
@click.version_option(__version__)
@click.option("--seed", type=int, default=0, show_default=True, help="Master seed.")
@click.option("--workers", type=int, default=None,
              help="Worker processes (default: BLOCKLAB_WORKERS or 1).")
@click.option("--out", type=click.Path(file_okay=False), default="results", show_default=True,
              help="Directory for result files.")
@click.pass_context
def main(ctx, seed, workers, out):
    """Block-model detection experiments."""
    ctx.ensure_object(dict)
    ctx.obj.update(seed=seed, workers=workers, out=out)


# ---------------------------------------------------------------- sample

@main.command()
@click.option("--model", type=click.Choice(["factor", "hsbm", "er"]), required=True)
@click.option("--n", "n", type=int, required=True)
@click.option("--d", "d", type=float, default=None, help="Override the spec's degree.")
@click.option("--k", "k", type=int, default=2, show_default=True, help="Arity for --model er.")
@click.option("--spec", "spec_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--count", type=int, default=1, show_default=True)
@click.option("--simple", is_flag=True, help="Condition factor draws on being simple.")
@click.option("--null", "null", is_flag=True, help="Draw from the null factor model.")
@click.option("--gamma", type=float, default=None, help="Resample each clause with this probability.")
@click.pass_context
def sample(ctx, model, n, d, k, spec_path, count, simple, null, gamma):
    """Draw graphs; writes graph text files plus label sidecars."""
    seed = ctx.obj["seed"]
    spec = None
    if model != "er":
        if spec_path is None:
            raise ConfigError("--spec is required for factor and hsbm models")
        spec = _load_spec(spec_path)
        if d is not None:
            spec = spec.with_degree(d)
    elif d is None:
        raise ConfigError("--d is required for --model er")
    out = Path(ctx.obj["out"])
    out.mkdir(parents=True, exist_ok=True)
    stamp = _stamp()
    records = []
    for i in range(count):
        rng = stream(seed, ROLE_GENERIC, i)
        sigma, attempts = None, 1
        if model == "er":
            g = sample_er_hypergraph(n, d, k, rng)
        elif model == "hsbm":
            if not isinstance(spec, HsbmSpec):
                raise ConfigError("--model hsbm needs an m0 spec")
            sigma, g = sample_hsbm(spec, n, rng)
        else:
            fspec = as_factor_spec(spec)
            if simple:
                sigma, g, attempts = condition_simple(fspec, n, rng, planted=not null)
            else:
                sigma, g = sample_poisson_model(fspec, n, rng, planted=not null)
            if gamma is not None:
                g = gamma_resample(g, fspec, gamma, rng)
        gpath = out / f"graph-{stamp}-{i}.txt"
        write_graph(g, gpath)
        rec = {"index": i, "graph": gpath.name, "n": n, "m": g.m, "simple": bool(g.simple),
               "attempts": attempts, "seed": seed}
        if sigma is not None:
            lpath = out / f"graph-{stamp}-{i}.labels.json"
            write_labels(sigma, lpath)
            rec["labels"] = lpath.name
        records.append(rec)
    _emit(ctx, "sample", {"model": model, "n": n, "d": d, "k": k, "spec": spec_path,
                          "count": count, "simple": simple, "null": null, "gamma": gamma,
                          "seed": seed}, records)


# ---------------------------------------------------------------- thresholds

def _sbm_lambda(h):
    """lambda when h is a symmetric graph SBM with uniform prior, else None."""
    if not isinstance(h, HsbmSpec) or h.k != 2 or not np.allclose(h.pi, 1 / h.q):
        return None
    diag = np.diag(h.m)
    off = h.m[~np.eye(h.q, dtype=bool)]
    if np.ptp(diag) > 1e-12 or np.ptp(off) > 1e-12:
        return None
    a, b = diag[0], off[0]
    return float((a - b) / (a + (h.q - 1) * b))


def thresholds_report(spec, lmax=DEFAULT_LMAX, with_min=True):
    summ = ks_threshold(spec, lmax)
    rep = summ.to_dict()
    rep["d"] = spec.d
    rep["alphas"] = (summ.alphas if summ.alphas is not None
                     else factor_alphas(spec, lmax)).tolist()
    if with_min:
        rep["min_verdict"] = check_min(as_factor_spec(spec) if not isinstance(spec, HsbmSpec)
                                       else spec)
    lam = _sbm_lambda(spec)
    if lam is not None:
        rep["lambda"] = lam
        rep["i0"] = i0(spec.q, lam)
    return rep


@main.command()
@click.option("--spec", "spec_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--lmax", type=int, default=DEFAULT_LMAX, show_default=True)
@click.option("--no-min", is_flag=True, help="Skip the numerical (MIN) search.")
@click.pass_context
def thresholds(ctx, spec_path, lmax, no_min):
    """Spectral summary: d_KS, eigenvalues, alpha_l, (SYM) and (MIN) checks."""
    spec = _load_spec(spec_path)
    _emit(ctx, "thresholds", {"spec": spec_to_dict(spec), "lmax": lmax},
          thresholds_report(spec, lmax, not no_min))


# ---------------------------------------------------------------- cycles

@main.command()
@click.option("--graph", "graph_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--kmax", type=int, default=6, show_default=True)
@click.option("--zeta", is_flag=True, help="Also list signed cycle counts.")
@click.pass_context
def cycles(ctx, graph_path, kmax, zeta):
    """Cycle counts X_l of a simple graph."""
    g = _load_graph(graph_path)
    if not g.simple:
        raise ConfigError("graph is not simple; cycle counts need a simple graph")
    rec = {"counts": count_hyper_cycles(g, kmax)}
    if zeta:
        z = count_zeta_cycles(g, kmax)
        rec["zeta"] = [{"signature": [[w, s + 1, t + 1] for w, s, t in sig], "count": c}
                       for sig, c in sorted(z.items())]
    _emit(ctx, "cycles", {"graph": str(graph_path), "kmax": kmax, "zeta": zeta}, rec)


# ---------------------------------------------------------------- power (limit law)

def limit_power(spec, alpha, samples, seed, lmax=DEFAULT_LMAX, workers=None, bootstrap=200):
    """beta*(alpha) from the limiting law. HSBM specs use cycles from the first
    length a simple graph can carry; factor specs include every order."""
    if isinstance(spec, HsbmSpec):
        start = first_cycle_length(spec.k)
        al = b_alphas(hsbm_b_matrix(spec), lmax, start)
    else:
        start = 1
        al = factor_alphas(spec, lmax, start)
    means = cycle_means(spec.k, spec.d, lmax, start)
    return optimal_power(al, means, alpha, samples, seed, lmax, spec.k, spec.d, workers,
                         bootstrap)


@main.command()
@click.option("--spec", "spec_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--samples", type=float, default=1e6, show_default=True)
@click.option("--lmax", type=int, default=DEFAULT_LMAX, show_default=True)
@click.option("--bootstrap", type=int, default=200, show_default=True)
@click.pass_context
def power(ctx, spec_path, alpha, samples, lmax, bootstrap):
    """Optimal power beta*(alpha) from the limiting likelihood-ratio law."""
    spec = _load_spec(spec_path)
    try:
        rep = limit_power(spec, alpha, int(samples), ctx.obj["seed"], lmax, ctx.obj["workers"],
                          bootstrap)
    except (DivergentRegime, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    _emit(ctx, "power", {"spec": spec_to_dict(spec), "alpha": alpha, "samples": int(samples),
                         "lmax": lmax, "seed": ctx.obj["seed"]}, rep)


# ---------------------------------------------------------------- cycle-test

@main.command("cycle-test")
@click.option("--spec", "spec_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--n", "n", type=int, required=True)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--samples", type=int, default=400, show_default=True)
@click.option("--null-samples", type=int, default=None)
@click.option("--kn", type=int, default=None, help="Longest cycle (default max(3, ceil(log log n)+3)).")
@click.option("--randomized", is_flag=True, help="Randomize at the threshold for exact size.")
@click.pass_context
def cycle_test(ctx, spec_path, n, alpha, samples, null_samples, kn, randomized):
    """Size and power of the short-cycle test against Erdos-Renyi."""
    spec = _load_spec(spec_path)
    if not isinstance(spec, HsbmSpec):
        raise ConfigError("cycle-test needs an HSBM spec (m0 or sbm shorthand)")
    try:
        rep = power_experiment(spec, n, alpha, kn, samples, ctx.obj["seed"], ctx.obj["workers"],
                               null_samples, randomized)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    _emit(ctx, "cycle-test", {"spec": spec_to_dict(spec), "n": n, "alpha": alpha,
                              "samples": samples, "kn": kn, "seed": ctx.obj["seed"]},
          rep.to_dict())


# ---------------------------------------------------------------- oracle

@main.command()
@click.option("--spec", "spec_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--graph", "graph_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--op", type=click.Choice(["likelihood", "posterior", "two-point", "overlap",
                                         "mi", "dfe", "conditioned"]), required=True)
@click.option("--u", type=int, default=1, help="First vertex (1-based) for two-point.")
@click.option("--v", type=int, default=2, help="Second vertex (1-based) for two-point.")
@click.option("--n", "n", type=int, default=10, help="Graph size for --op mi.")
@click.option("--samples", type=int, default=20, help="Planted draws for --op mi.")
@click.option("--top", type=int, default=10, help="Assignments listed for --op posterior.")
@click.pass_context
def oracle(ctx, spec_path, graph_path, op, u, v, n, samples, top):
    """Exact small-n quantities by enumeration of all assignments."""
    from . import oracle as orc
    spec = _load_spec(spec_path)
    if op != "mi" and graph_path is None:
        raise ConfigError("--graph is required for this operation")
    g = _load_graph(graph_path) if graph_path else None
    try:
        if op == "likelihood":
            rec = {"likelihood": orc.exact_likelihood(spec, g),
                   "log_likelihood": orc.exact_log_likelihood(spec, g)}
        elif op == "conditioned":
            rec = {"conditioned_likelihood": orc.conditioned_likelihood(spec, g)}
        elif op == "posterior":
            t = orc.exact_posterior(spec, g)
            order = np.argsort(-t.log_masses, kind="stable")[:top]
            labs = orc.decode(order, t.n, t.q) + 1
            rec = {"log_likelihood": t.log_likelihood, "marginals": t.marginals(),
                   "top": [{"labels": lab, "mass": float(np.exp(t.log_masses[i]))}
                           for lab, i in zip(labs, order)]}
        elif op == "two-point":
            rec = {"u": u, "v": v, "joint": orc.two_point(spec, g, u - 1, v - 1)}
        elif op == "overlap":
            rec = {"overlap_deviation": orc.posterior_overlap_expectation(spec, g)}
        elif op == "dfe":
            rec = {"functional": orc.free_energy_derivative_functional(spec, g)}
        else:
            rec = orc.mutual_information_terms(spec, n, samples, ctx.obj["seed"])
    except (orc.BudgetExceeded, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    _emit(ctx, "oracle", {"spec": spec_to_dict(spec), "graph": graph_path, "op": op, "u": u,
                          "v": v, "n": n, "samples": samples, "seed": ctx.obj["seed"]}, rec)


# ---------------------------------------------------------------- equiv-probe

def _parse_grid(text, cast=float):
    try:
        vals = [cast(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse grid {text!r}") from None
    if not vals:
        raise ConfigError("empty grid")
    return vals


@main.command("equiv-probe")
@click.option("--spec", "spec_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--n", "n", type=int, default=12, show_default=True)
@click.option("--samples", type=int, default=30, show_default=True)
@click.option("--d-grid", default=None, help="Comma-separated degrees (default: the spec's d).")
@click.pass_context
def equiv_probe(ctx, spec_path, n, samples, d_grid):
    """Posterior overlap, pinned-estimator overlap and two-point deviation across degrees."""
    spec = _load_spec(spec_path)
    grid = _parse_grid(d_grid) if d_grid else None
    rep = weak_recovery_probe(spec, n, samples, ctx.obj["seed"], grid, ctx.obj["workers"])
    _emit(ctx, "equiv-probe", {"spec": spec_to_dict(spec), "n": n, "samples": samples,
                               "d_grid": grid, "seed": ctx.obj["seed"]}, rep)


# ---------------------------------------------------------------- run

OPERATIONS = ("thresholds", "power", "cycle-test", "cycle-check", "equiv-probe")


def validate_config(cfg, base=Path(".")):
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    op = cfg.get("operation")
    if op not in OPERATIONS:
        raise ConfigError(f"operation must be one of {', '.join(OPERATIONS)}")
    spec = cfg.get("spec")
    if op != "cycle-check":
        if spec is None:
            raise ConfigError("config needs a spec (path or inline object)")
        if isinstance(spec, str):
            path = Path(spec) if Path(spec).is_absolute() else base / spec
            if not path.exists():
                raise ConfigError(f"spec file {spec} does not exist")
            cfg = dict(cfg, spec=json.loads(path.read_text()))
        _load_spec(cfg["spec"])
    grid = cfg.get("grid", {})
    if not isinstance(grid, dict):
        raise ConfigError("grid must be an object of lists")
    for key, vals in grid.items():
        if not isinstance(vals, list) or not vals:
            raise ConfigError(f"grid entry {key!r} must be a nonempty list")
    if op != "thresholds" and not grid:
        raise ConfigError("empty grid")
    return cfg


def grid_cells(cfg):
    grid = cfg.get("grid", {})
    keys = sorted(grid)
    if not keys:
        return [{}]
    return [dict(zip(keys, vals)) for vals in itertools.product(*(grid[k] for k in keys))]


def run_cell(args):
    """One grid cell; returns a record that always carries its seed."""
    cfg, index, cell, master = args
    seed = int(stream(master, ROLE_GENERIC, index).integers(0, 2**62))
    rec = dict(cell, cell=index, seed=seed)
    op = cfg["operation"]
    try:
        spec = spec_from_dict(cfg["spec"]) if op != "cycle-check" else None
        if spec is not None and "d" in cell:
            spec = spec.with_degree(float(cell["d"]))
        if op == "thresholds":
            rep = thresholds_report(spec, cfg.get("lmax", DEFAULT_LMAX), cfg.get("min", False))
            rec.update(d_ks=rep["d_ks"], lambda_ks=rep["lambda_ks"], d_ks_hsbm=rep["d_ks_hsbm"],
                       report=rep)
        elif op == "power":
            rep = limit_power(spec, float(cell.get("alpha", cfg.get("alpha", 0.05))),
                              int(cfg.get("samples", 10**5)), seed,
                              cfg.get("lmax", DEFAULT_LMAX), 1, cfg.get("bootstrap", 200))
            rec.update(alpha=rep["alpha"], beta_star=rep["beta_star"],
                       beta_star_planted=rep["beta_star_planted"], ci_lo=rep["ci"][0],
                       ci_hi=rep["ci"][1], c_alpha=rep["c_alpha"], regime=rep["regime"])
        elif op == "cycle-test":
            n = int(cell.get("n", cfg.get("n", 1000)))
            rep = power_experiment(spec, n, float(cell.get("alpha", cfg.get("alpha", 0.05))),
                                   cfg.get("kn"), int(cfg.get("samples", 200)), seed, 1,
                                   cfg.get("null_samples"), reference=cfg.get("reference", False))
            rec.update(n=n, d=rep.d, alpha=rep.alpha, power=rep.empirical_power,
                       power_se=rep.power_se, size=rep.empirical_size, size_se=rep.size_se,
                       ci_lo=rep.empirical_power - 1.96 * rep.power_se,
                       ci_hi=rep.empirical_power + 1.96 * rep.power_se,
                       kn=rep.kn, c_threshold=rep.c_threshold, beta_star=rep.beta_star_reference)
        elif op == "cycle-check":
            n, d, k = int(cell["n"]), float(cell["d"]), int(cell.get("k", cfg.get("k", 2)))
            kmax = int(cfg.get("kmax", 5))
            samples = int(cfg.get("samples", 100))
            counts = np.array([[c for _, c in sorted(count_hyper_cycles(
                sample_er_hypergraph(n, d, k, stream(seed, ROLE_GENERIC, i)), kmax).items())]
                for i in range(samples)])
            start = first_cycle_length(k)
            pred = cycle_means(k, d, kmax, start)
            rec.update(k=k, ells=list(range(start, kmax + 1)),
                       empirical_mean=counts.mean(axis=0).tolist(),
                       empirical_se=(counts.std(axis=0, ddof=1) / np.sqrt(samples)).tolist(),
                       predicted_mean=pred.tolist())
        else:
            n = int(cell.get("n", cfg.get("n", 12)))
            rep = weak_recovery_probe(spec, n, int(cfg.get("samples", 20)), seed,
                                      [float(cell["d"])] if "d" in cell else None, 1)
            r = rep["records"][0]
            rec.update({k: v for k, v in r.items() if k != "d"})
        rec["status"] = "ok"
    except Exception as exc:  # noqa: BLE001 - recorded per cell, run continues
        rec.update(status="failed", error=f"{type(exc).__name__}: {exc}")
    return rec


def _flat(rec):
    return {k: v for k, v in rec.items() if not isinstance(v, (dict, list))}


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.pass_context
def run(ctx, config_path):
    """Run an operation over a parameter grid from a JSON config."""
    try:
        raw = json.loads(Path(config_path).read_text())
    except ValueError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    cfg = validate_config(raw, Path(config_path).parent)
    master = int(cfg.get("seed", ctx.obj["seed"]))
    cells = grid_cells(cfg)
    jobs = [(cfg, i, cell, master) for i, cell in enumerate(cells)]
    records = run_indexed(run_cell, jobs, ctx.obj["workers"])
    _emit(ctx, "run", cfg, {"operation": cfg["operation"], "cells": records},
          [_flat(r) for r in records])
    failed = sum(r["status"] != "ok" for r in records)
    if failed:
        click.echo(f"{failed} of {len(records)} cells failed", err=True)
        ctx.exit(EXIT_PARTIAL)


# ---------------------------------------------------------------- emit

def plot_rows(result, kind):
    """Tidy rows (x, y, ci_lo, ci_hi, series) for plotting."""
    cells = [c for c in result.get("records", result).get("cells", []) if c.get("status") == "ok"]
    need = {"power-curve": ("d", "power", "ci_lo", "ci_hi"),
            "beta-star": ("alpha", "beta_star", "ci_lo", "ci_hi"),
            "cycle-check": ("ells", "empirical_mean", "predicted_mean")}[kind]
    for c in cells:
        missing = [k for k in need if c.get(k) is None]
        if missing:
            raise ConfigError(f"result lacks columns {missing} needed for {kind}")
    if not cells:
        raise ConfigError("result has no successful cells")
    rows = []
    if kind == "power-curve":
        for c in cells:
            rows.append({"d": c["d"], "power": c["power"], "ci_lo": c["ci_lo"],
                         "ci_hi": c["ci_hi"], "series": f"n={c.get('n')}"})
        rows.sort(key=lambda r: (r["series"], r["d"]))
    elif kind == "beta-star":
        for c in cells:
            rows.append({"alpha": c["alpha"], "beta_star": c["beta_star"], "ci_lo": c["ci_lo"],
                         "ci_hi": c["ci_hi"], "series": f"d={c.get('d', '')}"})
        rows.sort(key=lambda r: (r["series"], r["alpha"]))
    else:
        for c in cells:
            for ell, e, p, se in zip(c["ells"], c["empirical_mean"], c["predicted_mean"],
                                     c.get("empirical_se", [None] * len(c["ells"]))):
                rows.append({"ell": ell, "empirical_mean": e, "predicted_mean": p,
                             "ci_lo": None if se is None else e - 1.96 * se,
                             "ci_hi": None if se is None else e + 1.96 * se,
                             "series": f"n={c['n']},d={c['d']}"})
    return rows


@main.command()
@click.option("--result", "result_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--kind", type=click.Choice(["power-curve", "beta-star", "cycle-check"]),
              required=True)
@click.pass_context
def emit(ctx, result_path, kind):
    """Turn a run result into a tidy CSV for plotting."""
    try:
        result = json.loads(Path(result_path).read_text())
    except ValueError as exc:
        raise ConfigError(f"result is not valid JSON: {exc}") from None
    rows = plot_rows(result, kind)
    out = Path(ctx.obj["out"])
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{kind}-{_stamp()}.csv"
    _write_csv(path, rows)
    click.echo(str(path))


if __name__ == "__main__":
    sys.exit(main())
