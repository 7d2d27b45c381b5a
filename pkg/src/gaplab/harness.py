"""Command-line experiment runner.

``gaplab <kind> [--config PATH] [--seed U64] [--out DIR] [--emit-plot-data]``
runs one experiment and writes

* ``record.json``: config snapshot, results and software version,
* ``timing.json``: wall time (kept apart so that record.json is byte-identical
  across reruns of exact experiments),
* one CSV per result table, and with ``--emit-plot-data`` the plot series.

``gaplab verify [SELECTOR]`` runs the acceptance criteria and exits non-zero
if any fails.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import __version__, acceptance, approxhom, counterexample, lie, numerics, padic, transport, walks
from .config import KINDS, ConfigError, ExperimentConfig, load_config, validate
from .groups import FiniteGroup, SpecialUnitary, renyi_entropy_exact


@dataclass
class RunRecord:
    config: dict
    results: dict
    wall_time: float
    version: str = __version__
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    plots: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)  # name -> text


def _jsonable(o):
    if isinstance(o, Fraction):
        return str(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, default=_jsonable, allow_nan=True) + "\n"


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


# ---------------------------------------------------------------------------
# experiments; each returns (results, tables, plots, files)


def exp_walk(q: dict, rng) -> tuple:
    G = FiniteGroup.sl2_mod(q["p"], q["k"])
    mu = walks.elementary_walk(G)
    rep = walks.spectral_gap_exact(G, mu)
    N = G.order
    M = walks.convolution_matrix(G, mu.dense())
    v = np.zeros(N)
    v[G.e] = 1.0
    rows = []
    for t in range(q["ell"] + 1):
        dist = math.sqrt(float(np.sum((N * v - 1) ** 2)) / N)
        rows.append((t, dist, rep.lam**t * math.sqrt(N - 1)))
        v = M @ v
    res = {"order": N, "lambda": rep.lam, "lyapunov": None if math.isinf(rep.lyapunov) else rep.lyapunov,
           "l2_distance_at_ell": rows[-1][1], "bound_at_ell": rows[-1][2]}
    plots = {"walk_decay": (["t", "l2_distance_to_uniform", "lambda_t_sqrt_N_minus_1"], rows)}
    return res, {"walk": (["p", "k", "order", "lambda"], [(q["p"], q["k"], N, rep.lam)])}, plots, {}


def _parse_entry(v):
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, float):
        return Fraction(v).limit_denominator(10**12)
    return Fraction(v)


def exp_transport(q: dict, rng) -> tuple:
    raw = [[_parse_entry(x) for x in row] for row in q["coupling"]]
    total = sum(sum(r) for r in raw)
    if total <= 0 or min(min(r) for r in raw) < 0:
        raise ConfigError(["coupling: entries must be nonnegative with a positive total"])
    sigma = [[x / total for x in r] for r in raw]
    N1, N2 = len(sigma), len(sigma[0])
    files = {}
    tables = {}
    if q["mode"] == "decompose":
        dec = transport.decompose(sigma)
        files["decomposition.json"] = dec.to_json() + "\n"
        tables["decomposition"] = (["term", "weight", "edges"],
                                   [(i, c, " ".join(f"{a}-{b}" for a, b in t.edges)) for i, (c, t) in enumerate(dec.terms)])
        res = {"N1": N1, "N2": N2, "terms": len(dec.terms), "reconstructs": dec.reconstruct() == sigma,
               "weights": [str(c) for c, _ in dec.terms]}
    else:
        instances = [sigma] + [acceptance.perturbed_uniform(rng, N1, N2, q["A"]) for _ in range(q["perturb"])]
        rows = []
        for idx, mu in enumerate(instances):
            rep = transport.correct_coupling(mu, q["A"])
            rows.append((idx, float(rep.margin_deviation), float(rep.max_entry_change), float(rep.bound),
                         rep.max_entry_change <= rep.bound))
            if idx == 0:
                tables["corrected"] = ([f"col{j}" for j in range(N2)], [[str(x) for x in r] for r in rep.nu])
        tables["correction"] = (["instance", "margin_deviation", "max_entry_change", "bound", "within_bound"], rows)
        res = {"N1": N1, "N2": N2, "A": q["A"], "instances": len(rows), "all_within_bound": all(r[4] for r in rows)}
    return res, tables, {}, files


def exp_approxhom(q: dict, rng) -> tuple:
    S = SpecialUnitary(2)
    g = S.sample(rng)
    f = approxhom.noisy_conjugation_map(g, q["rho"], q["eps"], rng, mode=q["noise"])
    fit = approxhom.fit_linear_theta(f, q["k"], q["rho"], mode=q["fit"], rng=rng)
    su2 = approxhom.LieStructure.su2()
    proj = approxhom.project_to_variety_real(fit.theta, su2, su2)
    th = proj.theta
    gi = g.conj().T
    probes = lie.random_su2_near_identity(rng, q["rho"], q["probes"])
    cmp = approxhom.compare_to_reference(lambda h: lie.su2_exp(th.apply(lie.su2_log(h))),
                                         lambda h: g @ h @ gi, probes, S)
    ad = lie.ad_matrix_su2(g)
    res = {"fit_residual": fit.residual, "projection_residual": proj.residual, "projection_distance": proj.distance,
           "is_isomorphism": proj.is_isomorphism, "compare_to_reference": cmp,
           "distance_to_Ad_g": float(np.linalg.norm(np.asarray(th.x, dtype=float) - ad, 2)),
           "theta_fit": np.asarray(fit.theta.x, dtype=float), "theta_projected": np.asarray(th.x, dtype=float),
           "Ad_g": ad}
    rows = [(i, j, float(fit.theta.x[i, j]), float(th.x[i, j]), float(ad[i, j])) for i in range(3) for j in range(3)]
    return res, {"theta": (["row", "col", "fitted", "projected", "Ad_g"], rows)}, {}, {}


def exp_counterexample(q: dict, rng) -> tuple:
    batch = counterexample.sample_mu(rng, q["p"], q["M"], q["N"], independent=q["independent"])
    rep = counterexample.decay_report(rng, q["p"], q["M"], q["j_max"], q["N"], batch=batch)
    verdict = counterexample.no_gap_witness(rng, q["p"], q["M"], q["j_max"], q["N"], C_prime=q["C_prime"], batch=batch)
    marg = counterexample.marginal_tests(batch)
    res = {"C": rep.C, "oracle": rep.oracle, "control": rep.control, "verdict": verdict.verdict,
           "thresholds": verdict.thresholds, "band": verdict.band,
           "rows": [{"j": r.j, "max_dev": r.max_dev, "bound": r.bound, "mu_hat": r.mu_hat} for r in rep.rows],
           "marginals": {"ks_pvalue": marg.ks_pvalue, "chi2_pvalue": marg.chi2_pvalue, "passed": marg.passed}}
    rows = [(r.j, r.max_dev, r.bound, r.mu_hat) for r in rep.rows]
    return res, {"decay": (["j", "max_abs_gamma_minus_1", "bound", "abs_mu_hat"], rows)}, {}, \
        {"decay_report.json": rep.to_json() + "\n"}


def exp_ift(q: dict, rng) -> tuple:
    rows = []
    if q["field"] == "real":
        for mi in range(q["maps"]):
            probe = numerics.quadratic_probe(rng.normal(size=(2, 2)), 0.5 * rng.normal(size=(2, 2, 2)),
                                             b=rng.normal(size=2), x0=rng.normal(size=2))
            probe.audit()
            s0 = probe.sigma0()
            r = 0.99 * probe.radius_limit(s0)
            y0 = probe.phi(probe.x0)
            for t in range(q["targets"]):
                u = rng.normal(size=2)
                u /= np.linalg.norm(u)
                y = y0 + u * (s0 * r / 4) * math.sqrt(rng.random()) * (1 - 1e-9)
                res = numerics.solve_real_ift(probe, y, r, tol=1e-12)
                rows.append((mi, t, s0, probe.alpha, r, res.residual, res.distance, res.solved))
        header = ["map", "target", "sigma0", "alpha", "r", "residual", "distance", "solved"]
    else:
        p, K, k0, l = q["p"], q["K"], q["k0"], q["l"]
        for mi in range(q["maps"]):
            phi = numerics.random_padic_polymap(rng, p, K, 3, 2, k0)
            y0 = phi(phi.x0)
            for t in range(q["targets"]):
                y = [(a + p ** (k0 + l) * padic.random_zp(rng, p, K)) % p**K for a in y0]
                x = numerics.solve_padic_ift(phi, y, k0, l)
                ok = phi(x) == y and all((a - b) % p**l == 0 for a, b in zip(x, phi.x0))
                rows.append((mi, t, " ".join(map(str, x)), ok))
        header = ["map", "target", "preimage", "solved"]
    solved = sum(1 for r in rows if r[-1])
    return {"field": q["field"], "solved": solved, "total": len(rows)}, {"ift": (header, rows)}, {}, {}


def exp_bch(q: dict, rng) -> tuple:
    rows = []
    for i in range(q["samples"]):
        x = numerics._ball_point(rng, q["radius"])
        y = numerics._ball_point(rng, q["radius"])
        nx, ny = float(np.linalg.norm(x)), float(np.linalg.norm(y))
        err = float(np.linalg.norm(numerics.bch(x, y, q["order"]) - numerics.bch_exact_su2(x, y)))
        rows.append((i, nx, ny, err, numerics.bch_tail_bound(nx, ny, q["order"])))
    cal = numerics.calibrate_bch(rng, samples=q["samples"], radius=q["radius"], etas=tuple(q["etas"]))
    res = {"order": q["order"], "tail_violations": sum(1 for r in rows if r[3] > r[4]),
           "max_error": max(r[3] for r in rows), "Cbar": cal.Cbar, "commutator_C": cal.commutator_C}
    tables = {"commutator": (["eta", "C"], sorted(cal.commutator_C.items()))}
    plots = {"bch_errors": (["sample", "norm_x", "norm_y", "error", "tail_bound"], rows)}
    return res, tables, plots, {}


def exp_entropy(q: dict, rng) -> tuple:
    n = q["n"]
    Z = FiniteGroup.cyclic(n)
    G = FiniteGroup.direct_product(Z, Z)
    kinds = ["product", "diagonal"] if q["coupling"] == "both" else [q["coupling"]]
    rows = []
    for kind in kinds:
        w = np.zeros(n * n)
        if kind == "product":
            w[:] = 1 / n**2
        else:
            w[[i * n + i for i in range(n)]] = 1 / n
        h = renyi_entropy_exact(G, w, q["eta"])
        rows.append((kind, h, math.log(n), h >= math.log(n) - 1e-12))
    return {"H2": {r[0]: r[1] for r in rows}, "log_n": math.log(n)}, \
        {"entropy": (["coupling", "H2", "log_n", "at_least_log_n"], rows)}, {}, {}


EXPERIMENTS = {
    "walk": exp_walk,
    "transport": exp_transport,
    "approxhom": exp_approxhom,
    "counterexample": exp_counterexample,
    "ift": exp_ift,
    "bch": exp_bch,
    "entropy": exp_entropy,
}


def run(config: ExperimentConfig) -> RunRecord:
    """Validate (again) and run one experiment."""
    cfg = validate(config.kind, config.params, config.seed)
    rng = acceptance.stream(cfg.seed, KINDS.index(cfg.kind))
    t0 = time.perf_counter()
    results, tables, plots, files = EXPERIMENTS[cfg.kind](cfg.params, rng)
    return RunRecord(cfg.to_dict(), results, time.perf_counter() - t0, tables=tables, plots=plots, files=files)


def write_record(rec: RunRecord, out: str, emit_plot_data: bool = False) -> list:
    """Write the record and its tables under ``out``; returns the written paths."""
    os.makedirs(out, exist_ok=True)
    written = []

    def put(name, text):
        path = os.path.join(out, name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        written.append(path)

    put("record.json", dumps({"config": rec.config, "results": rec.results, "version": rec.version}))
    put("timing.json", dumps({"wall_time": rec.wall_time}))
    for name, text in rec.files.items():
        put(name, text)
    tables = dict(rec.tables)
    if emit_plot_data:
        tables.update(rec.plots)
    for name, (header, rows) in tables.items():
        path = os.path.join(out, f"{name}.csv")
        write_csv(path, header, rows)
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# CLI


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2^64)")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gaplab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"gaplab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind, help=f"run a {kind} experiment")
        sp.add_argument("--config", metavar="PATH", help="INI config file (defaults apply when omitted)")
        sp.add_argument("--seed", type=_u64, metavar="U64", help="master seed (overrides the config)")
        sp.add_argument("--out", metavar="DIR", default=None, help="output directory (default: runs/<kind>)")
        sp.add_argument("--emit-plot-data", action="store_true", help="also write plot-ready series as CSV")
    vp = sub.add_parser("verify", help="run acceptance criteria")
    vp.add_argument("selector", nargs="?", default="all",
                    help=f"all, a suite ({', '.join(acceptance.SUITES)}) or comma-separated numbers")
    vp.add_argument("--seed", type=_u64, default=acceptance.DEFAULT_SEED, metavar="U64")
    vp.add_argument("--out", metavar="DIR", default=None, help="write verify.json and verify.csv here")
    return ap


def _verify(args) -> int:
    try:
        nums = acceptance.select(args.selector)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 2
    results = []
    for n in nums:
        r = acceptance.run_criterion(n, args.seed)
        print(r.line(), flush=True)
        results.append(r)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed" + (f"; failed: {failed}" if failed else ""))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "verify.json"), "w", encoding="utf-8") as fh:
            fh.write(dumps([r.to_dict() for r in results]))
        write_csv(os.path.join(args.out, "verify.csv"), ["number", "name", "suite", "passed", "runtime", "budget"],
                  [(r.number, r.name, r.suite, r.passed, r.runtime, r.budget) for r in results])
    return 1 if failed else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        return _verify(args)
    try:
        if args.config:
            cfg = load_config(args.config, kind=args.command, seed=args.seed)
        else:
            cfg = validate(args.command, {}, args.seed if args.seed is not None else 1)
        rec = run(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = args.out or os.path.join("runs", args.command)
    for path in write_record(rec, out, args.emit_plot_data):
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
