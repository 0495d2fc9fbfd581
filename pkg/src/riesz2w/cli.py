"""Batch entry point: load measures, run audits, emit JSON/CSV reports.

Exit codes: 0 success, 1 input or precondition error, 2 anomaly (a measured
inequality check failed). Errors go to stderr as single-line JSON objects.
Replaying a report's recorded seed and parameters reproduces it bit for bit
apart from the "timings" block.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__, calibration
from ._backend import BACKEND
from .constants import AuditConfig, ConstantsReport, monotonicity_audit, theorem_audit
from .errors import AnomalyError, InputError, RieszError
from .generators import (
    cantor_ad,
    counterexample_weight,
    doubling_corpus,
    hyperplane_concentrated,
    lebesgue_sample,
    power_doubling,
)
from .geometry import Cube, DiscreteMeasure, RieszDimension
from .grids import (
    GoodnessParams,
    auto_scale_range,
    bad_energy_mc,
    build_grid,
    martingale_decompose,
    p_bad_mc,
    root_cube_for,
)
from .poisson import energy
from .stopping import StoppingThresholds, build_stopping_tree, carleson_check


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(f"usage error: {message}")


def _report(command: str, params: dict, seeds: dict, results: dict, timings: dict) -> dict:
    return {
        "version": 1,
        "command": command,
        "backend": BACKEND,
        "params": params,
        "seeds": seeds,
        "results": results,
        "timings": timings,
    }


def _write(report: dict, path: str | None) -> None:
    text = json.dumps(report, sort_keys=True, indent=1)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _parse_cube(center: str, side: float) -> Cube:
    return Cube(tuple(float(t) for t in center.split(",")), side)


def _cmd_constants(args) -> int:
    t0 = time.time()
    sigma = DiscreteMeasure.load(args.sigma)
    w = DiscreteMeasure.load(args.weight)
    rd = RieszDimension(args.n, args.d)
    cfg = AuditConfig(seed=args.seed, n_grids=args.grids, epsilon=args.eps, r=args.r,
                      C0=args.c0, gamma=args.gamma, tol=args.tol)
    rep = theorem_audit(rd, sigma, w, cfg)
    report = _report(
        "constants",
        {"sigma": args.sigma, "weight": args.weight, "n": args.n, "d": args.d,
         "grids": args.grids, "eps": args.eps, "r": args.r, "C0": args.c0,
         "gamma": args.gamma, "tol": args.tol, "threads": args.threads},
        {"seed": args.seed},
        rep.to_json(),
        {"seconds": round(time.time() - t0, 3)},
    )
    _write(report, args.out)
    if args.csv:
        new = not os.path.exists(args.csv)
        with open(args.csv, "a") as fh:
            if new:
                fh.write(ConstantsReport.csv_header() + "\n")
            fh.write(rep.csv_row(os.path.basename(args.sigma)) + "\n")
    if rep.anomalies:
        raise AnomalyError("; ".join(rep.anomalies))
    return 0


def _cmd_audit(args) -> int:
    t0 = time.time()
    rd = RieszDimension(2, 2.0)
    rows, results = [], []
    lo, hi = calibration.RATIO_BAND
    excursions = []
    for name, sigma, w in doubling_corpus(seed=args.seed, n_pairs=args.pairs):
        rep = theorem_audit(rd, sigma, w, AuditConfig(seed=args.seed))
        rows.append(rep.csv_row(name))
        results.append({"name": name, "N": rep.N, "A2": rep.A2, "T": rep.T,
                        "Tstar": rep.Tstar, "ratio_n": rep.ratio_n, "ratio_e": rep.ratio_e})
        if not lo <= rep.ratio_n <= hi:
            excursions.append(name)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(ConstantsReport.csv_header() + "\n")
            for row in rows:
                fh.write(row + "\n")
    report = _report(
        "audit",
        {"pairs": args.pairs, "band": [lo, hi], "threads": args.threads},
        {"seed": args.seed},
        {"pairs": results, "excursions": excursions},
        {"seconds": round(time.time() - t0, 3)},
    )
    _write(report, args.out)
    if excursions:
        raise AnomalyError(f"ratio band excursions: {excursions}")
    return 0


def _cmd_grid(args) -> int:
    t0 = time.time()
    gp = GoodnessParams(args.eps, args.r)
    if args.grid_cmd == "pbad":
        est = p_bad_mc(gp, args.dim, args.trials, args.seed)
        results = {"p_bad": est.p, "ci_low": est.ci_low, "ci_high": est.ci_high,
                   "trials": est.trials}
    else:  # badenergy
        if args.sigma:
            mu = DiscreteMeasure.load(args.sigma)
        else:
            rng = np.random.default_rng(args.seed + 1)
            mu = DiscreteMeasure(rng.uniform(0, 1, size=(args.atoms, args.dim)),
                                 rng.uniform(0.5, 1.5, args.atoms), dim=args.dim)
        rng = np.random.default_rng(args.seed + 2)
        fv = rng.uniform(-1, 1, len(mu))
        est = bad_energy_mc(mu, fv, gp, args.trials, args.seed)
        results = {"mean_bad_fraction": est.mean_fraction, "trials": len(est.fractions)}
    report = _report(
        f"grid {args.grid_cmd}",
        {"eps": args.eps, "r": args.r, "dim": args.dim, "trials": args.trials,
         "threads": args.threads},
        {"seed": args.seed},
        results,
        {"seconds": round(time.time() - t0, 3)},
    )
    _write(report, args.out)
    return 0


def _cmd_energy(args) -> int:
    t0 = time.time()
    w = DiscreteMeasure.load(args.weight)
    Q = _parse_cube(args.center, args.side)
    results = {}
    forms = [args.form] if args.form else [1, 2, 3]
    for form in forms:
        if form == 3:
            k_range = auto_scale_range(w)
            grid = build_grid(w.dim, k_range, args.seed)
            root = root_cube_for(grid, w.restrict(Q)) if len(w.restrict(Q)) else None
            if root is None:
                results["form3"] = 0.0
                continue
            val = energy(w.restrict(Q), root, form=3, grid=grid)
        else:
            val = energy(w, Q, form=form)
        results[f"form{form}"] = val.squared
    report = _report(
        "energy",
        {"weight": args.weight, "center": args.center, "side": args.side,
         "threads": args.threads},
        {"seed": args.seed},
        results,
        {"seconds": round(time.time() - t0, 3)},
    )
    _write(report, args.out)
    return 0


def _cmd_stopping(args) -> int:
    t0 = time.time()
    sigma = DiscreteMeasure.load(args.sigma)
    w = DiscreteMeasure.load(args.weight)
    rd = RieszDimension(args.n, args.d)
    gp = GoodnessParams(args.eps, args.r)
    if args.r_value is not None:
        rval = args.r_value
    else:
        rep = theorem_audit(rd, sigma, w, AuditConfig(seed=args.seed))
        rval = math.sqrt(rep.A2) + rep.T + rep.Tstar
    k_range = auto_scale_range(sigma)
    grid = build_grid(sigma.dim, k_range, args.seed)
    root = root_cube_for(grid, sigma)
    rng = np.random.default_rng(args.seed)
    fv = rng.uniform(-1.0, 1.0, len(sigma))
    hc = martingale_decompose(sigma, grid, root, fv)
    thresholds = StoppingThresholds(args.gamma, args.energy_mult, rval)
    tree = build_stopping_tree(hc, sigma, w, rd, gp, thresholds, C0=args.c0)
    check = carleson_check(tree, sigma)
    report = _report(
        "stopping",
        {"sigma": args.sigma, "weight": args.weight, "n": args.n, "d": args.d,
         "eps": args.eps, "r": args.r, "gamma": args.gamma,
         "energy_mult": args.energy_mult, "r_value": rval, "threads": args.threads},
        {"seed": args.seed},
        {"tree": tree.to_json(), "nodes": len(tree), "max_child_ratio": check.max_ratio,
         "degenerate_nodes": check.degenerate_nodes},
        {"seconds": round(time.time() - t0, 3)},
    )
    _write(report, args.out)
    return 0


def _cmd_monotonicity(args) -> int:
    t0 = time.time()
    rd = RieszDimension(args.n, args.d)
    res = monotonicity_audit(rd, args.trials, seed=args.seed)
    report = _report(
        "monotonicity",
        {"n": args.n, "d": args.d, "trials": args.trials, "threads": args.threads},
        {"seed": args.seed},
        res.to_json(),
        {"seconds": round(time.time() - t0, 3)},
    )
    _write(report, args.out)
    if res.anomalies:
        raise AnomalyError(f"{res.anomalies} monotonicity anomalies (zero denominators)")
    return 0


def _cmd_generate(args) -> int:
    cube = _parse_cube(args.center, args.side)
    if args.kind == "lebesgue":
        mu = lebesgue_sample(args.n, args.resolution, cube)
    elif args.kind == "power":
        mu = power_doubling(args.n, args.alpha, args.resolution, cube)
    elif args.kind == "cantor":
        mu = cantor_ad(args.n, args.cantor_d, args.depth)
    else:
        mu = hyperplane_concentrated(args.n, args.thickness, args.resolution)
    mu.save(args.out)
    print(json.dumps({"kind": args.kind, "atoms": len(mu), "total_mass": mu.total_mass,
                      "out": args.out}))
    return 0


def _cmd_counterexample(args) -> int:
    sigma, record = counterexample_weight(args.n, args.d, args.eps)
    sigma.save(args.out)
    sidecar = os.path.splitext(args.out)[0] + ".verify.json"
    with open(sidecar, "w") as fh:
        json.dump(record.to_json(), fh, sort_keys=True, indent=1)
    print(json.dumps({"out": args.out, "verify": sidecar, "passed": record.passed}))
    if not record.passed:
        raise AnomalyError("counterexample verification failed")
    return 0


def build_parser() -> _Parser:
    p = _Parser(prog="riesz2w", description=__doc__)
    p.add_argument("--threads", type=int,
                   default=int(os.environ.get("RIESZ2W_THREADS", "1")),
                   help="recorded in reports; results are independent of it")
    sub = p.add_subparsers(dest="verb", required=True)

    c = sub.add_parser("constants", help="full constants report for one pair")
    c.add_argument("--sigma", required=True)
    c.add_argument("--weight", required=True)
    c.add_argument("-n", type=int, required=True)
    c.add_argument("-d", type=float, required=True)
    c.add_argument("--grids", type=int, default=4)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--eps", type=float, default=0.0625)
    c.add_argument("-r", type=int, default=8)
    c.add_argument("--c0", type=float, default=16.0)
    c.add_argument("--gamma", type=float, default=4.0)
    c.add_argument("--tol", type=float, default=1e-10)
    c.add_argument("--out", default=None)
    c.add_argument("--csv", default=None)
    c.set_defaults(func=_cmd_constants)

    a = sub.add_parser("audit", help="corpus sweep with frozen ratio band")
    a.add_argument("--pairs", type=int, default=20)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out", default=None)
    a.add_argument("--csv", default=None)
    a.set_defaults(func=_cmd_audit)

    g = sub.add_parser("grid", help="goodness statistics")
    g.add_argument("grid_cmd", choices=["pbad", "badenergy"])
    g.add_argument("--eps", type=float, required=True)
    g.add_argument("-r", type=int, required=True)
    g.add_argument("--trials", type=int, default=1000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--dim", type=int, default=1)
    g.add_argument("--sigma", default=None)
    g.add_argument("--atoms", type=int, default=64)
    g.add_argument("--out", default=None)
    g.set_defaults(func=_cmd_grid)

    e = sub.add_parser("energy", help="energy of a weight over a cube")
    e.add_argument("--weight", required=True)
    e.add_argument("--center", required=True, help="comma-separated coordinates")
    e.add_argument("--side", type=float, required=True)
    e.add_argument("--form", type=int, choices=[1, 2, 3], default=None)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", default=None)
    e.set_defaults(func=_cmd_energy)

    s = sub.add_parser("stopping", help="build a stopping tree and check Carleson")
    s.add_argument("--sigma", required=True)
    s.add_argument("--weight", required=True)
    s.add_argument("-n", type=int, required=True)
    s.add_argument("-d", type=float, required=True)
    s.add_argument("--eps", type=float, default=0.5)
    s.add_argument("-r", type=int, default=4)
    s.add_argument("--c0", type=float, default=0.9)
    s.add_argument("--gamma", type=float, default=4.0)
    s.add_argument("--energy-mult", type=float, default=10.0)
    s.add_argument("--r-value", type=float, default=None,
                   help="R constant for the energy rule; computed when omitted")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=None)
    s.set_defaults(func=_cmd_stopping)

    m = sub.add_parser("monotonicity", help="randomized domination-ratio audit")
    m.add_argument("-n", type=int, default=2)
    m.add_argument("-d", type=float, default=2.0)
    m.add_argument("--trials", type=int, default=500)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out", default=None)
    m.set_defaults(func=_cmd_monotonicity)

    gen = sub.add_parser("generate", help="write a generator measure as JSON")
    gen.add_argument("--kind", required=True,
                     choices=["lebesgue", "power", "cantor", "hyperplane"])
    gen.add_argument("-n", type=int, default=2)
    gen.add_argument("--resolution", type=int, default=32)
    gen.add_argument("--alpha", type=float, default=0.0)
    gen.add_argument("--cantor-d", type=float, default=1.0)
    gen.add_argument("--depth", type=int, default=5)
    gen.add_argument("--thickness", type=float, default=0.0)
    gen.add_argument("--center", default="0.5,0.5")
    gen.add_argument("--side", type=float, default=1.0)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=_cmd_generate)

    cx = sub.add_parser("counterexample", help="build and verify the near-null weight")
    cx.add_argument("--eps", type=float, required=True)
    cx.add_argument("-n", type=int, default=2)
    cx.add_argument("-d", type=float, default=2.0)
    cx.add_argument("--out", required=True)
    cx.set_defaults(func=_cmd_counterexample)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except AnomalyError as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 2
    except RieszError as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
