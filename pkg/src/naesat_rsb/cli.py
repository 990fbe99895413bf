"""Command-line entry point: ``naesat-rsb <subcommand> ...``.

Exit codes: 0 success, 2 invalid input, 3 non-convergence, 4 resource cap,
1 for failed verification or other errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .errors import InvalidInput, NaesatError

FLOAT_FMT = "%.17g"


# ---------------------------------------------------------------- output helpers

def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT % v if math.isfinite(v) else "nan"
    return str(v)


def dumps(obj):
    """JSON with every float printed to 17 significant digits (non-finite -> null)."""
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return FLOAT_FMT % obj if math.isfinite(obj) else "null"
    if obj is None:
        return "null"
    return json.dumps(obj)


def provenance(args, params):
    p = {"tool": "naesat-rsb", "version": __version__, "command": args.cmd,
         "seed": args.seed, "params": params}
    if not args.no_timestamp:
        p["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return p


def _write(path, text):
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise InvalidInput(f"cannot write {path}: {exc.strerror}") from exc


def emit_json(args, params, payload):
    doc = dict(payload)
    doc["provenance"] = provenance(args, params)
    text = dumps(doc) + "\n"
    if args.out:
        _write(args.out, text)
    sys.stdout.write(text)


def emit_table(args, params, columns, rows):
    """CSV (with a provenance comment line) to --csv or stdout; JSON rows with --json."""
    if args.json:
        emit_json(args, params, {"columns": columns, "rows": [dict(zip(columns, r)) for r in rows]})
        if not args.csv:
            return
    buf = io.StringIO()
    buf.write("# provenance: " + dumps(provenance(args, params)) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    if args.csv:
        _write(args.csv, buf.getvalue())
    if not args.json:
        sys.stdout.write(buf.getvalue())


def parse_grid(spec, log=False):
    try:
        lo, hi, n = spec.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError as exc:
        raise InvalidInput(f"grid must look like lo:hi:n, got {spec!r}") from exc
    if n < 1 or (log and lo <= 0):
        raise InvalidInput(f"bad grid {spec!r}")
    return np.geomspace(lo, hi, n) if log else np.linspace(lo, hi, n)


def _sp_kw(args):
    return {} if args.tol is None else {"tol": args.tol}


# ---------------------------------------------------------------- subcommands

def cmd_gen(args):
    from .instance import ModelParams, generate
    p = ModelParams(args.k, args.d, args.n)
    inst = generate(p, args.seed)
    if not args.out:
        raise InvalidInput("gen needs --out FILE")
    _write(args.out, json.dumps(inst.to_json()) + "\n")
    out, args.out = args.out, None
    emit_json(args, {"k": p.k, "d": p.d, "n": p.N},
              {"file": out, "m": p.M, "repeated_variable": inst.has_repeated_variable()})


def cmd_solve(args):
    from .instance import Instance, exact_ground_state
    try:
        inst = Instance.load(args.input)
    except OSError as exc:
        raise InvalidInput(f"cannot read {args.input}: {exc.strerror}") from exc
    E, cnt = exact_ground_state(inst, args.cap)
    p = inst.params
    emit_json(args, {"k": p.k, "d": p.d, "n": p.N, "in": args.input},
              {"E_min": E, "e_min": E / p.N, "n_minimizers": cnt})


def cmd_mc(args):
    from .instance import ModelParams, sample_emin_stats
    p = ModelParams(args.k, args.d, args.n)
    s = sample_emin_stats(p, args.trials, args.seed, args.cap, args.threads)
    emit_table(args, {"k": p.k, "d": p.d, "n": p.N, "trials": args.trials},
               ["k", "d", "n", "trials", "mean_emin", "std_emin", "min", "max"],
               [[s.k, s.d, s.n, s.trials, s.mean, s.std, s.min, s.max]])


def cmd_tree_check(args):
    from .instance import make_rng
    from .wp_tree import BoundaryTree, random_tree, tree_energy_bruteforce, tree_energy_formula
    if args.input:
        try:
            trees = [BoundaryTree.load(args.input)]
        except OSError as exc:
            raise InvalidInput(f"cannot read {args.input}: {exc.strerror}") from exc
    else:
        rng = make_rng(args.seed)
        trees = [random_tree(rng, max_nodes=args.max_nodes) for _ in range(args.trials)]
    bad = []
    for i, t in enumerate(trees):
        a, b = tree_energy_formula(t), tree_energy_bruteforce(t)
        if a != b:
            bad.append({"tree": i, "formula": a, "bruteforce": b})
    emit_json(args, {"trials": len(trees), "in": args.input},
              {"trees": len(trees), "mismatches": len(bad), "failures": bad})
    return 1 if bad else 0


def cmd_sp(args):
    from .sp_core import sp_derivative, sp_solve
    kw = _sp_kw(args)
    pt = sp_solve(args.k, args.alpha, args.y, damping=args.damping, fractional=True, **kw)
    emit_json(args, {"k": args.k, "alpha": args.alpha, "y": args.y},
              {"x": float(pt.x), "w": float(pt.w), "residual": float(pt.residual),
               "iterations": pt.iterations, "in_mbullet": bool(pt.in_mbullet),
               "derivative": sp_derivative(args.k, pt.d, args.y, pt)})


def cmd_energy_curve(args):
    from .firstmoment import alpha_floor, compare, e_lbd
    from .onersb import solve_ystar
    from .sp_core import alpha_of_c
    rows = []
    for c in parse_grid(args.c_grid):
        a = alpha_of_c(c, args.k)
        r = solve_ystar(args.k, d=args.k * a, **_sp_kw(args))
        v = r.value
        gap = compare(args.k, a).gap if a >= alpha_floor(args.k) else math.nan
        rows.append([args.k, c, a, r.y_star, r.Gamma_at_root, v.x, v.w, v.F, r.e_onersb,
                     e_lbd(a, args.k, clamp=True), gap])
    emit_table(args, {"k": args.k, "c_grid": args.c_grid},
               ["k", "c", "alpha", "y_star", "Gamma", "x", "w", "F", "e_onersb", "e_lbd", "gap"],
               rows)


def cmd_bounds(args):
    from .firstmoment import compare
    b = compare(args.k, args.alpha, **_sp_kw(args))
    emit_json(args, {"k": args.k, "alpha": args.alpha},
              {"p_ubd": b.p_ubd, "eta": b.eta, "e_lbd": b.e_lbd, "y_eta": b.y_eta, "F": b.F,
               "gap": b.gap, "x_p": b.x_p})


def cmd_gardner(args):
    from .gardner import alpha_grid, gardner_scan
    alphas = parse_grid(args.alpha_grid, log=True) if args.alpha_grid else alpha_grid(args.k)
    res = gardner_scan(args.k, alphas, **_sp_kw(args))
    params = {"k": args.k, "alpha_grid": args.alpha_grid or "default"}
    if args.find_threshold:
        ga = res.alpha_ga
        emit_json(args, params, {
            "alpha_ga": ga, "crossings": res.crossings,
            "c_ga": None if ga is None else ga / (2 ** (args.k - 1) * math.log(2)),
            "scaled": None if ga is None else ga * args.k ** 3 / 4.0 ** args.k,
            "grid_points": len(res.rows)})
        return 0 if ga is not None else 3
    emit_table(args, params, ["alpha", "c", "y_star", "x", "w", "lambda", "branch_lambda"],
               [[r.alpha, r.c, r.y_star, r.x, r.w, r.lam, r.branch_lambda] for r in res.rows])


def cmd_perturb(args):
    from .gardner import build_matrices
    from .sp_core import sp_solve
    from .tworsb import perturb, perturbation_from_xi, delta_phi_expansion, phi_2rsb, q_ii
    pt = sp_solve(args.k, d=args.d, y=args.y, **_sp_kw(args))
    params = {"k": args.k, "d": args.d, "y": args.y, "zeta": args.zeta}
    if args.direct:
        r = perturb(args.k, args.d, args.y, args.zeta, pt=pt)
        payload = {"phi_base": r.phi_base, "phi_perturbed": r.phi_perturbed,
                   "expansion": r.expansion, "residual": r.residual,
                   "branch_lambda": r.branch_lambda}
    else:
        spec = perturbation_from_xi(args.k, args.d, args.y, args.zeta, pt)
        payload = {"phi_base": phi_2rsb(args.y, args.y, q_ii(spec.rho), args.k, args.d),
                   "phi_perturbed": None,
                   "expansion": delta_phi_expansion(args.k, args.d, args.y, pt, spec),
                   "residual": None,
                   "branch_lambda": build_matrices(args.k, args.d, args.y, pt).branch_lambda}
    emit_json(args, params, payload)


def cmd_instability(args):
    from .tworsb import instability_scan
    ks = args.k
    rows = []
    for k in ks:
        alphas = parse_grid(args.alpha_grid, log=True) if args.alpha_grid else None
        s = instability_scan(k, alphas, **_sp_kw(args))
        rel = s.rel_diff if s.alpha_lambda and s.alpha_sign else math.nan
        rows.append([k, s.alpha_lambda if s.alpha_lambda else math.nan,
                     s.alpha_sign if s.alpha_sign else math.nan, rel])
    emit_table(args, {"k": ks}, ["k", "alpha_branch_lambda_1", "alpha_delta_phi_flip", "rel_diff"],
               rows)


def cmd_verify(args):
    from .verify import run
    ran, failures = run(args.filter, set(args.inject_fault or ()))
    failed = {(f.module, f.identity) for f in failures}
    for module, identity in ran:
        if (module, identity) not in failed:
            print(f"ok   [{module}] {identity}")
    for f in failures:
        print(str(f))
    print(f"{len(ran)} checks, {len(failures)} failures")
    return 1 if failures else 0


# ---------------------------------------------------------------- parser

def _globals(parser, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    g = parser.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=d(0))
    g.add_argument("--threads", type=int, default=d(1))
    g.add_argument("--tol", type=float, default=d(None))
    g.add_argument("--out", default=d(None), help="write JSON output to FILE as well")
    g.add_argument("--csv", default=d(None), help="write tabular output to FILE")
    g.add_argument("--json", action="store_true", default=d(False))
    g.add_argument("--no-timestamp", action="store_true", default=d(False))


def build_parser():
    ap = argparse.ArgumentParser(prog="naesat-rsb", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    _globals(ap, suppress=False)
    sub = ap.add_subparsers(dest="cmd", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        _globals(p, suppress=True)
        p.set_defaults(func=fn)
        return p

    p = add("gen", cmd_gen, "sample an instance to JSON")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, required=True)

    p = add("solve", cmd_solve, "exact ground state of an instance file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--cap", type=int, default=28)

    p = add("mc", cmd_mc, "exact e_min statistics over random instances")
    for f in ("--k", "--d", "--n", "--trials"):
        p.add_argument(f, type=int, required=True)
    p.add_argument("--cap", type=int, default=28)

    p = add("tree-check", cmd_tree_check, "tree energy formula against brute force")
    p.add_argument("--in", dest="input", default=None)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--max-nodes", type=int, default=20)

    p = add("sp", cmd_sp, "SP fixed point")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--y", type=float, required=True)
    p.add_argument("--damping", type=float, default=0.7)

    p = add("energy-curve", cmd_energy_curve, "1RSB energy and bounds over a c grid")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--c-grid", required=True)

    p = add("bounds", cmd_bounds, "first-moment bound against the 1RSB free energy")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)

    p = add("gardner", cmd_gardner, "Gardner eigenvalue scan")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--alpha-grid", default=None, help="lo:hi:n, log spaced")
    p.add_argument("--find-threshold", action="store_true")

    p = add("perturb", cmd_perturb, "2RSB perturbation: direct value and expansion")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--y", type=float, required=True)
    p.add_argument("--zeta", type=float, required=True)
    p.add_argument("--direct", action="store_true")

    p = add("instability", cmd_instability, "Delta Phi sign flip against the Gardner crossing")
    p.add_argument("--k", type=int, nargs="+", required=True)
    p.add_argument("--alpha-grid", default=None)

    p = add("verify", cmd_verify, "run the identity and oracle suite")
    p.add_argument("--filter", default=None)
    p.add_argument("--inject-fault", action="append", help=argparse.SUPPRESS)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        rc = args.func(args)
    except NaesatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    sys.stdout.flush()
    return int(rc or 0)


if __name__ == "__main__":
    raise SystemExit(main())
