"""Command-line front end: ``qcf <command> [flags]``.

Exit status is 0 when every check of the command passes, 1 when a check
fails and 2 on usage errors.  A JSON report goes to ``--out`` when given and
a short summary to standard output.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from fractions import Fraction
from typing import Callable, Dict, List, Optional


def _set_threads(n: Optional[int]) -> None:
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(n)


def _jsonable(obj):
    import numpy as np

    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


# ---------------------------------------------------------------------------
# commands; each returns (report, summary lines)


def cmd_verify_complex(a):
    from .cfcomplex import verify_complex

    rep = verify_complex(a.n, a.k)
    lines = [f"D{c['j'] + 1} D{c['j']}: {'zero' if c['zero'] else 'NONZERO'} {tuple(c['shape'])} ({c['seconds']} s)"
             for c in rep["composites"]]
    return rep, lines


def cmd_commutator_table(a):
    from .group import verify_commutator_tables

    rep = verify_commutator_tables(a.n)
    lines = [f"{k}: {len(v)} failures" for k, v in rep["failures"].items()]
    lines.append(f"conjugation relations: {rep['conjugation_relations']}")
    return rep, lines


def cmd_box1(a):
    from .algebra import formal_adjoint
    from .cfcomplex import SymWedgeBasis, build_box1, render_matrix

    box = build_box1(a.n, a.k, a.convention)
    b1 = SymWedgeBasis(a.n, a.k, 1)
    w = b1.weights(a.convention)
    # self-adjointness: appendix entries satisfy M_ji = -conj^T style formal adjoints
    sa = True
    for i in range(box.shape[0]):
        for j in range(box.shape[1]):
            adj = formal_adjoint(box[j, i])
            if w[i] != w[j]:
                adj = adj.scale(Fraction(w[j]) / Fraction(w[i]))
            if adj != box[i, j]:
                sa = False
    rep = {"n": a.n, "k": a.k, "convention": a.convention, "shape": list(box.shape),
           "formally_self_adjoint": sa, "passed": sa}
    if a.emit == "json":
        rep["matrix"] = box.to_json_obj()
    lines = []
    if a.emit == "pretty":
        lines.append(render_matrix(box))
    if (a.n, a.k, a.convention) == (2, 2, "appendix"):
        from .appendix import appendix_report

        lit = appendix_report(corrected=False)
        cor = appendix_report(corrected=True)
        rep["reference_literal"] = lit
        rep["reference_corrected"] = cor
        rep["passed"] = sa and lit["passed"]
        n_mis = len(lit["D0"]["mismatches"]) + len(lit["D1"]["mismatches"]) + sum(
            len(v) for v in lit["box1"]["mismatches"].values())
        lines.append(f"printed reference, literal: {'match' if lit['passed'] else f'{n_mis} entries differ'}")
        for name in ("D0", "D1"):
            for m in lit[name]["mismatches"]:
                lines.append(f"  {name}[{m['row']},{m['col']}] printed {m['printed']}  computed {m['computed']}")
        for blk, ms in lit["box1"]["mismatches"].items():
            for m in ms:
                lines.append(f"  box1[{m['row']},{m['col']}] printed {m['printed']}  computed {m['computed']}")
        lines.append(f"with suspected misprints corrected: {'match' if cor['passed'] else 'differ'}")
    lines.append(f"formally self-adjoint: {sa}")
    return rep, lines


def cmd_verify_dd(a):
    from .cfcomplex import lemma_conj_ZZ, verify_dd

    rep = verify_dd(a.n, a.k)
    lem = lemma_conj_ZZ(a.n)
    rep["lemma_conj_ZZ"] = lem
    rep["passed"] = rep["passed"] and lem["passed"]
    return rep, [f"D0* D0 = Delta_b Id: {not rep['residual_entries']}", f"sum conj(Z) Z lemma: {lem['passed']}"]


def cmd_condition_h(a):
    from .group import condition_h_report

    rep = condition_h_report(a.n, scaled=a.scaled)
    return rep, [f"det B_lambda = {rep['determinant']}"]


def cmd_hypersurface_check(a):
    from .hypersurface import hypersurface_report

    rep = hypersurface_report(a.n, trials=a.trials, seed=a.seed, k=a.k)
    lines = [f"{k}: {v}" for k, v in rep.items() if isinstance(v, bool)]
    return rep, lines


def cmd_grid_check(a):
    from .torus import TwistedGrid, adjoint_consistency, check_shifts, cycle_check, skew_check, two_grid_study

    g = TwistedGrid(a.n, a.grid_N)
    shifts = check_shifts(g)
    cyc = all(cycle_check(g, ax) for ax in range(g.ndim))
    skew = skew_check(g, seed=a.seed)
    adj = adjoint_consistency(a.n, a.k, g, seed=a.seed)
    rep = {"n": a.n, "N": a.grid_N, "points": g.npts, "shifts": shifts, "cycles": cyc,
           "skew": skew, "adjoint": adj}
    ok = shifts["passed"] and cyc and skew["passed"] and adj["passed"]
    lines = [f"{g.npts} points; shifts are permutations: {shifts['passed']}; cycles: {cyc}",
             f"max skew defect {skew['max_relative']:.2e}; adjoint defect {adj['relative']:.2e}"]
    if a.two_grid:
        tg = two_grid_study(a.n, seed=a.seed)
        rep["two_grid"] = tg
        ok = ok and tg["passed"]
        lines += [f"two-grid ratio {k}: {v['ratio']:.3f}" for k, v in tg["ops"].items()]
    rep["passed"] = bool(ok)
    return rep, lines


def _write_history(path: str, hist: List[float]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "relative_residual"])
        for i, r in enumerate(hist):
            w.writerow([i, repr(r)])


def cmd_solve(a):
    from .torus import manufactured_solve

    rep = manufactured_solve(a.n, a.k, a.grid_N, seed=a.seed, tol=a.tol)
    if a.csv:
        _write_history(a.csv, rep["history"])
        rep["artifacts"] = [a.csv]
    rep["history_length"] = len(rep.pop("history"))
    lines = [f"CG: {rep['cg_iterations']} iterations, relative residual {rep['cg_relative_residual']:.2e}",
             f"||D0 u - f|| / ||f|| = {rep['residual']:.3e} (target 1e-6)",
             f"D1-closedness defect of f: {rep.get('closedness_defect', 0):.3e}"]
    return rep, lines


def cmd_spectral_gap(a):
    from .torus import TwistedGrid, dense_gap, spectral_gap

    g = TwistedGrid(a.n, a.grid_N)
    seeds = [a.seed + i for i in range(a.probes_seeds)]
    ests = [spectral_gap(g, probes=a.probes, seed=s) for s in seeds]
    vals = [e["estimate"] for e in ests]
    rep = {"n": a.n, "N": a.grid_N, "estimates": vals,
           "seed_spread": (max(vals) - min(vals)) / min(vals)}
    ok = min(vals) > 0 and rep["seed_spread"] <= 0.10
    lines = [f"gap estimate {vals[0]:.10g} (spread over {len(seeds)} seeds {rep['seed_spread']:.1e})"]
    if g.npts <= 5000:
        dense = dense_gap(g)
        rep["dense"] = dense
        rel = abs(vals[0] - dense["gap"]) / dense["gap"]
        rep["relative_to_dense"] = rel
        ok = ok and rel <= 0.01
        lines.append(f"dense gap {dense['gap']:.10g}; kernel dimension {dense['kernel_dim']}")
    rep["passed"] = bool(ok)
    return rep, lines


def cmd_energy_check(a):
    from .torus import TwistedGrid, energy_inequality_check

    g = TwistedGrid(a.n, a.grid_N)
    rep = energy_inequality_check(a.n, a.k, g, trials=a.trials, seed=a.seed)
    lines = [f"lhs {t['lhs']:.4e} rhs {t['rhs']:.4e}" for t in rep["trials"]]
    if rep["vacuous"]:
        lines.append("vacuous at this n: right side is nonpositive")
    return rep, lines


def cmd_hartogs_demo(a):
    from .torus import hartogs_demo

    rep = hartogs_demo(a.n, a.k, a.grid_N, seed=a.seed, tol=a.tol)
    c = rep["constant"]
    lines = [f"constant u: discrepancy {c['discrepancy_outside']:.2e}, ||D0 U|| rel {c['D0U_relative']:.2e}, "
             f"discretization error {c['discretization_error']:.2e}",
             f"zero cutoff: U = u: {rep['zero_cutoff']['passed']}"]
    d = rep["degree1"]
    lines.append("degree-1 u: " + (d.get("rejection") or f"discrepancy {d.get('discrepancy_outside')}"))
    return rep, lines


def cmd_export(a):
    from .algebra import to_json_obj
    from .cfcomplex import build_box1, build_D

    if a.what == "hypersurface":
        from .hypersurface import matrices_json, verify_pushforward_relation

        rep = {"matrices": matrices_json(),
               "pushforward": verify_pushforward_relation(a.n, trials=a.trials, seed=a.seed)}
        rep["passed"] = rep["pushforward"]["passed"]
    else:
        ops = {f"D{j}": build_D(a.n, a.k, j).to_json_obj() for j in range(2 * a.n - 1)}
        ops["box1"] = build_box1(a.n, a.k, a.convention).to_json_obj()
        rep = {"n": a.n, "k": a.k, "convention": a.convention, "operators": ops, "passed": True}
    return rep, [f"exported {a.what}"]


COMMANDS: Dict[str, Callable] = {
    "verify-complex": cmd_verify_complex,
    "commutator-table": cmd_commutator_table,
    "box1": cmd_box1,
    "verify-dd": cmd_verify_dd,
    "condition-h": cmd_condition_h,
    "hypersurface-check": cmd_hypersurface_check,
    "grid-check": cmd_grid_check,
    "solve": cmd_solve,
    "spectral-gap": cmd_spectral_gap,
    "energy-check": cmd_energy_check,
    "hartogs-demo": cmd_hartogs_demo,
    "export": cmd_export,
}


def _positive(v: str) -> int:
    i = int(v)
    if i < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return i


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qcf", description="k-Cauchy-Fueter complex checks and solvers")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    def common(sp, n=2, k=True, grid=False, conv=False):
        sp.add_argument("--n", type=_positive, default=n)
        if k:
            sp.add_argument("--k", type=_positive, default=2)
        if grid:
            sp.add_argument("--grid-N", type=int, default=3)
        if conv:
            sp.add_argument("--convention", choices=["tensor", "appendix"], default="tensor")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--tol", type=float, default=1e-10)
        sp.add_argument("--out", help="write the JSON report here")
        sp.add_argument("--threads", type=_positive, help="cap BLAS/OpenMP workers")

    common(sub.add_parser("verify-complex", help="D_{j+1} D_j = 0"))
    common(sub.add_parser("commutator-table", help="Z bracket tables"), k=False)
    sp = sub.add_parser("box1", help="render box1")
    common(sp, conv=True)
    sp.add_argument("--emit", choices=["pretty", "json", "none"], default="pretty")
    common(sub.add_parser("verify-dd", help="D0* D0 = Delta_b Id"))
    sp = sub.add_parser("condition-h", help="det B_lambda identity")
    common(sp, k=False)
    sp.add_argument("--scaled", action="store_true")
    sp = sub.add_parser("hypersurface-check", help="embedding and pushforward")
    common(sp, n=1)
    sp.add_argument("--trials", type=_positive, default=50)
    sp = sub.add_parser("grid-check", help="shifts, skewness, adjoint consistency")
    common(sp, n=1, grid=True)
    sp.add_argument("--two-grid", action="store_true", help="also run the N=5/N=9 consistency study")
    sp = sub.add_parser("solve", help="manufactured nonhomogeneous solve")
    common(sp, grid=True)
    sp.add_argument("--csv", help="write the CG residual history as CSV")
    sp = sub.add_parser("spectral-gap", help="Delta_b gap by inverse iteration")
    common(sp, n=1, k=False, grid=True)
    sp.add_argument("--probes", type=_positive, default=4)
    sp.add_argument("--probes-seeds", type=_positive, default=5)
    sp = sub.add_parser("energy-check", help="energy inequality sides")
    common(sp, grid=True)
    sp.add_argument("--trials", type=_positive, default=3)
    common(sub.add_parser("hartogs-demo", help="cutoff pipeline"), grid=True)
    sp = sub.add_parser("export", help="JSON export of matrices and operators")
    common(sp, conv=True)
    sp.add_argument("--what", choices=["hypersurface", "operators"], default="operators")
    sp.add_argument("--trials", type=_positive, default=10)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    if hasattr(args, "grid_N") and (args.grid_N < 3 or args.grid_N % 2 == 0):
        parser.error(f"--grid-N {args.grid_N}: must be odd and >= 3")
    _set_threads(args.threads)
    t0 = time.perf_counter()
    report, lines = COMMANDS[args.command](args)
    params = {k: v for k, v in vars(args).items() if k not in ("out", "command")}
    full = {"command": args.command, "parameters": params, "passed": bool(report.get("passed")),
            "seconds": round(time.perf_counter() - t0, 3), "report": _jsonable(report)}
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(full, fh, indent=2, sort_keys=True)
    for line in lines:
        print(line)
    print(f"{args.command}: {'PASS' if full['passed'] else 'FAIL'}")
    return 0 if full["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
