"""Acceptance criteria 1-12, one PASS/FAIL line each.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines.  The heavy
n=2 grid solves (criteria 10 and 12) take several minutes each.
"""

import pytest

from conftest import CRITERIA

from qcf.appendix import appendix_report
from qcf.cfcomplex import finite_tensor_identity_check, lemma_conj_ZZ, verify_complex, verify_dd
from qcf.group import condition_h_report, verify_commutator_tables
from qcf.hypersurface import hypersurface_report
from qcf.torus import (
    TwistedGrid,
    adjoint_consistency,
    dense_gap,
    hartogs_demo,
    manufactured_solve,
    skew_check,
    spectral_gap,
    two_grid_study,
)

TOL_ADJ = 1e-13
RATIO_BAND = (2.8, 5.6)
CG_TOL = 1e-8
U_TOL = 1e-6
MAX_ITER = 10_000
GAP_DENSE_REL = 0.01
GAP_SEED_SPREAD = 0.10
HARTOGS_FACTOR = 10.0


def report(num, ok, detail):
    line = f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    CRITERIA.append(line)
    print("\n" + line)
    assert ok, detail


@pytest.mark.parametrize("n,k", [(2, 2), (2, 3), (3, 2)])
def test_01_complex_property(n, k):
    rep = verify_complex(n, k)
    worst = max(c["seconds"] for c in rep["composites"])
    report(1, rep["passed"] and worst <= 60,
           f"(n,k)=({n},{k}) composites zero: {[c['zero'] for c in rep['composites']]}, slowest {worst:.1f} s")


def test_02_appendix_reproduction():
    lit = appendix_report(corrected=False)
    n_bad = len(lit["D0"]["mismatches"]) + len(lit["D1"]["mismatches"]) + sum(
        len(v) for v in lit["box1"]["mismatches"].values())
    cor = appendix_report(corrected=True)
    report(2, lit["passed"],
           f"literal reference: {n_bad} entries differ; with those corrected: {'match' if cor['passed'] else 'differ'}")


def test_03_diagonality():
    dd = {(n, k): verify_dd(n, k)["passed"] for n in (1, 2, 3) for k in (2, 3)}
    lem = {n: lemma_conj_ZZ(n)["passed"] for n in (1, 2, 3, 4)}
    report(3, all(dd.values()) and all(lem.values()), f"D0*D0 = Delta_b Id: {dd}; lemma n<=4: {lem}")


def test_04_commutator_tables():
    reps = {n: verify_commutator_tables(n) for n in (1, 2, 3)}
    fails = {n: sum(len(v) for v in r["failures"].values()) for n, r in reps.items()}
    report(4, all(r["passed"] for r in reps.values()), f"failures per n: {fails}")


def test_05_condition_h():
    res = {n: condition_h_report(n)["passed"] for n in (1, 2, 3, 4)}
    report(5, all(res.values()), f"det B_lambda closed form per n: {res}")


def test_06_hypersurface():
    reps = {n: hypersurface_report(n, trials=50, seed=0) for n in (1, 2)}
    detail = {n: {k: (v if isinstance(v, bool) else v["passed"]) for k, v in r.items()
                  if isinstance(v, bool) or k in ("pushforward_relation", "restriction")}
              for n, r in reps.items()}
    report(6, all(r["passed"] for r in reps.values()), f"{detail}")


def test_07_finite_tensor_identity():
    res = {n: finite_tensor_identity_check(100, n, seed=0)["passed"] for n in (1, 2, 3)}
    report(7, all(res.values()), f"100 random pairs per n: {res}")


def test_08_discrete_adjointness():
    cases = [(1, 3), (1, 5), (1, 9), (2, 3)]
    worst = 0.0
    ok = True
    for n, N in cases:
        g = TwistedGrid(n, N)
        sk = skew_check(g)
        adj = adjoint_consistency(n, 2, g)
        worst = max(worst, sk["max_relative"], adj["relative"])
        ok = ok and sk["max_relative"] <= TOL_ADJ and adj["relative"] <= TOL_ADJ
        del g
    report(8, ok, f"worst relative defect {worst:.2e} over (n,N) in {cases} (tol {TOL_ADJ:g})")


def test_09_consistency_order():
    tg = two_grid_study(1, Ns=(5, 9), seed=0)
    ratios = {k: round(v["ratio"], 3) for k, v in tg["ops"].items()}
    ok = all(RATIO_BAND[0] <= r <= RATIO_BAND[1] for r in ratios.values())
    report(9, ok, f"two-grid ratios N=5 vs 9: {ratios} (band {RATIO_BAND})")


def test_10_solver():
    rep = manufactured_solve(2, 2, 3, seed=7, tol=1e-10)
    ok = (rep["cg_relative_residual"] <= CG_TOL and rep["cg_iterations"] <= MAX_ITER
          and rep["residual"] <= U_TOL)
    report(10, ok,
           f"CG {rep['cg_iterations']} it, rel res {rep['cg_relative_residual']:.2e} (tol {CG_TOL:g}); "
           f"||D0u-f||/||f|| = {rep['residual']:.2e} (tol {U_TOL:g}); "
           f"closedness defect of f {rep.get('closedness_defect', float('nan')):.2e}")


def test_11_spectral_gap():
    g = TwistedGrid(1, 3)
    dense = dense_gap(g)
    ests = [spectral_gap(g, seed=s)["estimate"] for s in range(5)]
    rel = abs(ests[0] - dense["gap"]) / dense["gap"]
    spread = (max(ests) - min(ests)) / min(ests)
    ok = min(ests) > 0 and rel <= GAP_DENSE_REL and spread <= GAP_SEED_SPREAD
    report(11, ok, f"gap {ests[0]:.10g}, dense {dense['gap']:.10g}, rel {rel:.1e}, seed spread {spread:.1e}")


def test_12_hartogs():
    rep = hartogs_demo(2, 2, 3, seed=0)
    c = rep["constant"]
    err = c["discretization_error"]
    ok = (c["discrepancy_outside"] <= HARTOGS_FACTOR * err and c["D0U_relative"] <= HARTOGS_FACTOR * err
          and rep["zero_cutoff"]["passed"] and rep["constant_fiber_bump"]["passed"])
    d = rep["degree1"]
    report(12, ok,
           f"constant u: discrepancy {c['discrepancy_outside']:.2e}, ||D0U|| rel {c['D0U_relative']:.2e}, "
           f"error {err:.2e}; degree-1 u: {'rejected' if not d['accepted'] else 'accepted'} (seam defect {d['seam_defect']:.2e})")
