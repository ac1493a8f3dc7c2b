import random
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qcf.algebra import OperatorMatrix
from qcf.group import GroupElement, build_Z, lattice_reduce, sublaplacian
from qcf.torus import (
    ConvergenceError,
    DiscreteComplex,
    PatchGrid,
    TwistedGrid,
    adjoint_consistency,
    cg_solve,
    check_shifts,
    cycle_check,
    dense_gap,
    discretize,
    energy_inequality_check,
    first_order,
    grid_bump,
    hartogs_pipeline,
    patch_matches_grid,
    random_section,
    skew_check,
    smooth_section,
    solve_nonhomogeneous,
    spectral_gap,
)


@pytest.fixture(scope="module")
def g13():
    return TwistedGrid(1, 3)


def test_even_N_rejected():
    with pytest.raises(ValueError, match="odd"):
        TwistedGrid(1, 4)


def test_grid_size(g13):
    assert g13.npts == 3 ** 7


@pytest.mark.parametrize("n,N", [(1, 3), (1, 5)])
def test_shifts_are_permutations(n, N):
    g = TwistedGrid(n, N)
    assert check_shifts(g)["passed"]
    assert all(cycle_check(g, a) for a in range(g.ndim))


@given(st.integers(0, 3 ** 7 - 1), st.integers(0, 3), st.sampled_from([1, -1]))
def test_shift_agrees_with_lattice_reduction(p, axis, step):
    g = TwistedGrid(1, 3)
    perm = g.shift_permutation(axis, step)
    idx = np.unravel_index(p, g.shape)
    y = [Fraction(int(i), 3) for i in idx[:4]]
    s = [Fraction(int(i), 3) for i in idx[4:]]
    y[axis] += Fraction(step, 3)
    _, rep = lattice_reduce(GroupElement(tuple(y), tuple(s)))
    q = np.ravel_multi_index(tuple(int(v * 3) for v in rep.y + rep.s), g.shape)
    assert perm[p] == q


def test_s_shift_plain(g13):
    perm = g13.shift_permutation(4, 1)
    idx = np.indices(g13.shape).reshape(7, -1)
    want = idx.copy()
    want[4] = (want[4] + 1) % 3
    assert np.array_equal(perm, np.ravel_multi_index(tuple(want), g13.shape))


def test_Y_kills_constants(g13):
    c = np.ones(g13.shape + (1,))
    for a in range(4):
        assert np.max(np.abs(g13.Y(c, a))) == 0


@pytest.mark.parametrize("n,N", [(1, 3), (1, 5)])
def test_skew(n, N):
    assert skew_check(TwistedGrid(n, N))["passed"]


def test_adjoint_consistency_small():
    assert adjoint_consistency(1, 2, TwistedGrid(1, 3))["passed"]
    assert adjoint_consistency(1, 3, TwistedGrid(1, 3))["passed"]


def test_generic_discretization_matches_fast_path(g13):
    rng = np.random.default_rng(0)
    Z = build_Z(1).upper
    M = OperatorMatrix([0, 1], [0, 1], [[Z[0][0], Z[0][1]], [Z[1][0], Z[1][1]]], 4, 3)
    F = random_section(g13, 2, rng)
    assert np.allclose(discretize(M, g13)(F), first_order(M, g13)(F), atol=1e-12)
    L = discretize(sublaplacian(1), g13)(F[..., :1])
    assert np.allclose(L, g13.sublaplacian(F[..., :1]), atol=1e-10)


def test_order_three_rejected(g13):
    from qcf.algebra import compose

    L = sublaplacian(1)
    with pytest.raises(ValueError):
        discretize(compose(L, build_Z(1).upper[0][0]), g13)


def test_patch_stencil_is_grid_stencil():
    assert patch_matches_grid(1, 5) == 0.0


def test_sublaplacian_psd_kernel_constants(g13):
    d = dense_gap(g13)
    assert d["kernel_dim"] == 1 and d["min_eigenvalue"] > -1e-10 and d["symmetry_error"] == 0


def test_cg_zero_rhs(g13):
    x, info = cg_solve(g13.sublaplacian, np.zeros(g13.shape + (1,)), g13.inner, project=g13.remove_constants)
    assert not x.any() and info["iterations"] == 0


def test_cg_manufactured(g13):
    x = g13.remove_constants(np.random.default_rng(1).standard_normal(g13.shape + (1,)))
    y, info = cg_solve(g13.sublaplacian, g13.sublaplacian(x), g13.inner, project=g13.remove_constants)
    assert g13.norm(y - x) / g13.norm(x) < 1e-8


def test_cg_reports_history(g13):
    b = g13.remove_constants(np.random.default_rng(2).standard_normal(g13.shape + (1,)))
    with pytest.raises(ConvergenceError) as exc:
        cg_solve(g13.sublaplacian, b, g13.inner, project=g13.remove_constants, max_iter=3)
    assert len(exc.value.history) == 4


def test_spectral_gap_small(g13):
    est = spectral_gap(g13, seed=3)
    assert est["positive"]
    assert abs(est["estimate"] - dense_gap(g13)["gap"]) < 1e-6
    assert abs(est["constant_rayleigh"]) < 1e-12


def test_solve_rejects_constants():
    g = TwistedGrid(1, 3)
    cx = DiscreteComplex(1, 2, g)
    with pytest.raises(ValueError, match="constants"):
        solve_nonhomogeneous(cx, np.ones(g.shape + (cx.b1.dim,)))


def test_solve_n1_exact():
    # at n = 1 there is no D1 and box1 = D0 D0*, so the manufactured solve is exact
    g = TwistedGrid(1, 3)
    cx = DiscreteComplex(1, 2, g)
    f = cx.D0(smooth_section(g, cx.b0.dim, np.random.default_rng(4)))
    u, rep = solve_nonhomogeneous(cx, g.remove_constants(f))
    assert rep["residual"] < 1e-8


def test_s_independent_data_closed():
    g = TwistedGrid(2, 3)
    cx = DiscreteComplex(2, 2, g)
    rng = np.random.default_rng(0)
    gy = rng.standard_normal((3,) * 8 + (1, 1, 1, cx.b0.dim))
    gsec = np.broadcast_to(gy, g.shape + (cx.b0.dim,)).astype(complex)
    d = cx.D1(cx.D0(gsec))
    assert np.max(np.abs(d)) < 1e-10


def test_energy_identity_n2():
    rep = energy_inequality_check(2, 2, TwistedGrid(2, 3), trials=1)
    assert rep["vacuous"] and rep["passed"]
    assert rep["constant_sides"] == [0.0, 0.0]


def test_hartogs_zero_cutoff_and_constant_fiber():
    g = TwistedGrid(2, 3)
    cx = DiscreteComplex(2, 2, g)
    u = np.broadcast_to(np.array([1.0, 2j, -1.0]), g.shape + (3,)).copy()
    rep = hartogs_pipeline(cx, u, np.zeros(g.shape))
    assert np.array_equal(rep["U"], u)
    rep = hartogs_pipeline(cx, u, grid_bump(g))
    assert rep["discrepancy_outside"] < 1e-10


def test_hartogs_rejects_nonkcf():
    g = TwistedGrid(1, 3)
    cx = DiscreteComplex(1, 2, g)
    u = random_section(g, 3, np.random.default_rng(0))
    with pytest.raises(ValueError, match="k-CF"):
        hartogs_pipeline(cx, u, grid_bump(g))
