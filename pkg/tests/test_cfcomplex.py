import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qcf.cfcomplex import (
    APPENDIX,
    TENSOR,
    SymWedgeBasis,
    antisymmetrise,
    build_D,
    build_D0_star,
    build_D0_star_tensor_formula,
    convention_relation,
    dims,
    euler_characteristic,
    finite_tensor_identity_check,
    lemma_conj_ZZ,
    lemma_sym_antisym,
    render_Y,
    symmetrise,
    verify_complex,
    verify_dd,
)


@pytest.mark.parametrize("n,k", [(2, 2), (2, 3), (3, 2), (3, 3)])
def test_euler_characteristic_vanishes(n, k):
    assert euler_characteristic(n, k) == 0


def test_dims_example():
    assert dims(2, 2) == [3, 8, 6, 1]


@pytest.mark.parametrize("n,k,j", [(2, 2, 0), (2, 2, 1), (2, 3, 2), (3, 2, 3)])
def test_basis_index_round_trip(n, k, j):
    b = SymWedgeBasis(n, k, j)
    assert [b.index(r, w) for r, w in b.components] == list(range(b.dim))
    assert len(set(b.labels())) == b.dim


@given(st.dictionaries(st.tuples(*[st.integers(0, 2)] * 3), st.integers(-5, 5), max_size=6))
def test_symmetrise_projects(T):
    S = symmetrise(T)
    assert symmetrise(S) == S
    A = antisymmetrise(T)
    assert antisymmetrise(A) == A


@pytest.mark.parametrize("n,k", [(1, 2), (2, 2), (2, 3)])
def test_complex_property(n, k):
    rep = verify_complex(n, k)
    assert rep["passed"], rep


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("k", [2, 3])
def test_D0star_D0_diagonal(n, k):
    assert verify_dd(n, k)["passed"]


def test_tensor_adjoint_formula_matches_weighted_adjoint():
    for n, k in [(1, 2), (2, 2), (2, 3)]:
        assert build_D0_star_tensor_formula(n, k) == build_D0_star(n, k, TENSOR)
        assert convention_relation(n, k)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_conj_ZZ_lemma(n):
    assert lemma_conj_ZZ(n)["passed"]


def test_sym_antisym_lemma():
    assert lemma_sym_antisym(2)["passed"]


def test_finite_identity():
    assert finite_tensor_identity_check(20, 2, seed=3)["passed"]


def test_D0_rendering():
    D0 = build_D(2, 2, 0)
    assert render_Y(D0[0, 0]) == "-Y3-iY4"
    assert render_Y(D0[1, 1]) == "-Y3+iY4"
