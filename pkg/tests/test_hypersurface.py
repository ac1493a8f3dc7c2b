import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qcf.hypersurface import (
    NotKRegularError,
    X_bracket_check,
    ambient_nvars,
    build_X,
    build_X_from_I,
    coord_map_F,
    coord_map_F_inverse,
    matrix_checks,
    mat2_mul,
    qmul,
    restrict_kregular,
    restriction_report,
    tangency_check,
    tau_embed,
    verify_pushforward_relation,
)
from qcf.algebra import Polynomial

fr = st.fractions(min_value=-5, max_value=5, max_denominator=5)
quats = st.tuples(fr, fr, fr, fr)


def test_matrix_identities():
    assert all(matrix_checks().values())


@given(quats, quats)
def test_tau_multiplicative(p, q):
    assert tau_embed(qmul(p, q)) == mat2_mul(tau_embed(p), tau_embed(q))


@given(st.tuples(*[fr] * 4), st.tuples(fr, fr, fr))
def test_coordinate_map_inverse(y, s):
    x, t = coord_map_F(y, s)
    assert coord_map_F_inverse(x, t) == (tuple(y), tuple(s))


@pytest.mark.parametrize("n", [1, 2])
def test_fields(n):
    assert build_X_from_I(n) == build_X(n)
    assert X_bracket_check(n)
    assert tangency_check(n)["passed"]


def test_pushforward_small():
    assert verify_pushforward_relation(1, trials=5, seed=1)["passed"]


def test_restriction():
    rep = restriction_report(1, 2, seed=2)
    assert rep["passed"] and rep["degree1_basis_size"] > 0


def test_non_regular_rejected():
    nv = ambient_nvars(1)
    with pytest.raises(NotKRegularError):
        restrict_kregular([Polynomial.variable(nv, 0)] + [Polynomial(nv)] * 2, 1, 2)
