import json
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qcf.algebra import (
    DifferentialOperator,
    ExpPolyFunction,
    GaussianRational as GR,
    OperatorMatrix,
    Polynomial,
    apply,
    commutator,
    compose,
    conjugate,
    formal_adjoint,
    from_json,
    to_json,
)

NY, NS = 4, 3
NV = NY + NS

fracs = st.fractions(min_value=-5, max_value=5, max_denominator=6)
gaussians = st.builds(GR, fracs, fracs)


@st.composite
def polys(draw, max_terms=3, max_deg=2):
    terms = {}
    for _ in range(draw(st.integers(0, max_terms))):
        e = tuple(draw(st.integers(0, max_deg)) if i < 3 else 0 for i in range(NV))
        terms[e] = draw(gaussians)
    return Polynomial(NV, terms)


@st.composite
def operators(draw, max_terms=3):
    terms = {}
    for _ in range(draw(st.integers(0, max_terms))):
        d = tuple(draw(st.integers(0, 1)) if i in (0, 1, 4) else 0 for i in range(NV))
        e = tuple(draw(st.integers(0, 1)) if i in (0, 2) else 0 for i in range(NV))
        terms[(d, e)] = draw(gaussians)
    return DifferentialOperator(NY, NS, terms)


@given(gaussians, gaussians, gaussians)
def test_gaussian_field_laws(a, b, c):
    assert (a + b) + c == a + (b + c)
    assert a * (b + c) == a * b + a * c
    assert (a * b) * c == a * (b * c)
    if not b.is_zero():
        assert (a / b) * b == a


def test_gaussian_rejects_float_complex():
    with pytest.raises(TypeError):
        GR.coerce(1 + 2j)


@given(polys(), polys(), polys())
def test_polynomial_ring(p, q, r):
    assert (p + q) * r == p * r + q * r
    assert (p * q) * r == p * (q * r)
    assert (p - p).is_zero()


@given(operators(), operators(), operators())
def test_composition_associative(A, B, C):
    assert compose(compose(A, B), C) == compose(A, compose(B, C))


@given(operators(), operators())
def test_commutator_antisymmetric(A, B):
    assert commutator(A, B) == -commutator(B, A)


@given(operators())
def test_formal_adjoint_involution(A):
    assert formal_adjoint(formal_adjoint(A)) == A
    assert conjugate(conjugate(A)) == A


@given(operators(), operators())
def test_adjoint_reverses_products(A, B):
    assert formal_adjoint(compose(A, B)) == compose(formal_adjoint(B), formal_adjoint(A))


def test_weyl_relation():
    d = DifferentialOperator.partial(NY, NS, 0)
    x = DifferentialOperator.multiplication(Polynomial.variable(NV, 0), NY, NS)
    assert commutator(d, x) == DifferentialOperator.identity(NY, NS)


@given(operators(), operators(), polys(max_terms=2))
def test_apply_respects_composition(A, B, p):
    f = ExpPolyFunction(p, [Fraction(1, 2), 0, -1, 0, 2, 0, 0])
    assert apply(compose(A, B), f) == apply(A, apply(B, f))


@given(operators())
def test_json_round_trip(A):
    assert from_json(to_json(A)) == A
    json.loads(to_json(A))


def test_matrix_product_shapes():
    z = DifferentialOperator(NY, NS)
    one = DifferentialOperator.identity(NY, NS)
    M = OperatorMatrix([0, 1], [0], [[one], [z]], NY, NS)
    N = OperatorMatrix([0], [0, 1, 2], [[one, z, one]], NY, NS)
    assert (M @ N).shape == (2, 3)
    with pytest.raises(Exception):
        N @ N
