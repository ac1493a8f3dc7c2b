"""The right quaternionic Heisenberg group H = R^{4n} x R^3.

Coordinates are (y_1..y_{4n}, s_1, s_2, s_3).  The structure matrices B^beta
encode 2 Im(x conj(y)) in real form; all fields below are built from them.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple

from .algebra import (
    DifferentialOperator,
    GaussianRational,
    OperatorMatrix,
    Polynomial,
    _grlex,
    commutator,
    compose,
    conjugate,
)

B1 = ((0, -1, 0, 0), (1, 0, 0, 0), (0, 0, 0, -1), (0, 0, 1, 0))
B2 = ((0, 0, -1, 0), (0, 0, 0, 1), (1, 0, 0, 0), (0, -1, 0, 0))
B3 = ((0, 0, 0, -1), (0, 0, -1, 0), (0, 1, 0, 0), (1, 0, 0, 0))
B = (B1, B2, B3)

EPS_LOWER = ((0, 1), (-1, 0))
EPS_UPPER = ((0, -1), (1, 0))


def matmul4(a, b):
    return tuple(tuple(sum(a[i][k] * b[k][j] for k in range(4)) for j in range(4)) for i in range(4))


def transpose4(a):
    return tuple(tuple(a[j][i] for j in range(4)) for i in range(4))


IDENTITY4 = tuple(tuple(int(i == j) for j in range(4)) for i in range(4))


# ---------------------------------------------------------------------------
# group elements


@dataclass(frozen=True)
class GroupElement:
    y: Tuple
    s: Tuple

    def __post_init__(self):
        if len(self.y) % 4 or len(self.s) != 3:
            raise ValueError("need 4n y-coordinates and 3 s-coordinates")

    @property
    def n(self) -> int:
        return len(self.y) // 4

    @classmethod
    def identity(cls, n: int) -> "GroupElement":
        return cls((0,) * (4 * n), (0, 0, 0))


@dataclass(frozen=True)
class LatticeElement:
    n: Tuple[int, ...]
    m: Tuple[int, int, int]

    def as_group_element(self) -> GroupElement:
        return GroupElement(tuple(self.n), tuple(self.m))


def shear(x: Sequence, y: Sequence) -> Tuple:
    """``2 sum_l sum_{j,k} B^beta_{kj} x_{4l+k} y_{4l+j}`` for beta = 1, 2, 3."""
    out = []
    for Bb in B:
        acc = 0
        for l in range(len(x) // 4):
            for k in range(4):
                xk = x[4 * l + k]
                if not xk:
                    continue
                for j in range(4):
                    if Bb[k][j]:
                        acc += Bb[k][j] * xk * y[4 * l + j]
        out.append(2 * acc)
    return tuple(out)


def group_multiply(g: GroupElement, h: GroupElement) -> GroupElement:
    if g.n != h.n:
        raise ValueError(f"dimension mismatch: n={g.n} vs n={h.n}")
    sh = shear(g.y, h.y)
    return GroupElement(
        tuple(a + b for a, b in zip(g.y, h.y)),
        tuple(a + b + c for a, b, c in zip(g.s, h.s, sh)),
    )


def group_inverse(g: GroupElement) -> GroupElement:
    return GroupElement(tuple(-a for a in g.y), tuple(-a for a in g.s))


def group_norm(g: GroupElement, exact: bool = False):
    """``(|y|^4 + |s|^2)^(1/4)``.  With ``exact`` the fourth power is returned."""
    y2 = sum(a * a for a in g.y)
    s2 = sum(a * a for a in g.s)
    q = y2 * y2 + s2
    if exact:
        return q
    return float(q) ** 0.25


def dilate(g: GroupElement, r) -> GroupElement:
    return GroupElement(tuple(r * a for a in g.y), tuple(r * r * a for a in g.s))


def _floor(x):
    return math.floor(x)


def lattice_reduce(g: GroupElement) -> Tuple[LatticeElement, GroupElement]:
    """Split ``g = (n, m) . g'`` with integral (n, m) and g' in [0, 1)^{4n+3}."""
    n = tuple(int(_floor(a)) for a in g.y)
    yp = tuple(a - k for a, k in zip(g.y, n))
    sh = shear(n, yp)
    rhs = tuple(a - c for a, c in zip(g.s, sh))
    m = tuple(int(_floor(a)) for a in rhs)
    sp = tuple(a - k for a, k in zip(rhs, m))
    return LatticeElement(n, m), GroupElement(yp, sp)


def in_fundamental_set(g: GroupElement) -> bool:
    return all(0 <= a < 1 for a in g.y) and all(0 <= a < 1 for a in g.s)


# ---------------------------------------------------------------------------
# left-invariant fields


def _yvar(l: int, j: int) -> int:
    """Flat index of y_{4l+j} (j = 1..4)."""
    return 4 * l + j - 1


def build_Y(n: int) -> List[DifferentialOperator]:
    """``Y_{4l+j} = d_{y_{4l+j}} + 2 sum_beta sum_k B^beta_{kj} y_{4l+k} d_{s_beta}``."""
    if n < 1:
        raise ValueError("n >= 1 required")
    ny, ns = 4 * n, 3
    nv = ny + ns
    fields = []
    for l in range(n):
        for j in range(1, 5):
            terms = {}
            d = [0] * nv
            d[_yvar(l, j)] = 1
            terms[(tuple(d), (0,) * nv)] = 1
            for beta in range(3):
                d = [0] * nv
                d[ny + beta] = 1
                for k in range(1, 5):
                    c = B[beta][k - 1][j - 1]
                    if c:
                        e = [0] * nv
                        e[_yvar(l, k)] = 1
                        key = (tuple(d), tuple(e))
                        terms[key] = terms.get(key, 0) + 2 * c
            fields.append(DifferentialOperator(ny, ns, terms))
    return fields


def ds(n: int, beta: int) -> DifferentialOperator:
    """``d/ds_beta`` for beta = 1, 2, 3."""
    return DifferentialOperator.partial(4 * n, 3, 4 * n + beta - 1)


def sublaplacian(n: int) -> DifferentialOperator:
    """``Delta_b = -sum_a Y_a Y_a``."""
    out = DifferentialOperator(4 * n, 3)
    for Y in build_Y(n):
        out = out - compose(Y, Y)
    return out


def bracket_table(n: int) -> Dict[Tuple[int, int], DifferentialOperator]:
    Y = build_Y(n)
    return {(a + 1, b + 1): commutator(Y[a], Y[b]) for a in range(4 * n) for b in range(4 * n)}


def expected_bracket(n: int, a: int, b: int) -> DifferentialOperator:
    """Closed form ``[Y_{4l+k}, Y_{4l'+j}] = 4 delta_{ll'} sum_beta B^beta_{kj} d_{s_beta}`` (1-based a, b)."""
    la, ka = divmod(a - 1, 4)
    lb, kb = divmod(b - 1, 4)
    out = DifferentialOperator(4 * n, 3)
    if la != lb:
        return out
    for beta in range(3):
        c = B[beta][ka][kb]
        if c:
            out = out + ds(n, beta + 1).scale(4 * c)
    return out


# ---------------------------------------------------------------------------
# complex horizontal fields


@dataclass
class ZFields:
    """Upper-index ``Z_A^{A'}`` and lower-index ``Z_{AA'}`` (2n x 2 each)."""

    n: int
    upper: List[List[DifferentialOperator]]
    lower: List[List[DifferentialOperator]]

    def matrix(self) -> OperatorMatrix:
        rows = [f"Z_{A}" for A in range(2 * self.n)]
        return OperatorMatrix(rows, ["0'", "1'"], self.upper, 4 * self.n, 3)

    def lower_matrix(self) -> OperatorMatrix:
        rows = [f"Z_{A}" for A in range(2 * self.n)]
        return OperatorMatrix(rows, ["0'", "1'"], self.lower, 4 * self.n, 3)


def tau_pattern(v1, v2, v3, v4, add, scale):
    """The embedding pattern [[v1+i v2, -v3-i v4], [v3-i v4, v1-i v2]]."""
    i = GaussianRational(0, 1)
    mi = GaussianRational(0, -1)
    return [
        [add(v1, scale(v2, i)), add(scale(v3, -1), scale(v4, mi))],
        [add(v3, scale(v4, mi)), add(v1, scale(v2, mi))],
    ]


def raise_index(lower_row: Sequence, add, scale) -> List:
    """``Z^{A'} = sum_B' Z_{B'} eps^{B'A'}``."""
    out = []
    for a in range(2):
        acc = None
        for b in range(2):
            e = EPS_UPPER[b][a]
            if e:
                t = scale(lower_row[b], e)
                acc = t if acc is None else add(acc, t)
        out.append(acc)
    return out


def lower_index(upper_row: Sequence, add, scale) -> List:
    """``Z_{A'} = sum_B' Z^{B'} eps_{B'A'}``."""
    out = []
    for a in range(2):
        acc = None
        for b in range(2):
            e = EPS_LOWER[b][a]
            if e:
                t = scale(upper_row[b], e)
                acc = t if acc is None else add(acc, t)
        out.append(acc)
    return out


def _opadd(a, b):
    return a + b


def _opscale(a, c):
    return a.scale(c)


def build_Z(n: int) -> ZFields:
    """Lower fields from the quaternion embedding, raised with eps."""
    Y = build_Y(n)
    lower: List[List[DifferentialOperator]] = []
    for l in range(n):
        block = tau_pattern(Y[4 * l], Y[4 * l + 1], Y[4 * l + 2], Y[4 * l + 3], _opadd, _opscale)
        lower.extend(block)
    upper = [raise_index(row, _opadd, _opscale) for row in lower]
    return ZFields(n, upper, lower)


def Z_table_literal(n: int) -> List[List[DifferentialOperator]]:
    """The displayed upper-index table, written out directly from the Y's."""
    Y = build_Y(n)
    i = GaussianRational(0, 1)
    rows = []
    for l in range(n):
        y1, y2, y3, y4 = Y[4 * l : 4 * l + 4]
        rows.append([-y3 - y4.scale(i), -y1 - y2.scale(i)])
        rows.append([y1 - y2.scale(i), -y3 + y4.scale(i)])
    return rows


# ---------------------------------------------------------------------------
# expansion in the left-invariant basis


def _y_monomial_cache():
    return {}


_MONO_CACHE: Dict[Tuple[int, Tuple, Tuple], DifferentialOperator] = {}


def y_word(n: int, alpha: Sequence[int], beta: Sequence[int]) -> DifferentialOperator:
    """Normal form of ``Y_1^{a_1} ... Y_{4n}^{a_{4n}} d_s^beta``."""
    key = (n, tuple(alpha), tuple(beta))
    if key in _MONO_CACHE:
        return _MONO_CACHE[key]
    Y = build_Y(n)
    out = DifferentialOperator.identity(4 * n, 3)
    for a, k in enumerate(alpha):
        for _ in range(k):
            out = compose(out, Y[a])
    for b, k in enumerate(beta):
        for _ in range(k):
            out = compose(out, ds(n, b + 1))
    _MONO_CACHE[key] = out
    return out


class NotLeftInvariant(ValueError):
    pass


def horizontal_expansion(op: DifferentialOperator) -> Dict[Tuple[Tuple[int, ...], Tuple[int, ...]], GaussianRational]:
    """Write a left-invariant operator as ``sum c * Y^alpha d_s^beta`` (ordered words).

    Raises ``NotLeftInvariant`` when a leading coefficient is not constant.
    """
    n = op.ny // 4
    ny = op.ny
    rest = op
    out = {}
    while not rest.is_zero():
        top = max(sum(d[:ny]) for d, _ in rest.terms)
        cand = sorted({d for d, _ in rest.terms if sum(d[:ny]) == top}, key=_grlex)
        d = cand[-1]
        p = rest.coefficient(d)
        z = (0,) * op.nvars
        if set(p.terms) != {z}:
            raise NotLeftInvariant(f"coefficient of derivative {d} is not constant")
        c = p.terms[z]
        alpha, beta = tuple(d[:ny]), tuple(d[ny:])
        out[(alpha, beta)] = c
        rest = rest - y_word(n, alpha, beta).scale(c)
    return out


# ---------------------------------------------------------------------------
# condition (H)


def B_lambda_block(lam: Sequence):
    """``sum_beta lambda_beta B^beta`` as nested lists."""
    return [[sum(lam[b] * B[b][i][j] for b in range(3)) for j in range(4)] for i in range(4)]


def condition_h(lam: Sequence, n: int, scaled: bool = False):
    """Block-diagonal form of B_lambda and its determinant.

    ``lam`` entries may be ints, Fractions or sympy expressions.  With
    ``scaled`` the blocks carry the factor 4 from the bracket relation.
    """
    import sympy

    block = B_lambda_block(lam)
    f = 4 if scaled else 1
    size = 4 * n
    M = sympy.zeros(size, size)
    for l in range(n):
        for i in range(4):
            for j in range(4):
                M[4 * l + i, 4 * l + j] = f * sympy.sympify(block[i][j])
    det = sympy.expand(M.det(method="berkowitz"))
    return M, det


def condition_h_closed_form(lam: Sequence, n: int, scaled: bool = False):
    import sympy

    base = sum(sympy.sympify(x) ** 2 for x in lam) ** (2 * n)
    return sympy.expand(base * (4 ** (4 * n) if scaled else 1))


# ---------------------------------------------------------------------------
# left translation


def left_translation_polys(g: GroupElement) -> List[Polynomial]:
    """Coordinates of ``g . (y, s)`` as polynomials in (y, s)."""
    n = g.n
    nv = 4 * n + 3
    ys = [Polynomial.variable(nv, i) for i in range(4 * n)]
    ss = [Polynomial.variable(nv, 4 * n + b) for b in range(3)]
    out = [ys[i] + Polynomial.constant(nv, g.y[i]) for i in range(4 * n)]
    for beta in range(3):
        acc = ss[beta] + Polynomial.constant(nv, g.s[beta])
        for l in range(n):
            for k in range(4):
                for j in range(4):
                    c = B[beta][k][j] * g.y[4 * l + k]
                    if c:
                        acc = acc + ys[4 * l + j].scale(2 * c)
        out.append(acc)
    return out


def conjugate_table(n: int):
    """``[Z_A^{A'}, conj(Z_B^{B'})]`` for all index pairs."""
    Z = build_Z(n).upper
    out = {}
    for A in range(2 * n):
        for Ap in range(2):
            for Bi in range(2 * n):
                for Bp in range(2):
                    out[(A, Ap, Bi, Bp)] = commutator(Z[A][Ap], conjugate(Z[Bi][Bp]))
    return out


def Z_commutator_table(n: int):
    Z = build_Z(n).upper
    out = {}
    for A in range(2 * n):
        for Ap in range(2):
            for Bi in range(2 * n):
                for Bp in range(2):
                    out[(A, Ap, Bi, Bp)] = commutator(Z[A][Ap], Z[Bi][Bp])
    return out


def as_fraction_point(values: Sequence) -> Tuple[Fraction, ...]:
    return tuple(Fraction(v) for v in values)


def _L(n: int, sign_i: int) -> DifferentialOperator:
    return (ds(n, 2) + ds(n, 3).scale(GaussianRational(0, sign_i))).scale(8)


def expected_Z_bracket(n: int, A: int, Ap: int, B: int, Bp: int) -> DifferentialOperator:
    """Closed-form value of ``[Z_A^{A'}, Z_B^{B'}]`` from the commutator lemma."""
    zero = DifferentialOperator(4 * n, 3)
    if A // 2 != B // 2 or Ap == Bp:
        return zero
    # orient so that the first field carries 0'
    if Ap == 1:
        return -expected_Z_bracket(n, B, Bp, A, Ap)
    if A == B:
        return _L(n, 1) if A % 2 == 0 else _L(n, -1)
    return ds(n, 1).scale(GaussianRational(0, 8))


def expected_conj_bracket(n: int, A: int, Ap: int, B: int, Bp: int) -> DifferentialOperator:
    """Closed-form value of ``[Z_A^{A'}, conj(Z_B^{B'})]``."""
    zero = DifferentialOperator(4 * n, 3)
    if A // 2 != B // 2 or Ap != Bp:
        return zero
    if A == B:
        v = ds(n, 1).scale(GaussianRational(0, 8))
        return v if A % 2 == 0 else -v
    if A % 2 == 0:
        return -_L(n, 1)
    return _L(n, -1)


def verify_commutator_tables(n: int) -> dict:
    """Column commutativity, the bracket lemma, its corollary and the conjugate table."""
    Z = build_Z(n).upper
    idx = [(A, Ap) for A in range(2 * n) for Ap in range(2)]
    bad = {"brackets": [], "columns": [], "corollary": [], "conjugate": []}
    for A, Ap in idx:
        for B, Bp in idx:
            c = commutator(Z[A][Ap], Z[B][Bp])
            if c != expected_Z_bracket(n, A, Ap, B, Bp):
                bad["brackets"].append([A, Ap, B, Bp])
            if Ap == Bp and not c.is_zero():
                bad["columns"].append([A, Ap, B, Bp])
            cc = commutator(Z[A][Ap], conjugate(Z[B][Bp]))
            if cc != expected_conj_bracket(n, A, Ap, B, Bp):
                bad["conjugate"].append([A, Ap, B, Bp])
    for A in range(2 * n):
        for B in range(2 * n):
            s = commutator(Z[A][0], Z[B][1]) + commutator(Z[A][1], Z[B][0])
            if not s.is_zero():
                bad["corollary"].append([A, B])
    conj_rel = all(
        conjugate(Z[2 * l][0]) == Z[2 * l + 1][1] and conjugate(Z[2 * l][1]) == -Z[2 * l + 1][0]
        for l in range(n)
    )
    passed = conj_rel and not any(bad.values())
    return {"n": n, "passed": passed, "conjugation_relations": conj_rel, "failures": bad}


def condition_h_report(n: int, scaled: bool = False) -> dict:
    """det B_lambda against (|lambda|^2)^{2n} as a polynomial identity in symbolic lambda."""
    import sympy

    lam = sympy.symbols("l1 l2 l3")
    t0 = time.perf_counter()
    _, det = condition_h(lam, n, scaled)
    target = condition_h_closed_form(lam, n, scaled)
    ok = sympy.expand(det - target) == 0
    return {
        "n": n,
        "scaled": scaled,
        "determinant": str(sympy.factor(det)),
        "passed": bool(ok),
        "seconds": round(time.perf_counter() - t0, 3),
    }
