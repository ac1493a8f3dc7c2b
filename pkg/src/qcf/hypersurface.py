"""The quadric hypersurface S in H^{n+1} and its identification with the group.

Ambient coordinates are x_1..x_{4(n+1)} (0-based indices 0..4n+3), with
q_{l+1} = x_{4l+1} + x_{4l+2} i + x_{4l+3} j + x_{4l+4} k.  The parametrized
picture uses (x_1..x_{4n}, t_1, t_2, t_3), stored like the group coordinates
(y, s) so that group operators and X fields share one operator type.
"""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .algebra import (
    DifferentialOperator,
    ExpPolyFunction,
    GaussianRational,
    Polynomial,
    apply,
    commutator,
)
from .group import B, build_Y, build_Z, ds, matmul4, transpose4

I_UNIT = GaussianRational(0, 1)

I_MATS = [
    [[0, 1, 0, 0], [-1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]],
    [[0, 0, 1, 0], [0, 0, 0, 1], [-1, 0, 0, 0], [0, -1, 0, 0]],
    [[0, 0, 0, 1], [0, 0, -1, 0], [0, 1, 0, 0], [-1, 0, 0, 0]],
]

C_MATS = [
    [[0, -3, 0, 0], [-1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]],
    [[0, 0, -3, 0], [0, 0, 0, 1], [-1, 0, 0, 0], [0, -1, 0, 0]],
    [[0, 0, 0, -3], [0, 0, -1, 0], [0, 1, 0, 0], [-1, 0, 0, 0]],
]

D_MATS = [[[c[i][j] + c[j][i] for j in range(4)] for i in range(4)] for c in C_MATS]

# per-block quadratic form of phi: -3 x1^2 + x2^2 + x3^2 + x4^2
PHI_DIAG = (-3, 1, 1, 1)


class NotKRegularError(ValueError):
    """Raised when an ambient section fails the k-regularity precondition."""

    def __init__(self, message: str, residual=None):
        super().__init__(message)
        self.residual = residual


# ---------------------------------------------------------------------------
# quaternions


def qmul(p: Sequence, q: Sequence) -> Tuple:
    """Hamilton product of 4-tuples (1, i, j, k); entries from any ring."""
    a1, b1, c1, d1 = p
    a2, b2, c2, d2 = q
    return (
        a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
        a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
        a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
        a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
    )


def unit(beta: int) -> Tuple[int, int, int, int]:
    """i_beta for beta = 0..3 (i_0 = 1)."""
    return tuple(1 if m == beta else 0 for m in range(4))


def tau_embed(q: Sequence) -> List[List[GaussianRational]]:
    x1, x2, x3, x4 = (GaussianRational(v) for v in q)
    return [[x1 + I_UNIT * x2, -x3 - I_UNIT * x4], [x3 - I_UNIT * x4, x1 - I_UNIT * x2]]


def mat2_mul(a, b):
    return [[a[i][0] * b[0][j] + a[i][1] * b[1][j] for j in range(2)] for i in range(2)]


def right_mult_identity(x: Sequence, beta: int) -> bool:
    """Check q . i_beta = -sum_j (I^beta x)_j i_{j-1}."""
    lhs = qmul(tuple(x), unit(beta))
    Ix = [sum(I_MATS[beta - 1][j][k] * x[k] for k in range(4)) for j in range(4)]
    return tuple(lhs) == tuple(-v for v in Ix)


def _t(m):
    return tuple(tuple(r) for r in m)


def matrix_checks() -> dict:
    neg_id = _t([[-1 if i == j else 0 for j in range(4)] for i in range(4)])
    I1, I2, I3 = (_t(m) for m in I_MATS)
    return {
        "I_squares": all(matmul4(m, m) == neg_id for m in I_MATS),
        "I1I2_eq_I3": matmul4(I1, I2) == I3,
        "I_antisymmetric": all(_t(m) == _t([[-v for v in r] for r in transpose4(m)]) for m in I_MATS),
        "C_minus_Ct_eq_2B": all(
            [[c[i][j] - c[j][i] for j in range(4)] for i in range(4)] == [[2 * v for v in r] for r in b]
            for c, b in zip(C_MATS, B)
        ),
        "D_symmetric": all(_t(d) == transpose4(d) for d in D_MATS),
        "B_squares": all(matmul4(b, b) == neg_id for b in B),
        "B1B2_eq_B3": matmul4(B[0], B[1]) == B[2],
    }


def matrices_json() -> dict:
    return {"B": B, "I": I_MATS, "C": C_MATS, "D": D_MATS}


# ---------------------------------------------------------------------------
# the defining data


def ambient_nvars(n: int) -> int:
    return 4 * (n + 1)


def phi_poly(n: int, nvars: Optional[int] = None) -> Polynomial:
    """phi(q') in the first 4n of ``nvars`` variables."""
    nv = nvars if nvars is not None else ambient_nvars(n)
    out = Polynomial(nv)
    for l in range(n):
        for j in range(4):
            out = out + Polynomial.variable(nv, 4 * l + j) ** 2 * PHI_DIAG[j]
    return out


def rho_poly(n: int) -> Polynomial:
    nv = ambient_nvars(n)
    return Polynomial.variable(nv, 4 * n) - phi_poly(n)


def dbar_phi(n: int, l: int, nvars: Optional[int] = None) -> Tuple[Polynomial, ...]:
    """Quaternion components of dbar_{q_{l+1}} phi."""
    nv = nvars if nvars is not None else ambient_nvars(n)
    phi = phi_poly(n, nv)
    out = []
    for j in range(4):
        d = [0] * nv
        d[4 * l + j] = 1
        out.append(phi.derivative(tuple(d)))
    return tuple(out)


def tangency_check(n: int) -> dict:
    """(dbar_{q_{l+1}} + dbar phi . dbar_{q_{n+1}}) rho = 0 as quaternion polynomials."""
    nv = ambient_nvars(n)
    rho = rho_poly(n)

    def dbar(l):
        out = []
        for j in range(4):
            d = [0] * nv
            d[4 * l + j] = 1
            out.append(rho.derivative(tuple(d)))
        return tuple(out)

    res = {}
    for l in range(n):
        a = dbar(l)
        b = qmul(dbar_phi(n, l), dbar(n))
        tot = tuple(u + v for u, v in zip(a, b))
        res[l] = all(p.is_zero() for p in tot)
    return {"n": n, "passed": all(res.values()), "per_block": res}


# ---------------------------------------------------------------------------
# fields


def build_X(n: int) -> List[DifferentialOperator]:
    """X_{4l+j} = d_{x_{4l+j}} + 2 sum C^beta_{kj} x_{4l+k} d_{t_beta}, in (x, t)."""
    ny = 4 * n
    out = []
    for l in range(n):
        for j in range(4):
            op = DifferentialOperator.partial(ny, 3, 4 * l + j)
            for beta in range(3):
                coef = Polynomial(ny + 3)
                for k in range(4):
                    c = C_MATS[beta][k][j]
                    if c:
                        coef = coef + Polynomial.variable(ny + 3, 4 * l + k, 2 * c)
                if not coef.is_zero():
                    op = op + DifferentialOperator.multiplication(coef, ny, 3) * ds(n, beta + 1)
            out.append(op)
    return out


def build_X_from_I(n: int) -> List[DifferentialOperator]:
    """d_x + sum_{beta,k} I^beta_{kj} (d_{4l+k} phi) d_{t_beta}."""
    ny = 4 * n
    phi = phi_poly(n, ny + 3)
    out = []
    for l in range(n):
        for j in range(4):
            op = DifferentialOperator.partial(ny, 3, 4 * l + j)
            for beta in range(3):
                coef = Polynomial(ny + 3)
                for k in range(4):
                    c = I_MATS[beta][k][j]
                    if c:
                        d = [0] * (ny + 3)
                        d[4 * l + k] = 1
                        coef = coef + phi.derivative(tuple(d)).scale(c)
                if not coef.is_zero():
                    op = op + DifferentialOperator.multiplication(coef, ny, 3) * ds(n, beta + 1)
            out.append(op)
    return out


def X_bracket_check(n: int) -> bool:
    X = build_X(n)
    for a in range(4 * n):
        for b in range(4 * n):
            la, ja = divmod(a, 4)
            lb, jb = divmod(b, 4)
            expect = DifferentialOperator(4 * n, 3)
            if la == lb:
                for beta in range(3):
                    c = 4 * B[beta][ja][jb]
                    if c:
                        expect = expect + ds(n, beta + 1).scale(c)
            if commutator(X[a], X[b]) != expect:
                return False
    return True


def build_nabla(n: int) -> List[List[DifferentialOperator]]:
    """Raised ambient fields nabla_A^{A'} for A = 0..2n+1 (ambient operators)."""
    nv = ambient_nvars(n)
    d = [DifferentialOperator.partial(nv, 0, v) for v in range(nv)]
    out = []
    for l in range(n + 1):
        x1, x2, x3, x4 = d[4 * l: 4 * l + 4]
        low = [[x1 + x2.scale(I_UNIT), -x3 - x4.scale(I_UNIT)],
               [x3 - x4.scale(I_UNIT), x1 - x2.scale(I_UNIT)]]
        for row in low:
            # Z^{0'} = Z_{1'}, Z^{1'} = -Z_{0'}
            out.append([row[1], -row[0]])
    return out


# ---------------------------------------------------------------------------
# the coordinate change F and the parametrization psi


def coord_map_F(y: Sequence, s: Sequence) -> Tuple[Tuple, Tuple]:
    n = len(y) // 4
    t = []
    for beta in range(3):
        acc = s[beta]
        for l in range(n):
            for k in range(4):
                for j in range(4):
                    c = D_MATS[beta][k][j]
                    if c:
                        acc = acc + Fraction(c, 2) * y[4 * l + k] * y[4 * l + j]
        t.append(acc)
    return tuple(y), tuple(t)


def coord_map_F_inverse(x: Sequence, t: Sequence) -> Tuple[Tuple, Tuple]:
    _, shift = coord_map_F(x, (0, 0, 0))
    return tuple(x), tuple(tb - sb for tb, sb in zip(t, shift))


def F_images(n: int) -> List[Polynomial]:
    """(x, t) as polynomials in (y, s)."""
    nv = 4 * n + 3
    v = [Polynomial.variable(nv, i) for i in range(nv)]
    ys = v[:4 * n]
    _, t = coord_map_F(ys, v[4 * n:])
    return list(ys) + list(t)


def psiF_images(n: int) -> List[Polynomial]:
    """Ambient coordinates of psi(F(y, s)) as polynomials in (y, s)."""
    nv = 4 * n + 3
    xt = F_images(n)
    return xt[:4 * n] + [phi_poly(n, nv)] + xt[4 * n:]


def apply_poly(A: DifferentialOperator, p: Polynomial) -> Polynomial:
    return apply(A, ExpPolyFunction(p, [0] * p.nvars)).poly


def F_pushforward_check(n: int, trials: int = 10, degree: int = 3, seed: int = 0) -> dict:
    """Y_a (g o F) = (X_a g) o F and ds (g o F) = (dt g) o F on random polynomials."""
    rng = random.Random(seed)
    Y = build_Y(n)
    X = build_X(n)
    imgs = F_images(n)
    nv = 4 * n + 3
    fails = 0
    for _ in range(trials):
        g = random_polynomial(nv, degree, rng)
        pulled = g.substitute(imgs)
        for a in range(4 * n):
            if apply_poly(Y[a], pulled) != apply_poly(X[a], g).substitute(imgs):
                fails += 1
        for beta in range(1, 4):
            if apply_poly(ds(n, beta), pulled) != apply_poly(ds(n, beta), g).substitute(imgs):
                fails += 1
    return {"n": n, "trials": trials, "failures": fails, "passed": fails == 0}


def random_polynomial(nvars: int, degree: int, rng: random.Random, nterms: int = 6) -> Polynomial:
    terms = {}
    for _ in range(nterms):
        e = [0] * nvars
        for _ in range(rng.randint(0, degree)):
            e[rng.randrange(nvars)] += 1
        terms[tuple(e)] = GaussianRational(rng.randint(-5, 5), rng.randint(-5, 5))
    return Polynomial(nvars, terms)


def C_matrix_polys(n: int) -> List[List[Polynomial]]:
    """Rows C_A^alpha = tau(dbar_{q_{l+1}} phi) stacked over blocks, ambient variables."""
    nv = ambient_nvars(n)
    out = []
    for l in range(n):
        q = dbar_phi(n, l, nv)
        x1, x2, x3, x4 = q
        i = I_UNIT
        out.append([x1 + x2.scale(i), -x3 - x4.scale(i)])
        out.append([x3 - x4.scale(i), x1 - x2.scale(i)])
    return out


def ambient_pushforward_ops(n: int) -> List[List[DifferentialOperator]]:
    """nabla_A^{A'} + sum_alpha C_A^alpha nabla_{2n+alpha}^{A'}."""
    nv = ambient_nvars(n)
    nab = build_nabla(n)
    C = C_matrix_polys(n)
    out = []
    for A in range(2 * n):
        row = []
        for Ap in range(2):
            op = nab[A][Ap]
            for alpha in range(2):
                op = op + DifferentialOperator.multiplication(C[A][alpha], nv, 0) * nab[2 * n + alpha][Ap]
            row.append(op)
        out.append(row)
    return out


def verify_pushforward_relation(n: int, trials: int = 50, degree: int = 3, seed: int = 0) -> dict:
    """Z_A^{A'}((psi o F)^* f) = ((nabla + C nabla) f) o psi o F on random polynomials."""
    rng = random.Random(seed)
    Z = build_Z(n).upper
    amb = ambient_pushforward_ops(n)
    imgs = psiF_images(n)
    nv = ambient_nvars(n)
    failures = []
    for trial in range(trials):
        f = random_polynomial(nv, degree, rng)
        pulled = f.substitute(imgs)
        for A in range(2 * n):
            for Ap in range(2):
                lhs = apply_poly(Z[A][Ap], pulled)
                rhs = apply_poly(amb[A][Ap], f).substitute(imgs)
                if lhs != rhs:
                    failures.append({"trial": trial, "A": A, "Ap": Ap})
    return {"n": n, "trials": trials, "degree": degree, "failures": failures, "passed": not failures}


# ---------------------------------------------------------------------------
# k-regular sections and restriction


def kregular_residual(f: Sequence[Polynomial], n: int, k: int) -> List[Polynomial]:
    """sum_{B'} nabla_A^{B'} f_{B' A2'..Ak'} for every A and canonical tail."""
    if len(f) != k + 1:
        raise ValueError("a V_0 section has k + 1 canonical components")
    nab = build_nabla(n)
    out = []
    for A in range(2 * n + 2):
        for r in range(k):
            out.append(apply_poly(nab[A][0], f[r]) + apply_poly(nab[A][1], f[r + 1]))
    return out


def is_kregular(f: Sequence[Polynomial], n: int, k: int) -> bool:
    return all(p.is_zero() for p in kregular_residual(f, n, k))


def degree1_kregular_basis(n: int, k: int) -> List[List[Polynomial]]:
    """Basis of homogeneous degree-1 k-regular sections via an exact linear solve."""
    import sympy

    nv = ambient_nvars(n)
    nab = build_nabla(n)
    # unknown a[r][v]: coefficient of x_v in f_r; nabla of x_v is a constant
    nunk = (k + 1) * nv

    def col(r, v):
        return r * nv + v

    rows = []
    for A in range(2 * n + 2):
        for r in range(k):
            row = [sympy.Integer(0)] * nunk
            for Bp, rr in ((0, r), (1, r + 1)):
                for v in range(nv):
                    c = _const_derivative(nab[A][Bp], v, nv)
                    if c:
                        row[col(rr, v)] += c
            rows.append(row)
    M = sympy.Matrix(rows)
    basis = []
    for vec in M.nullspace():
        comps = []
        for r in range(k + 1):
            terms = {}
            for v in range(nv):
                z = sympy.nsimplify(vec[col(r, v)])
                re, im = sympy.re(z), sympy.im(z)
                if z != 0:
                    e = [0] * nv
                    e[v] = 1
                    terms[tuple(e)] = GaussianRational(Fraction(str(re)), Fraction(str(im)))
            comps.append(Polynomial(nv, terms))
        basis.append(comps)
    return basis


def _const_derivative(op: DifferentialOperator, v: int, nv: int):
    """Coefficient of d_{x_v} in a constant-coefficient first-order operator, as sympy."""
    import sympy

    d = [0] * nv
    d[v] = 1
    p = op.coefficient(tuple(d))
    if p.is_zero():
        return 0
    c = p.terms[(0,) * nv]
    return sympy.Rational(c.re) + sympy.I * sympy.Rational(c.im)


def restrict_kregular(f: Sequence[Polynomial], n: int, k: int) -> dict:
    """Pull a k-regular ambient section back to the group and apply D_0."""
    from .cfcomplex import build_D

    res = kregular_residual(f, n, k)
    if not all(p.is_zero() for p in res):
        raise NotKRegularError("section is not k-regular", residual=[str(p) for p in res if not p.is_zero()])
    imgs = psiF_images(n)
    pulled = [p.substitute(imgs) for p in f]
    D0 = build_D(n, k, 0)
    out = []
    for i in range(D0.shape[0]):
        acc = Polynomial(4 * n + 3)
        for j in range(D0.shape[1]):
            if not D0[i, j].is_zero():
                acc = acc + apply_poly(D0[i, j], pulled[j])
        out.append(acc)
    return {"pullback": pulled, "D0_pullback": out, "is_kcf": all(p.is_zero() for p in out)}


def restriction_report(n: int, k: int, seed: int = 0) -> dict:
    rng = random.Random(seed)
    nv = ambient_nvars(n)
    basis = degree1_kregular_basis(n, k)
    const = [Polynomial.constant(nv, GaussianRational(rng.randint(-4, 4), rng.randint(-4, 4))) for _ in range(k + 1)]
    cases = {"constant": restrict_kregular(const, n, k)["is_kcf"]}
    kcf = [restrict_kregular(b, n, k)["is_kcf"] for b in basis]
    combo = None
    if basis:
        f = [Polynomial(nv) for _ in range(k + 1)]
        for b in basis:
            c = GaussianRational(rng.randint(-3, 3), rng.randint(-3, 3))
            f = [fi + bi.scale(c) for fi, bi in zip(f, b)]
        f = [fi + ci for fi, ci in zip(f, const)]
        combo = restrict_kregular(f, n, k)["is_kcf"]
    # a linear section that is not k-regular must be rejected
    bad = [Polynomial.variable(nv, 0)] + [Polynomial(nv) for _ in range(k)]
    try:
        restrict_kregular(bad, n, k)
        rejected = False
    except NotKRegularError:
        rejected = True
    passed = cases["constant"] and all(kcf) and bool(basis) and combo is not False and rejected
    return {
        "n": n,
        "k": k,
        "degree1_basis_size": len(basis),
        "constant_kcf": cases["constant"],
        "basis_pullbacks_kcf": all(kcf),
        "random_combination_kcf": combo,
        "non_regular_rejected": rejected,
        "passed": passed,
    }


def hypersurface_report(n: int, trials: int = 50, seed: int = 0, k: int = 2) -> dict:
    rng = random.Random(seed)
    tau_ok = True
    for _ in range(100):
        p = tuple(Fraction(rng.randint(-9, 9), rng.randint(1, 5)) for _ in range(4))
        q = tuple(Fraction(rng.randint(-9, 9), rng.randint(1, 5)) for _ in range(4))
        if tau_embed(qmul(p, q)) != mat2_mul(tau_embed(p), tau_embed(q)):
            tau_ok = False
    right_ok = all(
        right_mult_identity(tuple(Fraction(rng.randint(-9, 9), rng.randint(1, 5)) for _ in range(4)), beta)
        for _ in range(30) for beta in (1, 2, 3)
    )
    mats = matrix_checks()
    out = {
        "n": n,
        "matrices": mats,
        "tau_multiplicative": tau_ok,
        "right_multiplication": right_ok,
        "X_from_I_matches_C": build_X_from_I(n) == build_X(n),
        "X_brackets": X_bracket_check(n),
        "tangency": tangency_check(n)["passed"],
        "F_pushforward": F_pushforward_check(n, trials=min(trials, 10), seed=seed)["passed"],
        "pushforward_relation": verify_pushforward_relation(n, trials=trials, seed=seed),
        "restriction": restriction_report(n, k, seed=seed),
    }
    out["passed"] = (
        all(mats.values()) and tau_ok and right_ok and out["X_from_I_matches_C"] and out["X_brackets"]
        and out["tangency"] and out["F_pushforward"] and out["pushforward_relation"]["passed"]
        and out["restriction"]["passed"]
    )
    return out
