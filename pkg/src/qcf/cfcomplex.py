"""Index machinery for V_j and the operators D_j of the tangential complex.

A V_j component is ``(r, wedge)``: ``r`` counts primed indices equal to 1'
and ``wedge`` is a strictly increasing tuple of unprimed indices.  Rows and
columns are ordered with ``r`` outermost, so for n = 2, k = 2 the V_1 order
is F_{0'0}, ..., F_{0'3}, F_{1'0}, ..., F_{1'3}.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from .algebra import (
    DifferentialOperator,
    GaussianRational,
    OperatorMatrix,
    compose,
    conjugate,
    formal_adjoint,
)
from .group import build_Z, sublaplacian

TENSOR = "tensor"
APPENDIX = "appendix"
CONVENTIONS = (TENSOR, APPENDIX)


# ---------------------------------------------------------------------------
# permutations and (anti)symmetrisation


def perm_sign(p: Sequence[int]) -> int:
    p = list(p)
    sign = 1
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign


def sort_with_sign(idx: Sequence[int]) -> Tuple[Tuple[int, ...], int]:
    """Sorted tuple and the sign of the sorting permutation (0 on repeats)."""
    if len(set(idx)) != len(idx):
        return tuple(sorted(idx)), 0
    order = sorted(range(len(idx)), key=lambda i: idx[i])
    return tuple(idx[i] for i in order), perm_sign(order)


def _permute(index: Tuple, positions: Sequence[int], perm: Sequence[int]) -> Tuple:
    out = list(index)
    vals = [index[p] for p in positions]
    for p, src in zip(positions, perm):
        out[p] = vals[src]
    return tuple(out)


def _orbit(keys, positions, perms) -> List[Tuple]:
    """All indices reachable from ``keys`` by permuting ``positions`` (stable order)."""
    seen = {}
    for idx in keys:
        for p in perms:
            seen.setdefault(_permute(idx, positions, p), None)
    return list(seen)


def symmetrise(T: Mapping[Tuple, object], positions: Optional[Sequence[int]] = None, zero=0) -> Dict[Tuple, object]:
    """Average of ``T`` over all permutations of the given index positions."""
    keys = list(T)
    if not keys:
        return {}
    rank = len(keys[0])
    positions = list(range(rank)) if positions is None else list(positions)
    perms = list(itertools.permutations(range(len(positions))))
    w = Fraction(1, len(perms))
    out = {}
    for idx in _orbit(keys, positions, perms):
        acc = zero
        for p in perms:
            v = T.get(_permute(idx, positions, p), zero)
            acc = acc + v
        out[idx] = acc * w
    return out


def antisymmetrise(T: Mapping[Tuple, object], positions: Optional[Sequence[int]] = None, zero=0) -> Dict[Tuple, object]:
    """Signed average of ``T`` over permutations of the given positions."""
    keys = list(T)
    if not keys:
        return {}
    rank = len(keys[0])
    positions = list(range(rank)) if positions is None else list(positions)
    perms = [(p, perm_sign(p)) for p in itertools.permutations(range(len(positions)))]
    w = Fraction(1, len(perms))
    out = {}
    for idx in _orbit(keys, positions, [p for p, _ in perms]):
        acc = zero
        for p, sg in perms:
            v = T.get(_permute(idx, positions, p), zero)
            acc = acc + v * sg
        out[idx] = acc * w
    return out


# ---------------------------------------------------------------------------
# bases


def vj_degrees(k: int, j: int) -> Tuple[int, int]:
    """(sym degree p, wedge degree q) of V_j."""
    if j <= k:
        return k - j, j
    return j - k - 1, j + 1


@dataclass(frozen=True)
class SymWedgeBasis:
    n: int
    k: int
    j: int

    @property
    def p(self) -> int:
        return vj_degrees(self.k, self.j)[0]

    @property
    def q(self) -> int:
        return vj_degrees(self.k, self.j)[1]

    @property
    def components(self) -> List[Tuple[int, Tuple[int, ...]]]:
        wedges = list(itertools.combinations(range(2 * self.n), self.q))
        return [(r, w) for r in range(self.p + 1) for w in wedges]

    @property
    def dim(self) -> int:
        return (self.p + 1) * math.comb(2 * self.n, self.q)

    def index(self, r: int, wedge: Tuple[int, ...]) -> int:
        nw = math.comb(2 * self.n, self.q)
        w = list(itertools.combinations(range(2 * self.n), self.q)).index(tuple(wedge))
        return r * nw + w

    def weights(self, convention: str = TENSOR) -> List[Fraction]:
        """Inner-product weight of each canonical component.

        ``tensor``: number of full multi-indices represented, binom(p, r) q!.
        ``appendix``: canonical components orthonormal.
        """
        if convention == APPENDIX:
            return [Fraction(1)] * self.dim
        if convention != TENSOR:
            raise ValueError(f"unknown convention {convention!r}")
        qf = math.factorial(self.q)
        return [Fraction(math.comb(self.p, r) * qf) for r, _ in self.components]

    def labels(self) -> List[str]:
        out = []
        for r, w in self.components:
            pr = "0'" * (self.p - r) + "1'" * r
            out.append(f"f[{pr}|{''.join(map(str, w))}]")
        return out

    def lookup(self, primed: Sequence[int], unprimed: Sequence[int]) -> Tuple[Optional[int], int]:
        """Column and sign of the full-tensor entry f_{primed; unprimed}."""
        if len(primed) != self.p or len(unprimed) != self.q:
            raise ValueError("index length mismatch")
        w, sg = sort_with_sign(unprimed)
        if sg == 0:
            return None, 0
        return self.index(sum(primed), w), sg

    def canonical_primed(self, r: int) -> Tuple[int, ...]:
        return (0,) * (self.p - r) + (1,) * r


def dims(n: int, k: int) -> List[int]:
    return [SymWedgeBasis(n, k, j).dim for j in range(2 * n)]


def euler_characteristic(n: int, k: int) -> int:
    return sum((-1) ** j * d for j, d in enumerate(dims(n, k)))


# ---------------------------------------------------------------------------
# operator words


class WordBook:
    """Caches products of Z and delta letters for one n."""

    def __init__(self, n: int):
        self.n = n
        self.Z = build_Z(n).upper
        self.delta = [[conjugate(z).scale(-1) for z in row] for row in self.Z]
        self._cache: Dict[Tuple, DifferentialOperator] = {}

    def letter(self, kind: str, A: int, Ap: int) -> DifferentialOperator:
        return self.Z[A][Ap] if kind == "Z" else self.delta[A][Ap]

    def word(self, w: Tuple[Tuple[str, int, int], ...]) -> DifferentialOperator:
        if w in self._cache:
            return self._cache[w]
        if len(w) == 1:
            op = self.letter(*w[0])
        else:
            op = compose(self.word(w[:1]), self.word(w[1:]))
        self._cache[w] = op
        return op

    def realize(self, rows: List[Dict[int, Dict[Tuple, Fraction]]], ncols: int) -> List[List[DifferentialOperator]]:
        ny = 4 * self.n
        out = []
        for row in rows:
            ops = []
            for c in range(ncols):
                acc = DifferentialOperator(ny, 3)
                for w, coef in row.get(c, {}).items():
                    if coef:
                        acc = acc + self.word(w).scale(coef)
                ops.append(acc)
            out.append(ops)
        return out


_BOOKS: Dict[int, WordBook] = {}


def wordbook(n: int) -> WordBook:
    if n not in _BOOKS:
        _BOOKS[n] = WordBook(n)
    return _BOOKS[n]


def _acc(row: Dict[int, Dict[Tuple, Fraction]], col: int, word: Tuple, c: Fraction):
    d = row.setdefault(col, {})
    d[word] = d.get(word, Fraction(0)) + c


# ---------------------------------------------------------------------------
# the operators D_j


def build_D_symbolic(n: int, k: int, j: int) -> List[Dict[int, Dict[Tuple, Fraction]]]:
    """Rows of D_j as ``column -> {word: weight}`` before composing words."""
    if n < 1 or k < 1:
        raise ValueError("n >= 1 and k >= 1 required")
    if not 0 <= j <= 2 * n - 2:
        raise ValueError(f"j={j} out of range 0..{2 * n - 2}")
    src = SymWedgeBasis(n, k, j)
    dst = SymWedgeBasis(n, k, j + 1)
    rows = []
    for r_out, w_out in dst.components:
        row: Dict[int, Dict[Tuple, Fraction]] = {}
        P = dst.canonical_primed(r_out)
        m = len(w_out)
        uperms = [(p, perm_sign(p)) for p in itertools.permutations(range(m))]
        if j < k:
            # (j+1) Z_{[A0}^{A'} f_{A1..Aj] A' P}
            scale = Fraction(j + 1, len(uperms))
            for p, sg in uperms:
                V = [w_out[i] for i in p]
                for Ap in (0, 1):
                    col, fs = src.lookup((Ap,) + P, V[1:])
                    if fs:
                        _acc(row, col, (("Z", V[0], Ap),), scale * sg * fs)
        elif j == k:
            # (k+2) Z_{[A1}^{0'} Z_{A2}^{1'} f_{A3..A_{k+2}]}
            scale = Fraction(k + 2, len(uperms))
            for p, sg in uperms:
                V = [w_out[i] for i in p]
                col, fs = src.lookup((), V[2:])
                if fs:
                    _acc(row, col, (("Z", V[0], 0), ("Z", V[1], 1)), scale * sg * fs)
        else:
            # (j+2) Z_{[A1}^{(A1'} f^{A2'..)}_{A2..]}, upper primed indices stored as is
            pperms = list(itertools.permutations(range(len(P))))
            scale = Fraction(j + 2, len(uperms) * len(pperms))
            for pp in pperms:
                Q = [P[i] for i in pp]
                for p, sg in uperms:
                    V = [w_out[i] for i in p]
                    col, fs = src.lookup(tuple(Q[1:]), V[1:])
                    if fs:
                        _acc(row, col, (("Z", V[0], Q[0]),), scale * sg * fs)
        rows.append(row)
    return rows


def build_D(n: int, k: int, j: int) -> OperatorMatrix:
    src = SymWedgeBasis(n, k, j)
    dst = SymWedgeBasis(n, k, j + 1)
    rows = build_D_symbolic(n, k, j)
    entries = wordbook(n).realize(rows, src.dim)
    return OperatorMatrix(dst.labels(), src.labels(), entries, 4 * n, 3)


def build_D0_star_tensor_formula(n: int, k: int) -> OperatorMatrix:
    """``(D0* F)_{A1'..Ak'} = sum_A delta^A_{(A1'} F_{A2'..Ak') A}`` literally."""
    src = SymWedgeBasis(n, k, 1)
    dst = SymWedgeBasis(n, k, 0)
    perms = list(itertools.permutations(range(k)))
    scale = Fraction(1, len(perms))
    rows = []
    for r_out, _ in dst.components:
        P = dst.canonical_primed(r_out)
        row: Dict[int, Dict[Tuple, Fraction]] = {}
        for p in perms:
            Q = [P[i] for i in p]
            for A in range(2 * n):
                col, fs = src.lookup(tuple(Q[1:]), (A,))
                if fs:
                    _acc(row, col, (("d", A, Q[0]),), scale * fs)
        rows.append(row)
    entries = wordbook(n).realize(rows, src.dim)
    return OperatorMatrix(dst.labels(), src.labels(), entries, 4 * n, 3)


def adjoint_of(D: OperatorMatrix, src: SymWedgeBasis, dst: SymWedgeBasis, convention: str) -> OperatorMatrix:
    """Adjoint of ``D: V_src -> V_dst`` for the chosen inner-product weights."""
    if convention == APPENDIX:
        return D.neg_conj_transpose()
    return D.adjoint(row_weights=dst.weights(convention), col_weights=src.weights(convention))


def build_D0_star(n: int, k: int, convention: str = TENSOR) -> OperatorMatrix:
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")
    D0 = build_D(n, k, 0)
    return adjoint_of(D0, SymWedgeBasis(n, k, 0), SymWedgeBasis(n, k, 1), convention)


def build_D1_star(n: int, k: int, convention: str = TENSOR) -> OperatorMatrix:
    D1 = build_D(n, k, 1)
    return adjoint_of(D1, SymWedgeBasis(n, k, 1), SymWedgeBasis(n, k, 2), convention)


def build_box1(n: int, k: int, convention: str = TENSOR) -> OperatorMatrix:
    """``D0 D0* + D1* D1`` on V_1."""
    if n < 2:
        raise ValueError("box1 needs n >= 2")
    D0 = build_D(n, k, 0)
    D1 = build_D(n, k, 1)
    return D0 @ build_D0_star(n, k, convention) + build_D1_star(n, k, convention) @ D1


# ---------------------------------------------------------------------------
# verification reports


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)


def verify_complex(n: int, k: int) -> Dict:
    """Check ``D_{j+1} D_j = 0`` for every admissible j."""
    out = {"n": n, "k": k, "composites": [], "passed": True}
    Ds = {}
    for j in range(2 * n - 1):
        Ds[j] = build_D(n, k, j)
    for j in range(2 * n - 2):
        t0 = time.perf_counter()
        prod = Ds[j + 1] @ Ds[j]
        bad = prod.nonzero_entries()
        item = {
            "j": j,
            "shape": list(prod.shape),
            "zero": not bad,
            "max_terms_factors": max(Ds[j].max_terms(), Ds[j + 1].max_terms()),
            "seconds": round(time.perf_counter() - t0, 3),
        }
        if bad:
            i, c = bad[0]
            item["offending_entry"] = {"row": prod.rows[i], "col": prod.cols[c], "terms": len(prod[i, c].terms)}
            out["passed"] = False
        out["composites"].append(item)
    return out


def delta_b_identity(n: int, dim: int) -> OperatorMatrix:
    L = sublaplacian(n)
    ny = 4 * n
    ent = [[L if i == j else DifferentialOperator(ny, 3) for j in range(dim)] for i in range(dim)]
    return OperatorMatrix(range(dim), range(dim), ent, ny, 3)


def verify_dd(n: int, k: int) -> Dict:
    """Tensor-convention ``D0* D0 == Delta_b Id`` on V_0."""
    D0 = build_D(n, k, 0)
    prod = build_D0_star(n, k, TENSOR) @ D0
    target = delta_b_identity(n, prod.shape[0])
    diff = prod - target
    bad = diff.nonzero_entries()
    return {"n": n, "k": k, "passed": not bad, "residual_entries": [list(b) for b in bad]}


def lemma_conj_ZZ(n: int) -> Dict:
    """``sum_A conj(Z_A^{A'}) Z_A^{B'} = -delta_{A'B'} Delta_b``."""
    Z = build_Z(n).upper
    L = sublaplacian(n)
    res = {}
    ok = True
    for Ap in range(2):
        for Bp in range(2):
            acc = DifferentialOperator(4 * n, 3)
            for A in range(2 * n):
                acc = acc + compose(conjugate(Z[A][Ap]), Z[A][Bp])
            target = L.scale(-1) if Ap == Bp else DifferentialOperator(4 * n, 3)
            res[f"{Ap}{Bp}"] = acc == target
            ok &= acc == target
    return {"n": n, "passed": ok, "entries": res}


def lemma_sym_antisym(n: int) -> Dict:
    """``Z_{[A}^{(A'} Z_{B]}^{B')} = 0`` for all index pairs."""
    Z = build_Z(n).upper
    ok = True
    for A in range(2 * n):
        for B in range(2 * n):
            for Ap in range(2):
                for Bp in range(2):
                    t = (compose(Z[A][Ap], Z[B][Bp]) + compose(Z[A][Bp], Z[B][Ap])
                         - compose(Z[B][Ap], Z[A][Bp]) - compose(Z[B][Bp], Z[A][Ap]))
                    if not t.is_zero():
                        ok = False
    return {"n": n, "passed": ok}


def convention_relation(n: int, k: int) -> bool:
    """Tensor D0* equals W0^{-1} (appendix D0*) W1 as an exact matrix identity."""
    b0, b1 = SymWedgeBasis(n, k, 0), SymWedgeBasis(n, k, 1)
    app = build_D0_star(n, k, APPENDIX)
    w0 = b0.weights(TENSOR)
    w1 = b1.weights(TENSOR)
    scaled = app.scale_cols(w1).scale_rows([1 / w for w in w0])
    return scaled == build_D0_star(n, k, TENSOR)


# ---------------------------------------------------------------------------
# finite tensor identity


def random_gaussian_rational(rng, bound: int = 9, den: int = 7) -> GaussianRational:
    return GaussianRational(Fraction(rng.randint(-bound, bound), rng.randint(1, den)),
                            Fraction(rng.randint(-bound, bound), rng.randint(1, den)))


def finite_tensor_identity(h: Mapping[Tuple[int, int], GaussianRational], H: Mapping[Tuple[int, int], GaussianRational], size: int) -> Tuple[GaussianRational, GaussianRational]:
    zero = GaussianRational(0)
    hA = antisymmetrise(h, zero=zero)
    HA = antisymmetrise(H, zero=zero)
    lhs = zero
    rhs = zero
    for A in range(size):
        for B in range(size):
            lhs = lhs + h[(B, A)] * H[(A, B)].conjugate()
            rhs = rhs + h[(A, B)] * H[(A, B)].conjugate() - hA[(A, B)] * HA[(A, B)].conjugate() * 2
    return lhs, rhs


def finite_tensor_identity_check(trials: int, n: int, seed: int = 0) -> Dict:
    import random

    rng = random.Random(seed)
    size = 2 * n
    fails = 0
    for _ in range(trials):
        h = {(a, b): random_gaussian_rational(rng) for a in range(size) for b in range(size)}
        H = {(a, b): random_gaussian_rational(rng) for a in range(size) for b in range(size)}
        lhs, rhs = finite_tensor_identity(h, H, size)
        if lhs != rhs:
            fails += 1
    return {"n": n, "trials": trials, "failures": fails, "passed": fails == 0}


# ---------------------------------------------------------------------------
# rendering in Y-notation


def _coef_str(c: GaussianRational, first: bool) -> str:
    """Prefix for a Y-word: '+', '-', '+i', '-i' or an explicit factor."""
    if c.im == 0:
        if c.re == 1:
            return "" if first else "+"
        if c.re == -1:
            return "-"
        s = str(c.re)
        return s if (first or c.re < 0) else "+" + s
    if c.re == 0:
        if c.im == 1:
            return "i" if first else "+i"
        if c.im == -1:
            return "-i"
        s = f"{c.im}i"
        return s if (first or c.im < 0) else "+" + s
    return ("" if first else "+") + f"({c.re}{'+' if c.im > 0 else '-'}{abs(c.im)}i)"


def render_Y(op: DifferentialOperator) -> str:
    """Render a left-invariant operator as a sum of ordered Y/ds words."""
    from .group import horizontal_expansion

    if op.is_zero():
        return "0"
    exp = horizontal_expansion(op)

    def key(kv):
        (alpha, beta), _ = kv
        return (-(sum(alpha) + sum(beta)), [-a for a in alpha], [-b for b in beta])

    parts = []
    for idx, ((alpha, beta), c) in enumerate(sorted(exp.items(), key=key)):
        letters = []
        for a, m in enumerate(alpha):
            letters.append(f"Y{a + 1}" + (f"^{m}" if m > 1 else "") if m else "")
        for b, m in enumerate(beta):
            letters.append(f"ds{b + 1}" + (f"^{m}" if m > 1 else "") if m else "")
        word = "".join(letters)
        if not word:
            word = "1"
        parts.append(_coef_str(c, idx == 0) + word)
    return "".join(parts)


def render_matrix(M: OperatorMatrix) -> str:
    cells = [[render_Y(a) for a in row] for row in M.entries]
    width = max((len(c) for r in cells for c in r), default=1)
    lines = []
    for label, r in zip(M.rows, cells):
        lines.append(f"{str(label):>14} | " + "  ".join(c.rjust(width) for c in r))
    return "\n".join(lines)
