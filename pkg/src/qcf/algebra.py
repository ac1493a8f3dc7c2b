"""Exact Gaussian-rational arithmetic and normal-ordered differential operators.

Operators act on functions of ``ny`` y-variables followed by ``ns`` s-variables.
A term is stored flat as ``(d, e) -> c`` meaning ``c * x**e * d/dx**d`` with the
coefficient standing to the left of the derivative (normal order).
"""

from __future__ import annotations

import json
import math
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterable, Iterator, List, Mapping, Sequence, Tuple, Union

Rational = Union[int, Fraction]
Multi = Tuple[int, ...]


class DimensionError(ValueError):
    """Operands live on different variable layouts."""


def _q(x) -> Rational:
    if isinstance(x, Fraction):
        return x.numerator if x.denominator == 1 else x
    if isinstance(x, int):
        return x
    if isinstance(x, str):
        return _q(Fraction(x))
    raise TypeError(f"not an exact rational: {x!r}")


def rational_str(x: Rational) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


class GaussianRational:
    """Exact complex number ``re + im*i`` with rational parts."""

    __slots__ = ("re", "im")

    def __init__(self, re: Rational = 0, im: Rational = 0):
        self.re = _q(re)
        self.im = _q(im)

    @classmethod
    def coerce(cls, x) -> "GaussianRational":
        if isinstance(x, GaussianRational):
            return x
        if isinstance(x, complex):
            raise TypeError("floating complex values are not exact")
        return cls(x, 0)

    def __add__(self, other):
        o = GaussianRational.coerce(other)
        return GaussianRational(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        o = GaussianRational.coerce(other)
        return GaussianRational(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        return GaussianRational.coerce(other) - self

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __mul__(self, other):
        if isinstance(other, int):
            return GaussianRational(self.re * other, self.im * other)
        o = GaussianRational.coerce(other)
        a, b, c, d = self.re, self.im, o.re, o.im
        return GaussianRational(a * c - b * d, a * d + b * c)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = GaussianRational.coerce(other)
        den = Fraction(o.re * o.re + o.im * o.im)
        if den == 0:
            raise ZeroDivisionError("division by zero Gaussian rational")
        num = self * o.conjugate()
        return GaussianRational(Fraction(num.re) / den, Fraction(num.im) / den)

    def __rtruediv__(self, other):
        return GaussianRational.coerce(other) / self

    def __pow__(self, k: int):
        out = GaussianRational(1)
        for _ in range(k):
            out = out * self
        return out

    def conjugate(self) -> "GaussianRational":
        return GaussianRational(self.re, -self.im)

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def __bool__(self):
        return not self.is_zero()

    def __eq__(self, other):
        try:
            o = GaussianRational.coerce(other)
        except TypeError:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        return f"GaussianRational({self.re!s}, {self.im!s})"

    def __str__(self):
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            return f"{self.im}i"
        sign = "+" if self.im > 0 else "-"
        return f"({self.re}{sign}{abs(self.im)}i)"


I = GaussianRational(0, 1)
ONE = GaussianRational(1)
ZERO = GaussianRational(0)


def _gr(x) -> GaussianRational:
    return GaussianRational.coerce(x)


# ---------------------------------------------------------------------------
# polynomials


class Polynomial:
    """Sparse multivariate polynomial over the Gaussian rationals.

    ``terms`` maps exponent tuples to nonzero coefficients.  Equality is
    structural because zero coefficients are never stored.
    """

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: Mapping[Multi, object] | None = None):
        self.nvars = nvars
        self.terms: Dict[Multi, GaussianRational] = {}
        if terms:
            for e, c in terms.items():
                if len(e) != nvars:
                    raise DimensionError(f"exponent {e} has wrong length for {nvars} variables")
                c = _gr(c)
                if not c.is_zero():
                    self.terms[tuple(e)] = c

    @classmethod
    def constant(cls, nvars: int, c) -> "Polynomial":
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def variable(cls, nvars: int, i: int, c=1) -> "Polynomial":
        e = [0] * nvars
        e[i] = 1
        return cls(nvars, {tuple(e): c})

    def _check(self, other: "Polynomial"):
        if self.nvars != other.nvars:
            raise DimensionError(f"{self.nvars} vs {other.nvars} variables")

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other: "Polynomial") -> "Polynomial":
        self._check(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            v = out.get(e)
            v = c if v is None else v + c
            if v.is_zero():
                out.pop(e, None)
            else:
                out[e] = v
        return _poly_raw(self.nvars, out)

    def __neg__(self) -> "Polynomial":
        return _poly_raw(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def scale(self, c) -> "Polynomial":
        c = _gr(c)
        if c.is_zero():
            return Polynomial(self.nvars)
        return _poly_raw(self.nvars, {e: v * c for e, v in self.terms.items()})

    def __mul__(self, other) -> "Polynomial":
        if not isinstance(other, Polynomial):
            return self.scale(other)
        self._check(other)
        out: Dict[Multi, GaussianRational] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                v = out.get(e)
                out[e] = c1 * c2 if v is None else v + c1 * c2
        return _poly_raw(self.nvars, {e: c for e, c in out.items() if not c.is_zero()})

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Polynomial":
        out = Polynomial.constant(self.nvars, 1)
        for _ in range(k):
            out = out * self
        return out

    def conjugate(self) -> "Polynomial":
        return _poly_raw(self.nvars, {e: c.conjugate() for e, c in self.terms.items()})

    def derivative(self, d: Multi) -> "Polynomial":
        """Apply the constant-coefficient derivative ``d/dx**d``."""
        out: Dict[Multi, GaussianRational] = {}
        for e, c in self.terms.items():
            w = 1
            for ei, di in zip(e, d):
                if di > ei:
                    w = 0
                    break
                w *= _falling(ei, di)
            if w:
                ne = tuple(ei - di for ei, di in zip(e, d))
                v = out.get(ne)
                out[ne] = c * w if v is None else v + c * w
        return _poly_raw(self.nvars, {e: c for e, c in out.items() if not c.is_zero()})

    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=-1)

    def evaluate(self, point: Sequence) -> GaussianRational:
        """Exact evaluation at rational (or Gaussian-rational) coordinates."""
        pt = [_gr(p) for p in point]
        total = GaussianRational(0)
        for e, c in self.terms.items():
            v = c
            for p, k in zip(pt, e):
                if k:
                    v = v * p ** k
            total = total + v
        return total

    def evaluate_numeric(self, coords):
        """Evaluate on float arrays; ``coords[i]`` is an array for variable i."""
        import numpy as np

        out = 0
        for e, c in self.terms.items():
            v = complex(c)
            for i, k in enumerate(e):
                if k:
                    v = v * np.asarray(coords[i], dtype=float) ** k
            out = out + v
        return out

    def substitute(self, images: Sequence["Polynomial"]) -> "Polynomial":
        """Compose: replace variable i by ``images[i]`` (all in a common ring)."""
        if len(images) != self.nvars:
            raise DimensionError("one image per variable required")
        target = images[0].nvars if images else 0
        powers: Dict[Tuple[int, int], Polynomial] = {}

        def power(i, k):
            key = (i, k)
            if key not in powers:
                powers[key] = Polynomial.constant(target, 1) if k == 0 else power(i, k - 1) * images[i]
            return powers[key]

        out = Polynomial(target)
        for e, c in self.terms.items():
            t = Polynomial.constant(target, c)
            for i, k in enumerate(e):
                if k:
                    t = t * power(i, k)
            out = out + t
        return out

    def sorted_terms(self) -> List[Tuple[Multi, GaussianRational]]:
        return sorted(self.terms.items(), key=lambda kv: _grlex(kv[0]))

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def __repr__(self):
        return f"Polynomial({self.nvars}, {dict(self.sorted_terms())})"


def _poly_raw(nvars: int, terms: Dict[Multi, GaussianRational]) -> Polynomial:
    p = Polynomial.__new__(Polynomial)
    p.nvars = nvars
    p.terms = terms
    return p


def _grlex(e: Multi):
    return (sum(e), e)


@lru_cache(maxsize=None)
def _falling(n: int, k: int) -> int:
    out = 1
    for i in range(k):
        out *= n - i
    return out


@lru_cache(maxsize=None)
def _leibniz(d: Multi, e: Multi) -> Tuple[Tuple[Multi, int], ...]:
    """All delta <= d with nonzero ``binom(d, delta) * falling(e, delta)``."""
    ranges = [range(min(di, ei) + 1) for di, ei in zip(d, e)]
    out = []
    for delta in _product(ranges):
        w = 1
        for di, ei, k in zip(d, e, delta):
            if k:
                w *= math.comb(di, k) * _falling(ei, k)
        out.append((delta, w))
    return tuple(out)


def _product(ranges) -> Iterator[Multi]:
    if not ranges:
        yield ()
        return
    head, rest = ranges[0], ranges[1:]
    for tail in _product(rest):
        for h in head:
            yield (h,) + tail


# ---------------------------------------------------------------------------
# differential operators


class DifferentialOperator:
    """Finite sum ``sum c * x**e * D**d`` in normal order.

    ``ny`` and ``ns`` give the layout: variables are y_1..y_ny then s_1..s_ns.
    On the Heisenberg group ``ny = 4n`` and ``ns = 3``.
    """

    __slots__ = ("ny", "ns", "terms")

    def __init__(self, ny: int, ns: int = 3, terms: Mapping[Tuple[Multi, Multi], object] | None = None):
        self.ny = ny
        self.ns = ns
        self.terms: Dict[Tuple[Multi, Multi], GaussianRational] = {}
        nv = ny + ns
        if terms:
            for (d, e), c in terms.items():
                if len(d) != nv or len(e) != nv:
                    raise DimensionError("multi-index length does not match layout")
                c = _gr(c)
                if not c.is_zero():
                    key = (tuple(d), tuple(e))
                    v = self.terms.get(key)
                    v = c if v is None else v + c
                    if v.is_zero():
                        self.terms.pop(key, None)
                    else:
                        self.terms[key] = v

    # -- constructors -------------------------------------------------------
    @property
    def nvars(self) -> int:
        return self.ny + self.ns

    @property
    def n(self) -> int:
        return self.ny // 4

    @classmethod
    def zero(cls, ny: int, ns: int = 3) -> "DifferentialOperator":
        return cls(ny, ns)

    @classmethod
    def identity(cls, ny: int, ns: int = 3, c=1) -> "DifferentialOperator":
        z = (0,) * (ny + ns)
        return cls(ny, ns, {(z, z): c})

    @classmethod
    def partial(cls, ny: int, ns: int, var: int, c=1) -> "DifferentialOperator":
        """``c * d/dx_var`` with ``var`` a 0-based flat variable index."""
        z = [0] * (ny + ns)
        d = list(z)
        d[var] = 1
        return cls(ny, ns, {(tuple(d), tuple(z)): c})

    @classmethod
    def multiplication(cls, p: Polynomial, ny: int, ns: int = 3) -> "DifferentialOperator":
        if p.nvars != ny + ns:
            raise DimensionError("polynomial does not match layout")
        z = (0,) * (ny + ns)
        return _op_raw(ny, ns, {(z, e): c for e, c in p.terms.items()})

    # -- structure ----------------------------------------------------------
    def _check(self, other: "DifferentialOperator"):
        if (self.ny, self.ns) != (other.ny, other.ns):
            raise DimensionError(f"layout ({self.ny},{self.ns}) vs ({other.ny},{other.ns})")

    def is_zero(self) -> bool:
        return not self.terms

    def order(self) -> int:
        return max((sum(d) for d, _ in self.terms), default=-1)

    def coefficients(self) -> Dict[Multi, Polynomial]:
        """Group terms by derivative multi-index."""
        out: Dict[Multi, Dict[Multi, GaussianRational]] = {}
        for (d, e), c in self.terms.items():
            out.setdefault(d, {})[e] = c
        return {d: _poly_raw(self.nvars, t) for d, t in out.items()}

    def coefficient(self, d: Multi) -> Polynomial:
        return _poly_raw(self.nvars, {e: c for (dd, e), c in self.terms.items() if dd == tuple(d)})

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda kv: (_grlex(kv[0][0]), _grlex(kv[0][1])))

    # -- arithmetic ---------------------------------------------------------
    def __add__(self, other: "DifferentialOperator") -> "DifferentialOperator":
        self._check(other)
        out = dict(self.terms)
        for k, c in other.terms.items():
            v = out.get(k)
            v = c if v is None else v + c
            if v.is_zero():
                out.pop(k, None)
            else:
                out[k] = v
        return _op_raw(self.ny, self.ns, out)

    def __neg__(self):
        return _op_raw(self.ny, self.ns, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "DifferentialOperator":
        c = _gr(c)
        if c.is_zero():
            return DifferentialOperator(self.ny, self.ns)
        return _op_raw(self.ny, self.ns, {k: v * c for k, v in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, DifferentialOperator):
            return compose(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def __matmul__(self, other):
        return compose(self, other)

    def __eq__(self, other):
        if not isinstance(other, DifferentialOperator):
            return NotImplemented
        return (self.ny, self.ns) == (other.ny, other.ns) and self.terms == other.terms

    def __hash__(self):
        return hash((self.ny, self.ns, frozenset(self.terms.items())))

    def __repr__(self):
        return f"DifferentialOperator(ny={self.ny}, ns={self.ns}, terms={len(self.terms)})"

    def __str__(self):
        return format_operator(self)


def _op_raw(ny, ns, terms) -> DifferentialOperator:
    op = DifferentialOperator.__new__(DifferentialOperator)
    op.ny = ny
    op.ns = ns
    op.terms = terms
    return op


def compose(A: DifferentialOperator, B: DifferentialOperator) -> DifferentialOperator:
    """Normal-ordered product ``A o B`` by the Leibniz rule."""
    A._check(B)
    out: Dict[Tuple[Multi, Multi], GaussianRational] = {}
    get = out.get
    for (da, ea), ca in A.terms.items():
        for (db, eb), cb in B.terms.items():
            c0 = ca * cb
            for delta, w in _leibniz(da, eb):
                e = tuple(x + y - z for x, y, z in zip(ea, eb, delta))
                d = tuple(x - z + y for x, y, z in zip(da, db, delta))
                key = (d, e)
                c = c0 * w if w != 1 else c0
                v = get(key)
                out[key] = c if v is None else v + c
    return _op_raw(A.ny, A.ns, {k: c for k, c in out.items() if not c.is_zero()})


def commutator(A: DifferentialOperator, B: DifferentialOperator) -> DifferentialOperator:
    return compose(A, B) - compose(B, A)


def conjugate(A: DifferentialOperator) -> DifferentialOperator:
    """Conjugate every coefficient; derivatives are real and unchanged."""
    return _op_raw(A.ny, A.ns, {k: c.conjugate() for k, c in A.terms.items()})


def formal_adjoint(A: DifferentialOperator) -> DifferentialOperator:
    """L^2 (Lebesgue) formal adjoint: ``(p D^a)* = (-1)^|a| D^a o conj(p)``."""
    out = DifferentialOperator(A.ny, A.ns)
    z = (0,) * A.nvars
    for d, p in A.coefficients().items():
        left = _op_raw(A.ny, A.ns, {(d, z): GaussianRational(-1 if sum(d) % 2 else 1)})
        right = DifferentialOperator.multiplication(p.conjugate(), A.ny, A.ns)
        out = out + compose(left, right)
    return out


def linear_combination(pairs: Iterable[Tuple[object, DifferentialOperator]], ny: int, ns: int = 3) -> DifferentialOperator:
    out = DifferentialOperator(ny, ns)
    for c, op in pairs:
        out = out + op.scale(c)
    return out


# ---------------------------------------------------------------------------
# exponential-polynomial test functions


class ExpPolyFunction:
    """``poly(x) * exp(<lam, x>)`` with Gaussian-rational frequencies."""

    __slots__ = ("poly", "frequency")

    def __init__(self, poly: Polynomial, frequency: Sequence):
        if len(frequency) != poly.nvars:
            raise DimensionError("frequency length must equal the number of variables")
        self.poly = poly
        self.frequency = tuple(_gr(f) for f in frequency)

    def derivative(self, var: int) -> "ExpPolyFunction":
        d = [0] * self.poly.nvars
        d[var] = 1
        p = self.poly.derivative(tuple(d)) + self.poly.scale(self.frequency[var])
        return ExpPolyFunction(p, self.frequency)

    def __add__(self, other: "ExpPolyFunction") -> "ExpPolyFunction":
        if self.frequency != other.frequency:
            raise ValueError("sum of different frequencies is not a single ExpPoly")
        return ExpPolyFunction(self.poly + other.poly, self.frequency)

    def __eq__(self, other):
        if not isinstance(other, ExpPolyFunction):
            return NotImplemented
        return self.frequency == other.frequency and self.poly == other.poly

    def is_zero(self) -> bool:
        return self.poly.is_zero()

    def evaluate_numeric(self, coords):
        import numpy as np

        lin = 0
        for f, c in zip(self.frequency, coords):
            if not f.is_zero():
                lin = lin + complex(f) * np.asarray(c, dtype=float)
        return self.poly.evaluate_numeric(coords) * np.exp(lin)

    def __repr__(self):
        return f"ExpPolyFunction({self.poly!r}, {self.frequency})"


def apply(A: DifferentialOperator, f: ExpPolyFunction) -> ExpPolyFunction:
    """Exact action of ``A`` on ``f``."""
    if f.poly.nvars != A.nvars:
        raise DimensionError("function and operator have different variable counts")
    cache: Dict[Multi, Polynomial] = {}

    def deriv(d: Multi) -> Polynomial:
        if d not in cache:
            if sum(d) == 0:
                cache[d] = f.poly
            else:
                i = next(k for k, v in enumerate(d) if v)
                prev = list(d)
                prev[i] -= 1
                g = ExpPolyFunction(deriv(tuple(prev)), f.frequency).derivative(i)
                cache[d] = g.poly
        return cache[d]

    out = Polynomial(A.nvars)
    for d, p in A.coefficients().items():
        out = out + p * deriv(d)
    return ExpPolyFunction(out, f.frequency)


# ---------------------------------------------------------------------------
# serialization


def to_json_obj(A: DifferentialOperator) -> dict:
    ny = A.ny
    groups = []
    for d, p in sorted(A.coefficients().items(), key=lambda kv: _grlex(kv[0])):
        coeff = [
            {"ey": list(e[:ny]), "es": list(e[ny:]), "re": rational_str(c.re), "im": rational_str(c.im)}
            for e, c in p.sorted_terms()
        ]
        groups.append({"dy": list(d[:ny]), "ds": list(d[ny:]), "coeff": coeff})
    return {"ny": A.ny, "ns": A.ns, "terms": groups}


def from_json_obj(obj: dict) -> DifferentialOperator:
    ny, ns = obj["ny"], obj["ns"]
    terms = {}
    for g in obj["terms"]:
        d = tuple(g["dy"]) + tuple(g["ds"])
        for t in g["coeff"]:
            e = tuple(t["ey"]) + tuple(t["es"])
            terms[(d, e)] = GaussianRational(Fraction(t["re"]), Fraction(t["im"]))
    return DifferentialOperator(ny, ns, terms)


def to_json(A: DifferentialOperator) -> str:
    return json.dumps(to_json_obj(A), separators=(",", ":"))


def from_json(text: str) -> DifferentialOperator:
    return from_json_obj(json.loads(text))


# ---------------------------------------------------------------------------
# display


def _var_names(ny: int, ns: int) -> List[str]:
    if ns == 3:
        return [f"y{i + 1}" for i in range(ny)] + ["s1", "s2", "s3"]
    return [f"x{i + 1}" for i in range(ny)] + [f"t{i + 1}" for i in range(ns)]


def format_polynomial(p: Polynomial, names: Sequence[str]) -> str:
    if p.is_zero():
        return "0"
    parts = []
    for e, c in p.sorted_terms():
        mono = "*".join(f"{names[i]}^{k}" if k > 1 else names[i] for i, k in enumerate(e) if k)
        parts.append(f"{c}*{mono}" if mono else str(c))
    return " + ".join(parts)


def format_operator(A: DifferentialOperator) -> str:
    if A.is_zero():
        return "0"
    names = _var_names(A.ny, A.ns)
    parts = []
    for d, p in sorted(A.coefficients().items(), key=lambda kv: _grlex(kv[0])):
        der = "".join(f"d{names[i]}^{k}" if k > 1 else f"d{names[i]}" for i, k in enumerate(d) if k)
        poly = format_polynomial(p, names)
        parts.append(f"({poly}){der}" if der else f"({poly})")
    return " + ".join(parts)


# ---------------------------------------------------------------------------
# matrices of operators


class OperatorMatrix:
    """Dense rectangular grid of operators with labelled rows and columns.

    Applied to a column of functions, row ``i`` gives ``sum_j entries[i][j] f_j``.
    """

    def __init__(self, rows: Sequence, cols: Sequence, entries: Sequence[Sequence[DifferentialOperator]], ny: int, ns: int = 3):
        self.rows = list(rows)
        self.cols = list(cols)
        self.ny = ny
        self.ns = ns
        if len(entries) != len(self.rows) or any(len(r) != len(self.cols) for r in entries):
            raise DimensionError("entry grid does not match labels")
        self.entries = [list(r) for r in entries]

    @classmethod
    def zeros(cls, rows, cols, ny, ns=3) -> "OperatorMatrix":
        return cls(rows, cols, [[DifferentialOperator(ny, ns) for _ in cols] for _ in rows], ny, ns)

    @property
    def shape(self) -> Tuple[int, int]:
        return (len(self.rows), len(self.cols))

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def __setitem__(self, ij, op):
        i, j = ij
        self.entries[i][j] = op

    def _like(self, entries, rows=None, cols=None) -> "OperatorMatrix":
        return OperatorMatrix(self.rows if rows is None else rows, self.cols if cols is None else cols, entries, self.ny, self.ns)

    def __add__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        if self.shape != other.shape:
            raise DimensionError("shape mismatch")
        return self._like([[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(self.entries, other.entries)])

    def __sub__(self, other):
        return self + other.scale(-1)

    def scale(self, c) -> "OperatorMatrix":
        return self._like([[a.scale(c) for a in r] for r in self.entries])

    def scale_rows(self, factors: Sequence) -> "OperatorMatrix":
        return self._like([[a.scale(f) for a in r] for r, f in zip(self.entries, factors)])

    def scale_cols(self, factors: Sequence) -> "OperatorMatrix":
        return self._like([[a.scale(f) for a, f in zip(r, factors)] for r in self.entries])

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        if self.shape[1] != other.shape[0]:
            raise DimensionError(f"cannot compose {self.shape} with {other.shape}")
        out = []
        for i in range(self.shape[0]):
            row = []
            for j in range(other.shape[1]):
                acc = DifferentialOperator(self.ny, self.ns)
                for m in range(self.shape[1]):
                    a = self.entries[i][m]
                    if a.is_zero():
                        continue
                    b = other.entries[m][j]
                    if b.is_zero():
                        continue
                    acc = acc + compose(a, b)
                row.append(acc)
            out.append(row)
        return OperatorMatrix(self.rows, other.cols, out, self.ny, self.ns)

    def conjugate(self) -> "OperatorMatrix":
        return self._like([[conjugate(a) for a in r] for r in self.entries])

    def transpose(self) -> "OperatorMatrix":
        t = [[self.entries[i][j] for i in range(self.shape[0])] for j in range(self.shape[1])]
        return OperatorMatrix(self.cols, self.rows, t, self.ny, self.ns)

    def neg_conj_transpose(self) -> "OperatorMatrix":
        return self.conjugate().transpose().scale(-1)

    def adjoint(self, row_weights: Sequence | None = None, col_weights: Sequence | None = None) -> "OperatorMatrix":
        """Formal adjoint for weighted inner products on source and target.

        With ``<f, g>_W = sum_i W_i (f_i, g_i)`` on both sides the adjoint is
        ``Wcol^{-1} * (entrywise formal adjoint)^T * Wrow``.
        """
        t = [[formal_adjoint(self.entries[i][j]) for i in range(self.shape[0])] for j in range(self.shape[1])]
        adj = OperatorMatrix(self.cols, self.rows, t, self.ny, self.ns)
        if row_weights is not None:
            adj = adj.scale_cols(row_weights)
        if col_weights is not None:
            adj = adj.scale_rows([GaussianRational(1) / _gr(w) for w in col_weights])
        return adj

    def is_zero(self) -> bool:
        return all(a.is_zero() for r in self.entries for a in r)

    def nonzero_entries(self) -> List[Tuple[int, int]]:
        return [(i, j) for i, r in enumerate(self.entries) for j, a in enumerate(r) if not a.is_zero()]

    def max_terms(self) -> int:
        return max((len(a.terms) for r in self.entries for a in r), default=0)

    def __eq__(self, other):
        if not isinstance(other, OperatorMatrix):
            return NotImplemented
        return self.shape == other.shape and all(a == b for r1, r2 in zip(self.entries, other.entries) for a, b in zip(r1, r2))

    def to_json_obj(self) -> dict:
        return {
            "rows": [str(r) for r in self.rows],
            "cols": [str(c) for c in self.cols],
            "entries": [[to_json_obj(a) for a in r] for r in self.entries],
        }

    def __repr__(self):
        return f"OperatorMatrix(shape={self.shape})"
