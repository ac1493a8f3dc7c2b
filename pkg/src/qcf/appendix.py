"""Literal n = 2, k = 2 reference matrices and their comparison with computed ones.

Entries are transcribed in a small text notation and parsed into operators:

* ``Y3``, ``iY4`` and signed sums of them, e.g. ``-Y3-iY4``
* products of parenthesised linear forms, e.g. ``(Y1+iY2)(-Y3-iY4)``
* ``Db`` (sublaplacian), ``D1``..``D4`` (partial sublaplacians)
* ``L1`` = 8(ds2 + i ds3) and ``cL1`` its conjugate
* ``12i ds1`` style multiples of an s-derivative
"""

from __future__ import annotations

import re
from typing import Dict, List, Optional, Tuple

from .algebra import DifferentialOperator, GaussianRational, OperatorMatrix, compose
from .group import build_Y, ds, sublaplacian

N_APP = 2
K_APP = 2

D0_TEXT = [
    ["-Y3-iY4", "-Y1-iY2", "0"],
    ["Y1-iY2", "-Y3+iY4", "0"],
    ["-Y7-iY8", "-Y5-iY6", "0"],
    ["Y5-iY6", "-Y7+iY8", "0"],
    ["0", "-Y3-iY4", "-Y1-iY2"],
    ["0", "Y1-iY2", "-Y3+iY4"],
    ["0", "-Y7-iY8", "-Y5-iY6"],
    ["0", "Y5-iY6", "-Y7+iY8"],
]

D1_TEXT = [
    ["-Y1+iY2", "-Y3-iY4", "0", "0", "Y3-iY4", "-Y1-iY2", "0", "0"],
    ["Y7+iY8", "0", "-Y3-iY4", "0", "Y5+iY6", "0", "-Y1-iY2", "0"],
    ["-Y5-iY6", "0", "0", "-Y3-iY4", "Y7-iY8", "0", "0", "-Y1-iY2"],
    ["0", "Y7+iY8", "Y1-iY2", "0", "0", "Y5+iY6", "-Y3+iY4", "0"],
    ["0", "-Y5+iY6", "0", "Y1-iY2", "0", "Y7-iY8", "0", "-Y3+iY4"],
    ["0", "0", "-Y5+iY6", "-Y7-iY8", "0", "0", "Y7-iY8", "-Y5-iY6"],
]

BLOCK_A_TEXT = [
    ["Db+D1-12i ds1", "L1+(Y1+iY2)(-Y3-iY4)", "(-Y1-iY2)(Y5-iY6)", "(-Y1+iY2)(Y7+iY8)"],
    ["-cL1+(Y3-iY4)(-Y1+iY2)", "Db+D2+12i ds1", "(-Y3+iY4)(Y5-iY6)", "(-Y3+iY4)(Y7+iY8)"],
    ["(-Y5-iY6)(Y1-iY2)", "(-Y5-iY6)(Y3+iY4)", "Db+D3-12i ds1", "L1+(Y5+iY6)(-Y7-iY8)"],
    ["(-Y7+iY8)(Y1+iY2)", "(-Y7+iY8)(Y3+iY4)", "-cL1+(Y7-iY8)(-Y5+iY6)", "Db+D4+12i ds1"],
]

BLOCK_D_TEXT = [
    ["Db+D2-12i ds1", "L1+(-Y3-iY4)(-Y1-iY2)", "(-Y3-iY4)(-Y7-iY8)", "(-Y3-iY4)(-Y5-iY6)"],
    ["-cL1+(Y1-iY2)(Y3-iY4)", "Db+D1+12i ds1", "(Y1-iY2)(Y7-iY8)", "(Y1-iY2)(-Y5-iY6)"],
    ["(-Y7-iY8)(Y3-iY4)", "(-Y7-iY8)(-Y1-iY2)", "Db+D4-12i ds1", "L1+(-Y7-iY8)(-Y5-iY6)"],
    ["(Y5-iY6)(Y3-iY4)", "(Y5-iY6)(-Y1-iY2)", "-cL1+(Y5-iY6)(Y7-iY8)", "Db+D3+12i ds1"],
]


# Suspected misprints in the printed reference: (matrix, row, col) 1-based ->
# replacement text.  Used only by the diagnostic comparison; the literal
# tables above are never altered.
SUSPECTED_MISPRINTS = {
    ("D1", 3, 1): "-Y5+iY6",
    ("A", 1, 4): "(-Y1-iY2)(Y7+iY8)",
    ("A", 4, 1): "(-Y7+iY8)(Y1-iY2)",
    ("D", 1, 3): "(-Y3-iY4)(Y7-iY8)",
}


def corrected_text(name: str) -> List[List[str]]:
    base = {"D0": D0_TEXT, "D1": D1_TEXT, "A": BLOCK_A_TEXT, "D": BLOCK_D_TEXT}[name]
    out = [list(r) for r in base]
    for (m, i, j), txt in SUSPECTED_MISPRINTS.items():
        if m == name:
            out[i - 1][j - 1] = txt
    return out


class AppendixParseError(ValueError):
    pass


def _split_top(expr: str) -> List[str]:
    """Split at top-level + and - keeping the sign with each term."""
    terms, depth, cur = [], 0, ""
    for ch in expr:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch in "+-" and depth == 0 and cur.strip():
            terms.append(cur)
            cur = ch
        else:
            cur += ch
    if cur.strip():
        terms.append(cur)
    return [t.strip() for t in terms]


_LIN = re.compile(r"^([+-]?)(i?)Y(\d+)$")
_DS = re.compile(r"^(\d*)(i?)\s*ds(\d)$")


class _Ctx:
    def __init__(self, n: int):
        self.n = n
        self.Y = build_Y(n)
        self.zero = DifferentialOperator(4 * n, 3)

    def linear(self, text: str) -> DifferentialOperator:
        acc = self.zero
        for t in _split_top(text):
            m = _LIN.match(t.replace(" ", ""))
            if not m:
                raise AppendixParseError(f"bad linear term {t!r}")
            sign, imag, a = m.groups()
            c = GaussianRational(0, 1) if imag else GaussianRational(1)
            if sign == "-":
                c = -c
            acc = acc + self.Y[int(a) - 1].scale(c)
        return acc

    def partial_lap(self, i: int) -> DifferentialOperator:
        y1, y2 = self.Y[2 * i - 2], self.Y[2 * i - 1]
        return (compose(y1, y1) + compose(y2, y2)).scale(-1)

    def L1(self, conj: bool = False) -> DifferentialOperator:
        i = GaussianRational(0, -1 if conj else 1)
        return (ds(self.n, 2) + ds(self.n, 3).scale(i)).scale(8)

    def term(self, t: str) -> DifferentialOperator:
        t = t.replace(" ", "")
        sign = 1
        if t[0] in "+-":
            sign = -1 if t[0] == "-" else 1
            t = t[1:]
        if t.startswith("("):
            factors = re.findall(r"\(([^()]*)\)", t)
            if "".join(f"({f})" for f in factors) != t:
                raise AppendixParseError(f"bad product {t!r}")
            op = self.linear(factors[0])
            for f in factors[1:]:
                op = compose(op, self.linear(f))
        elif t == "Db":
            op = sublaplacian(self.n)
        elif re.fullmatch(r"D\d", t):
            op = self.partial_lap(int(t[1]))
        elif t in ("L1", "cL1"):
            op = self.L1(conj=t == "cL1")
        elif _DS.match(t):
            num, imag, b = _DS.match(t).groups()
            c = GaussianRational(0, int(num or 1)) if imag else GaussianRational(int(num or 1))
            op = ds(self.n, int(b)).scale(c)
        elif _LIN.match(t):
            op = self.linear(t)
        else:
            raise AppendixParseError(f"unrecognised term {t!r}")
        return op if sign > 0 else op.scale(-1)

    def expr(self, text: str) -> DifferentialOperator:
        if text.strip() == "0":
            return self.zero
        acc = self.zero
        for t in _split_top(text):
            acc = acc + self.term(t)
        return acc


def parse_entry(text: str, n: int = N_APP) -> DifferentialOperator:
    return _Ctx(n).expr(text)


def parse_matrix(rows: List[List[str]], n: int = N_APP) -> OperatorMatrix:
    ctx = _Ctx(n)
    entries = [[ctx.expr(e) for e in row] for row in rows]
    return OperatorMatrix(range(len(rows)), range(len(rows[0])), entries, 4 * n, 3)


def literal_D0() -> OperatorMatrix:
    return parse_matrix(D0_TEXT)


def literal_D1() -> OperatorMatrix:
    return parse_matrix(D1_TEXT)


def literal_blocks() -> Dict[str, OperatorMatrix]:
    return {"A": parse_matrix(BLOCK_A_TEXT), "D": parse_matrix(BLOCK_D_TEXT)}


def _diff_entries(computed: OperatorMatrix, literal: OperatorMatrix, texts: List[List[str]],
                  offset: Tuple[int, int] = (0, 0)) -> List[dict]:
    from .cfcomplex import render_Y

    out = []
    r0, c0 = offset
    for i in range(literal.shape[0]):
        for j in range(literal.shape[1]):
            a = computed[r0 + i, c0 + j]
            b = literal[i, j]
            if a != b:
                out.append({
                    "row": r0 + i + 1,
                    "col": c0 + j + 1,
                    "printed": texts[i][j],
                    "computed": render_Y(a),
                    "printed_minus_computed": render_Y(b - a),
                })
    return out


def compare_D(j: int, corrected: bool = False) -> dict:
    from .cfcomplex import build_D

    computed = build_D(N_APP, K_APP, j)
    texts = D0_TEXT if j == 0 else D1_TEXT
    if corrected:
        texts = corrected_text(f"D{j}")
    lit = parse_matrix(texts)
    mism = _diff_entries(computed, lit, texts)
    return {"matrix": f"D{j}", "shape": list(lit.shape), "passed": not mism, "mismatches": mism}


def _sub(M: OperatorMatrix, r0: int, c0: int, size: int) -> OperatorMatrix:
    ent = [[M[r0 + i, c0 + j] for j in range(size)] for i in range(size)]
    return OperatorMatrix(range(size), range(size), ent, M.ny, M.ns)


def compare_box1(corrected: bool = False) -> dict:
    """Compare the appendix-convention box1 with the printed blocks.

    The display names the lower-right block B while the block is defined as D;
    which printed block matches which diagonal position is measured, not assumed.
    """
    from .cfcomplex import APPENDIX, build_box1

    box = build_box1(N_APP, K_APP, APPENDIX)
    if corrected:
        texts = {"A": corrected_text("A"), "D": corrected_text("D")}
    else:
        texts = {"A": BLOCK_A_TEXT, "D": BLOCK_D_TEXT}
    blocks = {name: parse_matrix(t) for name, t in texts.items()}
    off_zero = all(box[i, j].is_zero() for i in range(8) for j in range(8) if (i < 4) != (j < 4))
    placement = {}
    for name, lit in blocks.items():
        for pos, off in (("upper", 0), ("lower", 4)):
            if _sub(box, off, off, 4) == lit:
                placement[name] = pos
    mism = {}
    for name, off in (("A", 0), ("D", 4)):
        mism[name] = _diff_entries(box, blocks[name], texts[name], (off, off))
    passed = off_zero and not mism["A"] and not mism["D"]
    return {
        "passed": passed,
        "off_diagonal_blocks_zero": off_zero,
        "block_placement": placement,
        "mismatches": mism,
    }


def appendix_report(corrected: bool = False) -> dict:
    d0 = compare_D(0, corrected)
    d1 = compare_D(1, corrected)
    box = compare_box1(corrected)
    return {
        "transcription": "corrected" if corrected else "literal",
        "n": N_APP,
        "k": K_APP,
        "D0": d0,
        "D1": d1,
        "box1": box,
        "passed": d0["passed"] and d1["passed"] and box["passed"],
    }
