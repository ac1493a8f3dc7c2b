"""Finite differences on the compact quotient H / H_Z.

Grid functions live on the uniform grid of the fundamental set with N points
per coordinate (N odd), stored as arrays of shape ``(N,)*(4n+3) + (ncomp,)``.
A step past the cell in y_{4l+j} wraps y and shifts the s indices by the
lattice shear, so every directional shift is a permutation of grid points.
"""

from __future__ import annotations

import itertools
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .algebra import DifferentialOperator, OperatorMatrix, Polynomial
from .group import B, build_Y, horizontal_expansion, sublaplacian


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, history: Sequence[float]):
        super().__init__(message)
        self.history = list(history)


# ---------------------------------------------------------------------------
# grid


PERM_CACHE_LIMIT = 1_000_000


class TwistedGrid:
    def __init__(self, n: int, N: int):
        if n < 1:
            raise ValueError("n >= 1 required")
        if N < 3 or N % 2 == 0:
            raise ValueError(
                f"N={N} rejected: N must be odd and >= 3 so central differences "
                "vanish only on constant modes"
            )
        self.n = n
        self.N = N
        self.h = 1.0 / N
        self.ndim = 4 * n + 3
        self.shape = (N,) * self.ndim
        self.npts = N ** self.ndim
        self._ycoef: Dict[int, List[np.ndarray]] = {}
        self._Y = build_Y(n)
        self._perms: Dict[Tuple[int, int], np.ndarray] = {}
        if self.npts <= PERM_CACHE_LIMIT:
            self.cache_shifts()

    # index helpers -------------------------------------------------------

    def axis_values(self, axis: int) -> np.ndarray:
        shape = [1] * self.ndim
        shape[axis] = self.N
        return (np.arange(self.N, dtype=float) * self.h).reshape(shape)

    def coords(self) -> List[np.ndarray]:
        """Broadcastable coordinate arrays (y_1..y_{4n}, s_1..s_3)."""
        return [self.axis_values(a) for a in range(self.ndim)]

    def full_coords(self) -> List[np.ndarray]:
        return [np.broadcast_to(c, self.shape) for c in self.coords()]

    def as_field(self, F: np.ndarray) -> np.ndarray:
        F = np.asarray(F)
        if F.shape == self.shape:
            return F[..., None]
        if F.shape[: self.ndim] != self.shape:
            raise ValueError("array does not match grid shape")
        return F

    # shifts --------------------------------------------------------------

    def shift(self, F: np.ndarray, axis: int, step: int) -> np.ndarray:
        """Values of the quotient function at the grid neighbour in ``axis``.

        ``step`` is +1 or -1.  ``F`` has trailing component axes.
        """
        if step not in (1, -1):
            raise ValueError("step must be +1 or -1")
        if axis >= 4 * self.n:
            return np.roll(F, -step, axis=axis)
        perm = self._perms.get((axis, step))
        if perm is not None:
            flat = F.reshape(self.npts, -1)
            return np.take(flat, perm, axis=0).reshape(F.shape)
        return self._shift_roll(F, axis, step)

    def _shift_roll(self, F: np.ndarray, axis: int, step: int) -> np.ndarray:
        G = np.roll(F, -step, axis=axis)
        l, j0 = divmod(axis, 4)
        N = self.N
        src = 0 if step == 1 else N - 1
        dst = N - 1 if step == 1 else 0
        sign = -1 if step == 1 else 1
        base = F.take(src, axis=axis)
        out_slice = [slice(None)] * F.ndim
        out_slice[axis] = dst
        others = [j for j in range(4) if j != j0]
        target = G[tuple(out_slice)]
        for vals in itertools.product(range(N), repeat=3):
            off = []
            for beta in range(3):
                o = 0
                for j, v in zip(others, vals):
                    o += B[beta][j0][j] * v
                off.append((sign * 2 * o) % N)
            sel = [slice(None)] * base.ndim
            for j, v in zip(others, vals):
                ax = 4 * l + j
                sel[ax - 1 if ax > axis else ax] = v
            sub = base[tuple(sel)]
            # s axes of ``sub``: the last three grid axes of the reduced array
            ns_ax = sub.ndim - (F.ndim - self.ndim) - 3
            if any(off):
                sub = np.roll(sub, shift=[-o for o in off], axis=[ns_ax, ns_ax + 1, ns_ax + 2])
            target[tuple(sel)] = sub
        return G

    def shift_permutation(self, axis: int, step: int) -> np.ndarray:
        """Flat index map p -> neighbour index, built by shifting the identity."""
        ident = np.arange(self.npts, dtype=np.int64).reshape(self.shape + (1,))
        if axis >= 4 * self.n:
            return np.roll(ident, -step, axis=axis).reshape(-1)
        return self._shift_roll(ident, axis, step).reshape(-1)

    def cache_shifts(self) -> None:
        """Precompute y-shift gathers (used automatically below PERM_CACHE_LIMIT points)."""
        for axis in range(4 * self.n):
            for step in (1, -1):
                self._perms[(axis, step)] = self.shift_permutation(axis, step)

    # derivatives ---------------------------------------------------------

    def central(self, F: np.ndarray, axis: int) -> np.ndarray:
        out = self.shift(F, axis, 1)
        out -= self.shift(F, axis, -1)
        out *= 1.0 / (2 * self.h)
        return out

    def coefficient(self, p: Polynomial) -> np.ndarray:
        """A polynomial coefficient sampled at fundamental-set representatives."""
        val = p.evaluate_numeric(self.coords())
        val = np.asarray(val)
        if val.ndim == 0:
            return val
        return np.broadcast_to(val, self.shape)

    def ycoef(self, a: int) -> List[Optional[np.ndarray]]:
        """Coefficients of d_{s_beta} in Y_a at representatives."""
        if a not in self._ycoef:
            Ya = self._Y[a]
            out = []
            for beta in range(3):
                d = [0] * self.ndim
                d[4 * self.n + beta] = 1
                p = Ya.coefficient(tuple(d))
                out.append(None if p.is_zero() else np.real(np.asarray(self.coefficient(p))).astype(float))
            self._ycoef[a] = out
        return self._ycoef[a]

    def Y(self, F: np.ndarray, a: int) -> np.ndarray:
        """Discrete Y_a: central difference in y_a plus coefficient times central ds."""
        out = self.central(F, a)
        for beta, c in enumerate(self.ycoef(a)):
            if c is not None:
                out = out + _bcast(c, F) * self.central(F, 4 * self.n + beta)
        return out

    def Y_all(self, F: np.ndarray):
        """Yield (a, Y_a F) for all a, sharing the three s-differences."""
        dsF = [self.central(F, 4 * self.n + b) for b in range(3)]
        for a in range(4 * self.n):
            out = self.central(F, a)
            for c, d in zip(self.ycoef(a), dsF):
                if c is not None:
                    out += _bcast(c, F) * d
            yield a, out

    def ds(self, F: np.ndarray, beta: int) -> np.ndarray:
        return self.central(F, 4 * self.n + beta - 1)

    def sublaplacian(self, F: np.ndarray) -> np.ndarray:
        """sum_a Y_a^T Y_a = -sum_a Y_a Y_a."""
        out = np.zeros_like(F, dtype=complex)
        for a in range(4 * self.n):
            out -= self.Y(self.Y(F, a), a)
        return out

    # inner products ------------------------------------------------------

    def inner(self, F: np.ndarray, G: np.ndarray, weights: Optional[Sequence[float]] = None) -> complex:
        F = self.as_field(F)
        G = self.as_field(G)
        w = np.ones(F.shape[-1]) if weights is None else np.asarray(weights, dtype=float)
        vol = self.h ** self.ndim
        return complex(vol * np.sum(np.sum(F * np.conj(G), axis=tuple(range(self.ndim))) * w))

    def norm(self, F, weights=None) -> float:
        return math.sqrt(max(self.inner(F, F, weights).real, 0.0))

    def remove_constants(self, F: np.ndarray) -> np.ndarray:
        F = self.as_field(F)
        return F - F.mean(axis=tuple(range(self.ndim)), keepdims=True)

    def constant_part(self, F: np.ndarray) -> np.ndarray:
        return self.as_field(F).mean(axis=tuple(range(self.ndim)))


def _bcast(c: np.ndarray, F: np.ndarray) -> np.ndarray:
    extra = F.ndim - np.ndim(c)
    return c.reshape(np.shape(c) + (1,) * extra) if extra > 0 else c


def make_grid(n: int, N: int) -> TwistedGrid:
    return TwistedGrid(n, N)


def check_shifts(grid: TwistedGrid) -> dict:
    """Every shift is a permutation and the backward shift inverts the forward one."""
    out = {"n": grid.n, "N": grid.N, "npts": grid.npts, "axes": []}
    ok = True
    for axis in range(grid.ndim):
        fwd = grid.shift_permutation(axis, 1)
        bwd = grid.shift_permutation(axis, -1)
        perm = np.array_equal(np.sort(fwd), np.arange(grid.npts))
        inv = np.array_equal(bwd[fwd], np.arange(grid.npts))
        ok &= perm and inv
        out["axes"].append({"axis": axis, "permutation": bool(perm), "inverse": bool(inv)})
    out["passed"] = bool(ok)
    return out


def cycle_check(grid: TwistedGrid, axis: int) -> bool:
    """N forward steps in y_a return each point to itself up to the lattice shear.

    A full cycle is the lattice element e_a, so the point comes back with s
    index shifted by -2 sum_j B^beta_{aj} i_j (mod N); the s axes cycle with no shift.
    """
    N = grid.N
    ident = np.arange(grid.npts, dtype=np.int64).reshape(grid.shape + (1,))
    F = ident
    for _ in range(N):
        F = grid.shift(F, axis, 1)
    got = F.reshape(-1)
    idx = np.indices(grid.shape).reshape(grid.ndim, -1)
    want = idx.copy()
    if axis < 4 * grid.n:
        l, j0 = divmod(axis, 4)
        for beta in range(3):
            off = sum(B[beta][j0][j] * idx[4 * l + j] for j in range(4))
            want[4 * grid.n + beta] = (idx[4 * grid.n + beta] - 2 * off) % N
    return bool(np.array_equal(got, np.ravel_multi_index(tuple(want), grid.shape)))


# ---------------------------------------------------------------------------
# discrete operators


class DiscreteOperator:
    """Deferred linear map between sections with ``nin`` and ``nout`` components."""

    def __init__(self, grid: TwistedGrid, nin: int, nout: int,
                 w_in: Optional[Sequence[float]] = None, w_out: Optional[Sequence[float]] = None):
        self.grid = grid
        self.nin = nin
        self.nout = nout
        self.w_in = np.ones(nin) if w_in is None else np.asarray(w_in, dtype=float)
        self.w_out = np.ones(nout) if w_out is None else np.asarray(w_out, dtype=float)

    def apply(self, F: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, F):
        F = self.grid.as_field(F)
        if F.shape[-1] != self.nin:
            raise ValueError(f"expected {self.nin} components, got {F.shape[-1]}")
        return self.apply(F)

    def adjoint(self) -> "DiscreteOperator":
        raise NotImplementedError

    def __matmul__(self, other: "DiscreteOperator") -> "DiscreteOperator":
        return Composite([self, other])

    def __add__(self, other: "DiscreteOperator") -> "DiscreteOperator":
        return SumOperator([self, other])

    def to_dense(self) -> np.ndarray:
        """Assembled matrix in (component-major) layout; small grids only."""
        g = self.grid
        n_in = g.npts * self.nin
        if n_in > 20000:
            raise MemoryError("to_dense is for small grids only")
        E = np.eye(n_in, dtype=complex)
        cols = []
        for start in range(0, n_in, 512):
            blk = E[:, start:start + 512]
            F = blk.reshape(self.nin, g.npts, -1).transpose(1, 0, 2)
            F = F.reshape(g.shape + (self.nin, -1))
            out = self._apply_batch(F)
            cols.append(out.reshape(g.npts, self.nout, -1).transpose(1, 0, 2).reshape(self.nout * g.npts, -1))
        return np.concatenate(cols, axis=1)

    def _apply_batch(self, F: np.ndarray) -> np.ndarray:
        # trailing axes (comp, batch): fold batch into a loop to keep apply simple
        outs = [self.apply(F[..., b]) for b in range(F.shape[-1])]
        return np.stack(outs, axis=-1)


class FirstOrderOperator(DiscreteOperator):
    """out_i = sum_{j,a} K[i,j,a] Y_a F_j + sum_{j,beta} Ks[i,j,beta] ds_beta F_j."""

    def __init__(self, grid, K: np.ndarray, Ks: Optional[np.ndarray] = None, w_in=None, w_out=None):
        nout, nin, _ = K.shape
        super().__init__(grid, nin, nout, w_in, w_out)
        self.K = np.asarray(K, dtype=complex)
        self.Ks = np.zeros((nout, nin, 3), dtype=complex) if Ks is None else np.asarray(Ks, dtype=complex)

    def _s_coefficients(self) -> np.ndarray:
        """C[beta] (Ny, nout, nin): total coefficient of ds_beta at each y."""
        if getattr(self, "_C", None) is None:
            g = self.grid
            ny = g.N ** (4 * g.n)
            C = np.zeros((3, ny, self.nout, self.nin), dtype=complex)
            C += self.Ks.transpose(2, 0, 1)[:, None, :, :]
            for a in range(self.K.shape[2]):
                if not np.any(self.K[:, :, a]):
                    continue
                for beta, c in enumerate(g.ycoef(a)):
                    if c is not None:
                        cy = np.ascontiguousarray(c[(Ellipsis,) + (0,) * 3]).reshape(ny)
                        C[beta] += cy[:, None, None] * self.K[None, :, :, a]
            self._C = C
            used = [a for a in range(self.K.shape[2]) if np.any(self.K[:, :, a])]
            self._used = used
            self._Kstack = np.concatenate([self.K[:, :, a].T for a in used], axis=0) if used else None
        return self._C

    def apply(self, F):
        g = self.grid
        C = self._s_coefficients()
        ny = C.shape[1]
        shp = g.shape + (self.nout,)
        out = np.zeros((ny, g.N ** 3, self.nout), dtype=complex)
        for beta in range(3):
            if np.any(C[beta]):
                d = g.central(F, 4 * g.n + beta).reshape(ny, -1, self.nin)
                out += np.matmul(d, C[beta].transpose(0, 2, 1))
        out = out.reshape(-1, self.nout)
        for pos, a in enumerate(self._used):
            M = self._Kstack[pos * self.nin:(pos + 1) * self.nin]
            out += g.central(F, a).reshape(-1, self.nin) @ M
        return out.reshape(shp)

    def adjoint(self):
        # both Y_a and ds are exactly skew on the grid
        scale = self.w_out[:, None] / self.w_in[None, :]
        K = -np.conj(self.K).transpose(1, 0, 2) * scale.T[:, :, None]
        Ks = -np.conj(self.Ks).transpose(1, 0, 2) * scale.T[:, :, None]
        return FirstOrderOperator(self.grid, K, Ks, w_in=self.w_out, w_out=self.w_in)


class Composite(DiscreteOperator):
    def __init__(self, ops: List[DiscreteOperator]):
        super().__init__(ops[0].grid, ops[-1].nin, ops[0].nout, ops[-1].w_in, ops[0].w_out)
        self.ops = ops

    def apply(self, F):
        for op in reversed(self.ops):
            F = op.apply(F)
        return F

    def adjoint(self):
        return Composite([op.adjoint() for op in reversed(self.ops)])


class SumOperator(DiscreteOperator):
    def __init__(self, ops: List[DiscreteOperator]):
        super().__init__(ops[0].grid, ops[0].nin, ops[0].nout, ops[0].w_in, ops[0].w_out)
        self.ops = ops

    def apply(self, F):
        out = self.ops[0].apply(F)
        for op in self.ops[1:]:
            out = out + op.apply(F)
        return out

    def adjoint(self):
        return SumOperator([op.adjoint() for op in self.ops])


class WordOperator(DiscreteOperator):
    """Entrywise sums of coefficient * word applications (generic discretization)."""

    def __init__(self, grid, entries: List[List[List[Tuple[object, Tuple]]]], w_in=None, w_out=None):
        super().__init__(grid, len(entries[0]), len(entries), w_in, w_out)
        self.entries = entries

    def _word(self, F: np.ndarray, word: Tuple) -> np.ndarray:
        g = self.grid
        for kind, idx in reversed(word):
            if kind == "Y":
                F = g.Y(F, idx)
            elif kind == "d":
                F = g.central(F, idx)
            elif kind == "c":
                F = _bcast(idx, F) * F
        return F

    def apply(self, F):
        g = self.grid
        out = np.zeros(g.shape + (self.nout,), dtype=complex)
        cache: Dict[Tuple, np.ndarray] = {}
        for j in range(self.nin):
            Fj = F[..., j]
            cache.clear()
            for i in range(self.nout):
                for coef, word in self.entries[i][j]:
                    key = tuple((k, v) for k, v in word if k != "c") if all(k != "c" for k, _ in word) else None
                    if key is not None and key in cache:
                        val = cache[key]
                    else:
                        val = self._word(Fj, word)
                        if key is not None:
                            cache[key] = val
                    out[..., i] += coef * val
        return out


def _pbw_words(op: DifferentialOperator, n: int) -> List[Tuple[complex, Tuple]]:
    out = []
    for (alpha, beta), c in horizontal_expansion(op).items():
        if sum(alpha) + sum(beta) > 2:
            raise ValueError("discretize supports operators of order <= 2")
        word = []
        for a, m in enumerate(alpha):
            word += [("Y", a)] * m
        for b, m in enumerate(beta):
            word += [("d", 4 * n + b)] * m
        out.append((complex(c), tuple(word)))
    return out


def _normal_words(op: DifferentialOperator, grid: TwistedGrid) -> List[Tuple[complex, Tuple]]:
    out = []
    for d, p in op.coefficients().items():
        if sum(d) > 2:
            raise ValueError("discretize supports operators of order <= 2")
        word = []
        for v, m in enumerate(d):
            word += [("d", v)] * m
        coef = grid.coefficient(p)
        if np.ndim(coef) == 0:
            out.append((complex(coef), tuple(word)))
        else:
            out.append((1.0, (("c", np.asarray(coef, dtype=complex)),) + tuple(word)))
    return out


def discretize(op, grid: TwistedGrid, mode: str = "horizontal", w_in=None, w_out=None) -> DiscreteOperator:
    """Central-difference realization of an operator or operator matrix.

    ``horizontal`` expands left-invariant operators in ordered Y/ds words and
    composes discrete Y_a (exactly skew) factors; ``normal`` maps each normal
    ordered term p d^alpha to diag(p) times products of central differences.
    """
    if isinstance(op, DifferentialOperator):
        entries = [[op]]
    elif isinstance(op, OperatorMatrix):
        entries = op.entries
    else:
        raise TypeError("expected DifferentialOperator or OperatorMatrix")
    n = grid.n
    conv = (lambda e: _pbw_words(e, n)) if mode == "horizontal" else (lambda e: _normal_words(e, grid))
    if mode not in ("horizontal", "normal"):
        raise ValueError(f"unknown mode {mode!r}")
    words = [[conv(e) for e in row] for row in entries]
    return WordOperator(grid, words, w_in=w_in, w_out=w_out)


def first_order(M: OperatorMatrix, grid: TwistedGrid, w_in=None, w_out=None) -> FirstOrderOperator:
    """Fast path for matrices whose entries are constant combinations of Y_a and ds."""
    n = grid.n
    nout, nin = M.shape
    K = np.zeros((nout, nin, 4 * n), dtype=complex)
    Ks = np.zeros((nout, nin, 3), dtype=complex)
    for i in range(nout):
        for j in range(nin):
            for (alpha, beta), c in horizontal_expansion(M[i, j]).items():
                if sum(alpha) + sum(beta) != 1:
                    raise ValueError("entry is not a first-order homogeneous field")
                if sum(alpha):
                    K[i, j, alpha.index(1)] += complex(c)
                else:
                    Ks[i, j, beta.index(1)] += complex(c)
    return FirstOrderOperator(grid, K, Ks, w_in=w_in, w_out=w_out)


# ---------------------------------------------------------------------------
# the discrete complex


class DiscreteComplex:
    """Discrete D0, D0*, D1, D1*, box1 and Delta_b for one (n, k, grid)."""

    def __init__(self, n: int, k: int, grid: TwistedGrid, convention: str = "tensor"):
        from .cfcomplex import SymWedgeBasis, build_D

        if grid.n != n:
            raise ValueError("grid built for a different n")
        self.n, self.k, self.grid, self.convention = n, k, grid, convention
        self.b0 = SymWedgeBasis(n, k, 0)
        self.b1 = SymWedgeBasis(n, k, 1)
        self.w0 = np.array([float(w) for w in self.b0.weights(convention)])
        self.w1 = np.array([float(w) for w in self.b1.weights(convention)])
        self.D0 = first_order(build_D(n, k, 0), grid, w_in=self.w0, w_out=self.w1)
        self.D0s = self.D0.adjoint()
        if n >= 2:
            self.b2 = SymWedgeBasis(n, k, 2)
            self.w2 = np.array([float(w) for w in self.b2.weights(convention)])
            self.D1 = first_order(build_D(n, k, 1), grid, w_in=self.w1, w_out=self.w2)
            self.D1s = self.D1.adjoint()
        else:
            self.D1 = self.D1s = None

    def box1(self, F: np.ndarray) -> np.ndarray:
        out = self.D0(self.D0s(F))
        if self.D1 is not None:
            out = out + self.D1s(self.D1(F))
        return out

    def delta_b(self, F: np.ndarray) -> np.ndarray:
        return self.grid.sublaplacian(self.grid.as_field(F))

    def inner0(self, F, G):
        return self.grid.inner(F, G, self.w0)

    def inner1(self, F, G):
        return self.grid.inner(F, G, self.w1)

    def inner2(self, F, G):
        return self.grid.inner(F, G, self.w2)


# ---------------------------------------------------------------------------
# checks


def random_section(grid: TwistedGrid, ncomp: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal(grid.shape + (ncomp,)) + 1j * rng.standard_normal(grid.shape + (ncomp,))


def smooth_section(grid: TwistedGrid, ncomp: int, rng: np.random.Generator, steps: int = 3) -> np.ndarray:
    """Random section damped towards low frequencies by a few heat steps."""
    F = random_section(grid, ncomp, rng)
    lam = 4 * grid.n * (1 + 3 * (2 * 2 * grid.n) ** 2) / grid.h ** 2
    for _ in range(steps):
        F = F - grid.sublaplacian(F) / lam
    return grid.remove_constants(F)


def skew_check(grid: TwistedGrid, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for a in range(4 * grid.n):
        f = random_section(grid, 1, rng)
        g = random_section(grid, 1, rng)
        val = abs(grid.inner(grid.Y(f, a), g) + grid.inner(f, grid.Y(g, a)))
        worst = max(worst, val / (grid.norm(f) * grid.norm(g)))
    for b in range(1, 4):
        f = random_section(grid, 1, rng)
        g = random_section(grid, 1, rng)
        val = abs(grid.inner(grid.ds(f, b), g) + grid.inner(f, grid.ds(g, b)))
        worst = max(worst, val / (grid.norm(f) * grid.norm(g)))
    return {"n": grid.n, "N": grid.N, "max_relative": worst, "passed": worst <= 1e-13}


def adjoint_consistency(n: int, k: int, grid: TwistedGrid, seed: int = 0) -> dict:
    """<D0 f, g>_1 = <f, disc(D0*) g>_0 with D0* discretized from the symbolic matrix."""
    from .cfcomplex import build_D0_star

    rng = np.random.default_rng(seed)
    cx = DiscreteComplex(n, k, grid)
    sym = first_order(build_D0_star(n, k, "tensor"), grid, w_in=cx.w1, w_out=cx.w0)
    f = random_section(grid, cx.b0.dim, rng)
    g = random_section(grid, cx.b1.dim, rng)
    lhs = cx.inner1(cx.D0(f), g)
    rhs = cx.inner0(f, sym(g))
    scale = grid.norm(f, cx.w0) * grid.norm(g, cx.w1)
    rel = abs(lhs - rhs) / scale
    closed = np.max(np.abs(sym(g) - cx.D0s(g))) / max(np.max(np.abs(sym(g))), 1e-300)
    return {"n": n, "k": k, "N": grid.N, "relative": rel, "closed_form_vs_symbolic": float(closed),
            "passed": rel <= 1e-13 and closed <= 1e-13}


def complex_defect(n: int, k: int, grid: TwistedGrid, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    cx = DiscreteComplex(n, k, grid)
    g = smooth_section(grid, cx.b0.dim, rng)
    d = cx.D1(cx.D0(g))
    return {"n": n, "k": k, "N": grid.N,
            "relative_defect": grid.norm(d, cx.w2) / grid.norm(g, cx.w0)}


# ---------------------------------------------------------------------------
# Krylov solver


def cg_solve(A: Callable[[np.ndarray], np.ndarray], b: np.ndarray, inner: Callable, tol: float = 1e-10,
             max_iter: int = 10000, project: Optional[Callable[[np.ndarray], np.ndarray]] = None,
             x0: Optional[np.ndarray] = None) -> Tuple[np.ndarray, dict]:
    """Conjugate gradients for an operator self-adjoint and semidefinite in ``inner``.

    ``project`` removes the deflation space (e.g. constants) from iterates.
    """
    P = project or (lambda v: v)
    b = P(b)
    bnorm = math.sqrt(max(inner(b, b).real, 0.0))
    hist = []
    if bnorm == 0.0:
        return np.zeros_like(b), {"iterations": 0, "relative_residual": 0.0, "history": [0.0]}
    x = np.zeros_like(b) if x0 is None else P(x0)
    r = b - P(A(x)) if x0 is not None else b.copy()
    p = r.copy()
    rr = inner(r, r).real
    hist.append(math.sqrt(rr) / bnorm)
    it = 0
    while hist[-1] > tol:
        if it >= max_iter:
            raise ConvergenceError(f"CG did not reach {tol} in {max_iter} iterations", hist)
        Ap = P(A(p))
        pAp = inner(p, Ap).real
        if pAp <= 0:
            raise ConvergenceError("operator not positive on the Krylov space (kernel not deflated?)", hist)
        alpha = rr / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        rr_new = inner(r, r).real
        p = r + (rr_new / rr) * p
        rr = rr_new
        it += 1
        hist.append(math.sqrt(rr) / bnorm)
    # true residual
    true = b - P(A(x))
    rel = math.sqrt(max(inner(true, true).real, 0.0)) / bnorm
    return x, {"iterations": it, "relative_residual": rel, "recursive_residual": hist[-1], "history": hist}


def solve_nonhomogeneous(cx: DiscreteComplex, f: np.ndarray, tol: float = 1e-10, max_iter: int = 10000,
                         closedness_warn: float = 1e-8) -> Tuple[np.ndarray, dict]:
    """u = D0* h with box1 h = f; reports ||D0 u - f|| / ||f||."""
    g = cx.grid
    f = g.as_field(f)
    fn = g.norm(f, cx.w1)
    if fn == 0:
        return np.zeros(g.shape + (cx.b0.dim,), dtype=complex), {"residual": 0.0}
    const = g.constant_part(f)
    const_rel = float(np.sqrt(np.sum(np.abs(const) ** 2 * cx.w1))) / fn
    if const_rel > 1e-8:
        raise ValueError(f"f is not orthogonal to constants (relative constant part {const_rel:.3e})")
    report = {"n": cx.n, "k": cx.k, "N": g.N, "constant_part": const_rel}
    if cx.D1 is not None:
        defect = g.norm(cx.D1(f), cx.w2) / fn
        report["closedness_defect"] = defect
        if defect > closedness_warn:
            warnings.warn(f"f is not discretely D1-closed (relative defect {defect:.3e})", RuntimeWarning)
    t0 = time.perf_counter()
    h, info = cg_solve(cx.box1, f, cx.inner1, tol=tol, max_iter=max_iter, project=g.remove_constants)
    u = cx.D0s(h)
    res = g.norm(cx.D0(u) - f, cx.w1) / fn
    report.update({
        "cg_iterations": info["iterations"],
        "cg_relative_residual": info["relative_residual"],
        "residual": res,
        "seconds": round(time.perf_counter() - t0, 3),
        "history": info["history"],
    })
    return u, report


def manufactured_solve(n: int, k: int, N: int, seed: int = 7, tol: float = 1e-10) -> dict:
    grid = TwistedGrid(n, N)
    cx = DiscreteComplex(n, k, grid)
    rng = np.random.default_rng(seed)
    gsec = smooth_section(grid, cx.b0.dim, rng)
    f = grid.remove_constants(cx.D0(gsec))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        _, rep = solve_nonhomogeneous(cx, f, tol=tol)
    rep["warnings"] = [str(w.message) for w in caught]
    rep["cg_target"] = 1e-8
    rep["passed"] = rep["cg_relative_residual"] <= 1e-8 and rep["residual"] <= 1e-6
    return rep


# ---------------------------------------------------------------------------
# spectral gap


def sublaplacian_dense(grid: TwistedGrid) -> np.ndarray:
    g = grid
    E = np.eye(g.npts).reshape(g.shape + (g.npts,))
    out = np.zeros_like(E)
    for a in range(4 * g.n):
        Ya = g.Y(E, a)
        out -= g.Y(Ya, a)
    return out.reshape(g.npts, g.npts)


def dense_gap(grid: TwistedGrid) -> dict:
    M = sublaplacian_dense(grid)
    sym_err = float(np.max(np.abs(M - M.T)))
    ev = np.linalg.eigvalsh((M + M.T) / 2)
    tol = 1e-9 * ev[-1]
    zero = int(np.sum(np.abs(ev) <= tol))
    nonzero = ev[ev > tol]
    return {"gap": float(nonzero[0]), "kernel_dim": zero, "min_eigenvalue": float(ev[0]),
            "symmetry_error": sym_err, "largest": float(ev[-1])}


def spectral_gap(grid: TwistedGrid, probes: int = 4, seed: int = 0, tol: float = 1e-10,
                 max_outer: int = 200) -> dict:
    """Block inverse iteration with constant deflation and Rayleigh-Ritz."""
    rng = np.random.default_rng(seed)
    g = grid
    Xs = [g.remove_constants(rng.standard_normal(g.shape + (1,))) for _ in range(probes)]
    inner = g.inner
    L = g.sublaplacian
    prev = None
    est = None
    for outer in range(max_outer):
        Xs = [cg_solve(L, x, inner, tol=1e-12, project=g.remove_constants)[0] for x in Xs]
        # orthonormalize
        Q = []
        for x in Xs:
            for q in Q:
                x = x - inner(x, q) * q
            nrm = g.norm(x)
            Q.append(x / nrm)
        LQ = [L(q) for q in Q]
        H = np.array([[inner(LQ[j], Q[i]) for j in range(len(Q))] for i in range(len(Q))])
        w, V = np.linalg.eigh((H + H.conj().T) / 2)
        Xs = [sum(V[i, j] * Q[i] for i in range(len(Q))) for j in range(len(Q))]
        est = float(w[0].real)
        if prev is not None and abs(est - prev) <= tol * abs(est):
            break
        prev = est
    rq_const = float(inner(L(np.ones(g.shape + (1,))), np.ones(g.shape + (1,))).real)
    return {"n": g.n, "N": g.N, "estimate": est, "outer_iterations": outer + 1,
            "ritz_values": [float(x) for x in w.real], "constant_rayleigh": rq_const,
            "positive": est > 0}


def spectral_gap_report(n: int = 1, N: int = 3, seeds: Sequence[int] = (0, 1, 2, 3, 4)) -> dict:
    grid = TwistedGrid(n, N)
    dense = dense_gap(grid)
    ests = [spectral_gap(grid, seed=s)["estimate"] for s in seeds]
    rel_dense = abs(ests[0] - dense["gap"]) / dense["gap"]
    spread = (max(ests) - min(ests)) / min(ests)
    return {"n": n, "N": N, "dense": dense, "estimates": ests, "relative_to_dense": rel_dense,
            "seed_spread": spread, "kernel_is_constants": dense["kernel_dim"] == 1,
            "passed": rel_dense <= 0.01 and min(ests) > 0 and spread <= 0.10}


# ---------------------------------------------------------------------------
# energy inequality


def energy_inequality_check(n: int, k: int, grid: TwistedGrid, trials: int = 3, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    cx = DiscreteComplex(n, k, grid)
    coef = (k - 1) * (1 - 3 / n)
    rows = []
    ok = True
    for _ in range(trials):
        f = smooth_section(grid, cx.b1.dim, rng)
        d0s = cx.D0s(f)
        lhs = k * grid.norm(d0s, cx.w0) ** 2
        if cx.D1 is not None:
            lhs += (k - 1) / 2 * grid.norm(cx.D1(f), cx.w2) ** 2
        quad = k * cx.inner1(cx.D0(d0s), f).real
        if cx.D1 is not None:
            quad += (k - 1) / 2 * cx.inner1(cx.D1s(cx.D1(f)), f).real
        db = cx.inner1(cx.delta_b(f), f).real
        rhs = coef * db
        rows.append({"lhs": lhs, "rhs": rhs, "margin": lhs - rhs,
                     "quadratic_form_mismatch": abs(lhs - quad) / max(abs(lhs), 1e-300)})
        ok &= lhs >= rhs and abs(lhs - quad) <= 1e-10 * abs(lhs)
    const = np.ones(grid.shape + (cx.b1.dim,), dtype=complex)
    c_l = k * grid.norm(cx.D0s(const), cx.w0) ** 2
    c_r = coef * cx.inner1(cx.delta_b(const), const).real
    return {"n": n, "k": k, "N": grid.N, "vacuous": coef <= 0,
            "note": "right side is nonpositive at this n" if coef <= 0 else "",
            "trials": rows, "constant_sides": [c_l, c_r], "passed": bool(ok)}


# ---------------------------------------------------------------------------
# Hartogs pipeline


def grid_bump(grid: TwistedGrid, axes: Optional[Sequence[int]] = None, center: Optional[int] = None) -> np.ndarray:
    """Indicator-type bump: 1 where every listed axis sits at ``center``, else 0."""
    axes = list(range(4 * grid.n)) if axes is None else list(axes)
    c = grid.N // 2 if center is None else center
    chi = np.ones(grid.shape)
    for ax in axes:
        sl = np.zeros(grid.N)
        sl[c] = 1.0
        shape = [1] * grid.ndim
        shape[ax] = grid.N
        chi = chi * sl.reshape(shape)
    return chi


def hartogs_pipeline(cx: DiscreteComplex, u: np.ndarray, chi: np.ndarray, tol: float = 1e-10,
                     kcf_tol: float = 1e-8) -> dict:
    """U = u~ - U~ with u~ = (1 - chi) u and D0 U~ = D0 u~ solved on the quotient."""
    g = cx.grid
    u = g.as_field(u)
    outside = chi == 0
    if not outside.any():
        raise ValueError("cutoff has no exterior on this grid")
    if np.any((chi < 0) | (chi > 1)):
        raise ValueError("cutoff must take values in [0, 1]")
    d0u = cx.D0(u)
    ref = max(np.max(np.abs(u)), 1e-300)
    # u must be discrete k-CF where the cutoff does not reach it
    defect_out = float(np.max(np.abs(d0u[outside]))) / ref
    if defect_out > kcf_tol:
        raise ValueError(f"u is not discretely k-CF outside supp chi (defect {defect_out:.3e})")
    ut = (1 - chi)[..., None] * u
    f = cx.D0(ut)
    c = g.constant_part(f)
    f = f - c
    if g.norm(f, cx.w1) == 0:
        Ut = np.zeros_like(u)
        solve = {"residual": 0.0, "cg_iterations": 0}
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            Ut, solve = solve_nonhomogeneous(cx, f, tol=tol)
    # k-CF functions vanishing on an open set vanish; on the grid fix the
    # constant of U~ by its mean outside supp chi
    Ut = Ut - Ut[outside].mean(axis=0)
    U = ut - Ut
    err = solve["residual"]
    disc = float(np.sqrt(np.mean(np.abs(U[outside] - u[outside]) ** 2)) /
                 max(np.sqrt(np.mean(np.abs(u[outside]) ** 2)), 1e-300))
    d0U = g.norm(cx.D0(U), cx.w1) / max(g.norm(cx.D0(ut), cx.w1), 1e-300)
    return {
        "n": cx.n, "k": cx.k, "N": g.N,
        "support_size": int(np.sum(chi != 0)),
        "discretization_error": err,
        "discrepancy_outside": disc,
        "D0U_relative": d0U,
        "closedness_defect": solve.get("closedness_defect"),
        "cg_iterations": solve.get("cg_iterations"),
        "U": U,
    }


# ---------------------------------------------------------------------------
# two-grid consistency


def sample_exppoly(grid: TwistedGrid, f) -> np.ndarray:
    return np.broadcast_to(f.evaluate_numeric(grid.coords()), grid.shape).astype(complex)


def interior_mask(grid: TwistedGrid, radius: int) -> np.ndarray:
    m = np.ones(grid.shape, dtype=bool)
    for ax in range(grid.ndim):
        idx = np.arange(grid.N)
        ok = (idx >= radius) & (idx <= grid.N - 1 - radius)
        shape = [1] * grid.ndim
        shape[ax] = grid.N
        m = m & ok.reshape(shape)
    return m


class PatchGrid(TwistedGrid):
    """Local patch of spacing h around ``center`` with no wrapping.

    It carries the same difference formulas as the quotient grid; values are
    trustworthy at the centre point (stencils of radius <= ``radius``).
    """

    def __init__(self, n: int, h: float, center: Sequence[float], radius: int = 2):
        self.n = n
        self.N = 2 * radius + 1
        self.h = float(h)
        self.radius = radius
        self.ndim = 4 * n + 3
        self.shape = (self.N,) * self.ndim
        self.npts = self.N ** self.ndim
        self.center = np.asarray(center, dtype=float)
        self._perms = {}
        self._ycoef = {}
        self._Y = build_Y(n)

    def axis_values(self, axis: int) -> np.ndarray:
        shape = [1] * self.ndim
        shape[axis] = self.N
        vals = self.center[axis] + (np.arange(self.N) - self.radius) * self.h
        return vals.reshape(shape)

    def shift(self, F, axis, step):
        if step not in (1, -1):
            raise ValueError("step must be +1 or -1")
        return np.roll(F, -step, axis=axis)

    def at_center(self, F: np.ndarray):
        return F[(self.radius,) * self.ndim]


def stencil_value(op_apply: Callable[[TwistedGrid, np.ndarray], np.ndarray], f, n: int, h: float,
                  center: Sequence[float], radius: int = 2) -> complex:
    P = PatchGrid(n, h, center, radius)
    F = sample_exppoly(P, f)[..., None]
    return complex(P.at_center(op_apply(P, F))[0])


def two_grid_study(n: int = 1, Ns: Tuple[int, int] = (5, 9), points: int = 24, seed: int = 0,
                   f=None) -> dict:
    """Error ratio of discrete Delta_b and Z_A^{A'} between two spacings at shared points."""
    from fractions import Fraction

    from .algebra import ExpPolyFunction, apply
    from .group import build_Z

    rng = np.random.default_rng(seed)
    nv = 4 * n + 3
    if f is None:
        lam = [Fraction(int(v), 10) for v in rng.integers(-6, 7, nv)]
        p = Polynomial.constant(nv, 1) + Polynomial.variable(nv, 0) * Polynomial.variable(nv, 4 * n + 1)
        f = ExpPolyFunction(p, lam)
    Z = build_Z(n).upper
    ops = {"Delta_b": (sublaplacian(n), lambda g, F: g.sublaplacian(F), 2)}
    for A in range(2 * n):
        for Ap in range(2):
            M = OperatorMatrix([0], [0], [[Z[A][Ap]]], 4 * n, 3)
            ops[f"Z_{A}^{Ap}'"] = (Z[A][Ap], (lambda M: lambda g, F: first_order(M, g)(F))(M), 1)
    centers = rng.uniform(0.25, 0.75, size=(points, nv))
    out = {"n": n, "N": list(Ns), "points": points, "expected_ratio": (Ns[1] / Ns[0]) ** 2, "ops": {}}
    ok = True
    for name, (sym, disc, r) in ops.items():
        exact_f = apply(sym, f)
        errs = {N: [] for N in Ns}
        exact = []
        for c in centers:
            ex = complex(exact_f.evaluate_numeric(list(c)))
            exact.append(ex)
            for N in Ns:
                errs[N].append(stencil_value(disc, f, n, 1.0 / N, c, r) - ex)
        scale = np.linalg.norm(exact)
        e = [float(np.linalg.norm(errs[N]) / scale) for N in Ns]
        ratio = e[0] / e[1]
        good = 2.8 <= ratio <= 5.6
        ok &= good
        out["ops"][name] = {"errors": e, "ratio": ratio, "passed": bool(good)}
    out["passed"] = bool(ok)
    return out


def patch_matches_grid(n: int, N: int, seed: int = 0, samples: int = 5) -> float:
    """Max difference between the quotient-grid operator and the patch stencil at interior points."""
    from fractions import Fraction

    from .algebra import ExpPolyFunction

    rng = np.random.default_rng(seed)
    g = TwistedGrid(n, N)
    nv = 4 * n + 3
    f = ExpPolyFunction(Polynomial.constant(nv, 1) + Polynomial.variable(nv, 1) * Polynomial.variable(nv, nv - 1),
                        [Fraction(int(v), 10) for v in rng.integers(-5, 6, nv)])
    F = sample_exppoly(g, f)[..., None]
    D = g.sublaplacian(F)[..., 0]
    idx = np.argwhere(interior_mask(g, 2))
    worst = 0.0
    for p in idx[rng.choice(len(idx), size=min(samples, len(idx)), replace=False)]:
        c = [i * g.h for i in p]
        v = stencil_value(lambda P, G: P.sublaplacian(G), f, n, g.h, c)
        worst = max(worst, abs(v - D[tuple(p)]) / max(abs(D[tuple(p)]), 1e-300))
    return worst


def sample_polynomial(grid: TwistedGrid, p: Polynomial) -> np.ndarray:
    return np.broadcast_to(np.asarray(p.evaluate_numeric(grid.coords()), dtype=complex), grid.shape)


def hartogs_demo(n: int = 2, k: int = 2, N: int = 3, seed: int = 0, tol: float = 1e-10) -> dict:
    """Constant, zero-cutoff and degree-1 runs of the cutoff pipeline."""
    import random

    from .hypersurface import ambient_nvars, degree1_kregular_basis, restrict_kregular

    rng = np.random.default_rng(seed)
    grid = TwistedGrid(n, N)
    cx = DiscreteComplex(n, k, grid)
    # point bump (all coordinates) and a bump over the s-fiber of one y point;
    # the latter keeps everything s-independent, where the discrete complex is exact
    chi = grid_bump(grid, axes=range(grid.ndim))
    chi_fiber = grid_bump(grid)
    out = {"n": n, "k": k, "N": N, "cutoff_support": int(np.sum(chi != 0))}

    c = rng.standard_normal(cx.b0.dim) + 1j * rng.standard_normal(cx.b0.dim)
    u = np.broadcast_to(c, grid.shape + (cx.b0.dim,)).copy()
    for key, cut in (("constant", chi), ("constant_fiber_bump", chi_fiber)):
        rep = hartogs_pipeline(cx, u, cut, tol=tol)
        rep.pop("U")
        bound = 10 * max(rep["discretization_error"], tol)
        rep["passed"] = rep["discrepancy_outside"] <= bound and rep["D0U_relative"] <= bound
        out[key] = rep

    zero = hartogs_pipeline(cx, u, np.zeros(grid.shape), tol=tol)
    zdisc = float(np.max(np.abs(zero.pop("U") - u)))
    out["zero_cutoff"] = {"max_difference": zdisc, "passed": zdisc == 0.0}

    # degree-1 k-CF section: pull back a random degree-1 k-regular ambient section
    prng = random.Random(seed)
    basis = degree1_kregular_basis(n, k)
    nv = ambient_nvars(n)
    f = [Polynomial(nv) for _ in range(k + 1)]
    for b in basis:
        coef = complex(prng.randint(-3, 3), prng.randint(-3, 3))
        from .algebra import GaussianRational
        gr = GaussianRational(int(coef.real), int(coef.imag))
        f = [fi + bi.scale(gr) for fi, bi in zip(f, b)]
    res = restrict_kregular(f, n, k)
    u1 = np.stack([sample_polynomial(grid, p) for p in res["pullback"]], axis=-1)
    d0 = cx.D0(u1)
    inner_pts = interior_mask(grid, 1)
    ref = float(np.max(np.abs(u1)))
    deg1 = {
        "symbolic_kcf": res["is_kcf"],
        "interior_defect": float(np.max(np.abs(d0[inner_pts]))) / ref,
        "seam_defect": float(np.max(np.abs(d0[~inner_pts]))) / ref,
        "interior_points": int(inner_pts.sum()),
    }
    try:
        r1 = hartogs_pipeline(cx, u1, chi, tol=tol)
        r1.pop("U")
        deg1.update(r1)
        deg1["accepted"] = True
        deg1["passed"] = r1["discrepancy_outside"] <= 10 * r1["discretization_error"]
    except ValueError as exc:
        deg1["accepted"] = False
        deg1["rejection"] = str(exc)
        deg1["passed"] = False
    out["degree1"] = deg1
    out["passed"] = (out["constant"]["passed"] and out["constant_fiber_bump"]["passed"]
                     and out["zero_cutoff"]["passed"])
    return out
