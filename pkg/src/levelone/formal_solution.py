"""Formal gauge series ``F(x) = I + sum F_m x^m`` of a prepared system.

For a column block ``k`` the columns ``G = F[:, block k]`` satisfy

    x^2 G' - A0 G + G A0_kk = B G,    A0_kk = a_k I + x (lam_k I + J_k).

At order ``m`` rows with ``a_row != a_k`` are divided out directly.  Rows with
``a_row = a_k`` are fixed one order later, where the equation becomes the
triangular Sylvester system ``(m - lam_j + lam_k) X - J_j X + X J_k = R``,
solved with rows descending and columns ascending.
"""
from __future__ import annotations

from dataclasses import dataclass

import mpmath
import numpy as np

from .core_algebra import TruncatedSeries, X, XI, hp, tolerance, zeros
from .system_model import LevelOneSystem

FIRST_BLOCK = "first_block"
ALL = "all"


class SingularStepError(ArithmeticError):
    """A diagonal coefficient of the recurrence vanished."""

    def __init__(self, j, k, ell, m):
        super().__init__(f"singular step at block ({j + 1},{k + 1}), row {ell + 1}, order {m}")
        self.where = (j, k, ell, m)


@dataclass(frozen=True, eq=False)
class BlockMatrixSeries:
    """Matrix series with the block row structure of ``sys``.

    Attributes
    ----------
    coeffs : tuple of object arrays, shape ``(n, ncols)``
    col_blocks : tuple of int
        Column blocks (0-based) held, in order.
    var : ``"x"`` or ``"xi"``
    """

    sys: LevelOneSystem
    coeffs: tuple
    col_blocks: tuple
    var: str = X

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def columns(self) -> list[int]:
        out = []
        for k in self.col_blocks:
            sl = self.sys.block_slice(k)
            out.extend(range(sl.start, sl.stop))
        return out

    def entry(self, i: int, c: int) -> TruncatedSeries:
        """Series of entry ``(i, c)``; ``c`` indexes the held columns."""
        return TruncatedSeries([F[i, c] for F in self.coeffs], self.var)

    def block(self, k: int) -> "BlockMatrixSeries":
        pos = 0
        for kk in self.col_blocks:
            size = self.sys.blocks[kk].size
            if kk == k:
                return BlockMatrixSeries(self.sys, tuple(F[:, pos:pos + size] for F in self.coeffs),
                                         (k,), self.var)
            pos += size
        raise KeyError(k)


def _column_block(sys: LevelOneSystem, k: int, N: int, dense: bool = False) -> list[np.ndarray]:
    n = sys.n
    bk = sys.blocks[k]
    nk = bk.size
    ks = sys.block_slice(k)
    L = sys.L_matrix()
    Lk = L[ks, ks]
    D = [sys.a_of(i) for i in range(n)]
    ak = bk.a
    tol = tolerance(0.5)
    res_rows = [i for i in range(n) if abs(D[i] - ak) <= tol * max(1, abs(ak))]
    res_blocks = [j for j in range(sys.J) if sys.same_a(j, k)]
    G = [zeros(n, nk)]
    G[0][ks, :] = np.array([[mpmath.mpc(1) if r == c else mpmath.mpc(0) for c in range(nk)]
                            for r in range(nk)], dtype=object)

    def bsum(m):
        # sum_{s=1..m} B_s G_{m-s}
        acc = zeros(n, nk)
        for s in range(1, min(m, sys.M) + 1):
            acc = acc + sys.B[s - 1] @ G[m - s]
        return acc

    def resonant(m):
        # rows with a_row = a_k of G_{m-1}, from the order-m equation
        mm = m - 1
        R = bsum(m)
        for j in res_blocks:
            js = sys.block_slice(j)
            nj = sys.blocks[j].size
            c = mm - sys.blocks[j].lam + bk.lam
            Rj = R[js, :]
            X_ = _sylvester(c, Rj, nj, nk, dense, (j, k, mm))
            G[mm][js, :] = X_

    for m in range(1, N + 1):
        if m >= 2:
            resonant(m)
        prev = G[m - 1]
        rhs = bsum(m) - (m - 1) * prev + L @ prev - prev @ Lk
        Gm = zeros(n, nk)
        for i in range(n):
            if i in res_rows:
                continue
            d = ak - D[i]
            for c in range(nk):
                Gm[i, c] = rhs[i, c] / d
        G.append(Gm)
    if N >= 1:
        resonant(N + 1)
    return G


def _sylvester(c, R, nj, nk, dense, where):
    """Solve ``c X - J X + X J = R`` for an ``nj x nk`` block."""
    j, k, m = where
    if abs(c) <= tolerance(0.5):
        raise SingularStepError(j, k, 0, m)
    if dense:
        size = nj * nk
        A = mpmath.zeros(size, size)
        b = mpmath.matrix(size, 1)
        for l in range(nj):
            for r in range(nk):
                row = l * nk + r
                A[row, row] += c
                if l + 1 < nj:
                    A[row, (l + 1) * nk + r] -= 1
                if r >= 1:
                    A[row, l * nk + r - 1] += 1
                b[row] = R[l, r]
        sol = mpmath.lu_solve(A, b)
        out = zeros(nj, nk)
        for l in range(nj):
            for r in range(nk):
                out[l, r] = sol[l * nk + r]
        return out
    out = zeros(nj, nk)
    for r in range(nk):
        for l in range(nj - 1, -1, -1):
            v = R[l, r]
            if l + 1 < nj:
                v += out[l + 1, r]
            if r >= 1:
                v -= out[l, r - 1]
            out[l, r] = v / c
    return out


def solve_homological(sys: LevelOneSystem, N: int, cols=FIRST_BLOCK, *,
                      dense: bool = False) -> BlockMatrixSeries:
    """Coefficients ``F_0 = I, F_1, ..., F_N`` of the formal gauge series.

    Parameters
    ----------
    sys : LevelOneSystem
    N : int
        Truncation order.
    cols : ``"first_block"``, ``"all"`` or an iterable of block indices
    dense : bool
        Solve the equal-Stokes-value blocks by a dense linear solve instead of
        triangular substitution (used to cross-check uniqueness).
    """
    if sys.structural:
        raise ValueError("structural systems carry no B(x); no series to compute")
    if N < 0:
        raise ValueError("order must be non-negative")
    if cols == FIRST_BLOCK:
        blocks = (0,)
    elif cols == ALL:
        blocks = tuple(range(sys.J))
    else:
        blocks = tuple(cols)
    parts = [_column_block(sys, k, N, dense) for k in blocks]
    coeffs = tuple(np.concatenate([p[m] for p in parts], axis=1) for m in range(N + 1))
    return BlockMatrixSeries(sys, coeffs, blocks, X)


def homological_residual(series: BlockMatrixSeries):
    """Max entry of the order ``1..N`` residual of the homological system."""
    sys = series.sys
    L = sys.L_matrix()
    D = sys.D_matrix()
    worst = mpmath.mpf(0)
    for k in series.col_blocks:
        G = series.block(k).coeffs
        ks = sys.block_slice(k)
        Lk = L[ks, ks]
        ak = sys.blocks[k].a
        for m in range(1, len(G)):
            r = (m - 1) * G[m - 1] - D @ G[m] - L @ G[m - 1] + ak * G[m] + G[m - 1] @ Lk
            for s in range(1, min(m, sys.M) + 1):
                r = r - sys.B[s - 1] @ G[m - s]
            for v in r.flat:
                worst = max(worst, abs(v))
    return worst


def borel_first_block(series: BlockMatrixSeries):
    """Borel transform of ``series - I``.

    Returns ``(hat, delta)`` where ``hat`` holds the coefficients of
    ``xi**(m-1)`` and ``delta`` is the removed identity part.
    """
    if series.var != X:
        raise ValueError("expected a series in x")
    F0 = series.coeffs[0]
    out = []
    fact = mpmath.mpf(1)
    for m in range(1, series.order + 1):
        if m > 1:
            fact *= m - 1
        out.append(series.coeffs[m] / fact)
    if not out:
        out = [zeros(*F0.shape)]
    return BlockMatrixSeries(series.sys, tuple(out), series.col_blocks, XI), F0.copy()


borel_block = borel_first_block


# ---------------------------------------------------------------- scalar equations

@dataclass(frozen=True)
class ScalarEquation:
    """``sum_{i,k} c[i][k] x^i theta^k y = g(x)`` with ``theta = x^2 d/dx``.

    ``coeffs[i][k]`` multiplies ``x^i theta^k``; ``rhs[m]`` is the
    coefficient of ``x^m`` in ``g``.
    """

    coeffs: tuple
    rhs: tuple = ()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(tuple(hp(v) for v in row) for row in self.coeffs))
        object.__setattr__(self, "rhs", tuple(hp(v) for v in self.rhs))

    def P(self, i: int) -> list:
        """Coefficients of the polynomial ``P_i(t) = sum_k c[i][k] t^k``."""
        return list(self.coeffs[i]) if i < len(self.coeffs) else []

    def c(self, i: int, k: int):
        if i < len(self.coeffs) and k < len(self.coeffs[i]):
            return self.coeffs[i][k]
        return mpmath.mpc(0)


def _rising(m: int, k: int) -> int:
    out = 1
    for t in range(k):
        out *= m + t
    return out


def solve_scalar_equation(eq: ScalarEquation, N: int) -> TruncatedSeries:
    """Formal power series solution of a scalar equation.

    Uses ``theta^k x^m = (m)_k x^{m+k}``; requires ``c[0][0] != 0``.
    """
    c00 = eq.c(0, 0)
    if abs(c00) <= tolerance(0.5):
        raise SingularStepError(0, 0, 0, 0)
    y = []
    for m in range(N + 1):
        acc = eq.rhs[m] if m < len(eq.rhs) else mpmath.mpc(0)
        for i in range(len(eq.coeffs)):
            for k in range(len(eq.coeffs[i])):
                if i == 0 and k == 0:
                    continue
                src = m - i - k
                if src < 0:
                    continue
                w = _rising(src, k)
                if w:
                    acc -= eq.coeffs[i][k] * w * y[src]
        y.append(acc / c00)
    return TruncatedSeries(y, X)
