"""High-precision scalars, truncated power series, kappa constants and
nilpotent matrix logarithms.

Every numeric value in the package is an :class:`mpmath.mpc` living in the
global mpmath context.  The working precision is a process-wide setting,
default 256 bits, overridable through the ``LEVELONE_PRECISION`` environment
variable or :func:`set_precision`.
"""
from __future__ import annotations

import os
from contextlib import contextmanager
from fractions import Fraction
from typing import Iterable, Sequence

import mpmath
import numpy as np
from mpmath import mp

ComplexHP = mpmath.mpc

DEFAULT_PRECISION = 256
PRECISION_ENV = "LEVELONE_PRECISION"

X = "x"
XI = "xi"


class SeriesError(ValueError):
    """Raised on malformed series operations."""


class NilpotencyError(ValueError):
    """Raised when a matrix expected to be nilpotent is not."""


# ---------------------------------------------------------------- precision

def default_precision() -> int:
    raw = os.environ.get(PRECISION_ENV)
    if raw:
        try:
            bits = int(raw)
        except ValueError:
            bits = DEFAULT_PRECISION
        if bits >= 53:
            return bits
    return DEFAULT_PRECISION


def set_precision(bits: int) -> None:
    if bits < 53:
        raise ValueError("precision must be at least 53 bits")
    mp.prec = int(bits)


def get_precision() -> int:
    return mp.prec


@contextmanager
def working_precision(bits: int):
    """Temporarily switch the global working precision."""
    old = mp.prec
    mp.prec = int(bits)
    try:
        yield
    finally:
        mp.prec = old


set_precision(default_precision())


def tolerance(fraction: float = 0.5):
    """Return ``2**(-fraction * precision)`` as an mpf."""
    return mpmath.ldexp(mpmath.mpf(1), -int(fraction * mp.prec))


def hp(value) -> mpmath.mpc:
    """Coerce ``value`` into a :data:`ComplexHP`.

    Accepts numbers, decimal strings, ``Fraction`` and ``[re, im]`` pairs.
    """
    if isinstance(value, mpmath.mpc):
        return value
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ValueError(f"complex pair must have two entries, got {value!r}")
        return mpmath.mpc(_real(value[0]), _real(value[1]))
    if isinstance(value, complex):
        return mpmath.mpc(value.real, value.imag)
    if hasattr(value, "x") and hasattr(value, "y") and not isinstance(value, (int, float)):
        # sympy Gaussian rational
        return mpmath.mpc(_real(Fraction(int(value.x.numerator), int(value.x.denominator))),
                          _real(Fraction(int(value.y.numerator), int(value.y.denominator))))
    return mpmath.mpc(_real(value))


def _real(v):
    if isinstance(v, Fraction):
        return mpmath.mpf(v.numerator) / v.denominator
    if isinstance(v, str):
        return mpmath.mpf(v.strip())
    return mpmath.mpf(v)


def is_negligible(value, tol=None) -> bool:
    """Zero test that is exact for exact types and tolerant for floats."""
    if isinstance(value, (mpmath.mpc, mpmath.mpf, float, complex)):
        return abs(value) <= (tolerance() if tol is None else tol)
    return not value


# ---------------------------------------------------------------- series

class TruncatedSeries:
    """Power series truncated at order ``N`` in the variable ``x`` or ``xi``.

    Parameters
    ----------
    coeffs : sequence
        Coefficients of degree ``0..N``.
    var : str
        Either ``"x"`` (Laplace plane) or ``"xi"`` (Borel plane).
    """

    __slots__ = ("coeffs", "var")

    def __init__(self, coeffs: Iterable, var: str = X):
        if var not in (X, XI):
            raise SeriesError(f"unknown variable tag {var!r}")
        c = tuple(hp(v) for v in coeffs)
        if not c:
            raise SeriesError("a series needs at least one coefficient")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "var", var)

    def __setattr__(self, name, value):
        raise AttributeError("TruncatedSeries is immutable")

    @classmethod
    def zero(cls, order: int, var: str = X) -> "TruncatedSeries":
        return cls([0] * (order + 1), var)

    @classmethod
    def constant(cls, value, order: int, var: str = X) -> "TruncatedSeries":
        return cls([value] + [0] * order, var)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def __len__(self):
        return len(self.coeffs)

    def __getitem__(self, m):
        return self.coeffs[m]

    def __repr__(self):
        head = ", ".join(mpmath.nstr(c, 8) for c in self.coeffs[:4])
        return f"TruncatedSeries({self.var}, N={self.order}, [{head}, ...])"

    def __eq__(self, other):
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        return self.var == other.var and self.coeffs == other.coeffs

    def __hash__(self):
        return hash((self.var, self.coeffs))

    def truncate(self, order: int) -> "TruncatedSeries":
        c = list(self.coeffs[: order + 1])
        c += [mpmath.mpc(0)] * (order + 1 - len(c))
        return TruncatedSeries(c, self.var)

    def _check(self, other):
        if not isinstance(other, TruncatedSeries):
            raise SeriesError("operand is not a TruncatedSeries")
        if other.var != self.var:
            raise SeriesError(f"variable mismatch: {self.var} vs {other.var}")
        return min(self.order, other.order)

    def __add__(self, other):
        if not isinstance(other, TruncatedSeries):
            c = list(self.coeffs)
            c[0] += hp(other)
            return TruncatedSeries(c, self.var)
        n = self._check(other)
        return TruncatedSeries([self.coeffs[m] + other.coeffs[m] for m in range(n + 1)], self.var)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries([-c for c in self.coeffs], self.var)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, TruncatedSeries):
            s = hp(other)
            return TruncatedSeries([s * c for c in self.coeffs], self.var)
        n = self._check(other)
        a, b = self.coeffs, other.coeffs
        out = []
        for m in range(n + 1):
            out.append(mpmath.fsum(a[i] * b[m - i] for i in range(m + 1)))
        return TruncatedSeries(out, self.var)

    __rmul__ = __mul__

    def __call__(self, z):
        """Evaluate the truncated polynomial at ``z`` (Horner)."""
        z = hp(z)
        acc = mpmath.mpc(0)
        for c in reversed(self.coeffs):
            acc = acc * z + c
        return acc

    def valuation(self, tol=None) -> int | None:
        for m, c in enumerate(self.coeffs):
            if not is_negligible(c, tol):
                return m
        return None

    def derivative(self) -> "TruncatedSeries":
        if self.order == 0:
            return TruncatedSeries([0], self.var)
        return TruncatedSeries([m * self.coeffs[m] for m in range(1, self.order + 1)], self.var)

    def shift_center(self, h) -> "TruncatedSeries":
        """Re-expand the truncated polynomial around ``h``."""
        h = hp(h)
        c = list(self.coeffs)
        n = len(c)
        # repeated synthetic division
        for k in range(n):
            for i in range(n - 2, k - 1, -1):
                c[i] += h * c[i + 1]
        return TruncatedSeries(c, self.var)

    def exp(self) -> "TruncatedSeries":
        """Exponential of a series; the constant term is exponentiated directly."""
        h = self.coeffs
        n = self.order
        g = [mpmath.exp(h[0])]
        for m in range(1, n + 1):
            g.append(mpmath.fsum(k * h[k] * g[m - k] for k in range(1, m + 1)) / m)
        return TruncatedSeries(g, self.var)

    def inverse(self) -> "TruncatedSeries":
        """Multiplicative inverse; requires a nonzero constant term."""
        a = self.coeffs
        if a[0] == 0:
            raise SeriesError("series with zero constant term is not invertible")
        inv0 = 1 / a[0]
        out = [inv0]
        for m in range(1, self.order + 1):
            out.append(-inv0 * mpmath.fsum(a[k] * out[m - k] for k in range(1, m + 1)))
        return TruncatedSeries(out, self.var)


def series_arith(a: TruncatedSeries, b: TruncatedSeries, op: str) -> TruncatedSeries:
    """Add or multiply two series of the same variable, truncating to the
    smaller order."""
    a._check(b)
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    raise SeriesError(f"unknown op {op!r}")


def borel_coeffs(s: TruncatedSeries) -> TruncatedSeries:
    """Borel transform ``x**m -> xi**(m-1) / (m-1)!`` of a series without
    constant term.

    Returns a series in ``xi`` of order ``N - 1``.
    """
    if s.var != X:
        raise SeriesError("borel_coeffs expects a series in x")
    if s.coeffs[0] != 0:
        raise SeriesError("series has a nonzero constant term; strip the delta part first")
    if s.order < 1:
        raise SeriesError("series order must be at least 1")
    out = []
    fact = mpmath.mpf(1)
    for m in range(1, s.order + 1):
        if m > 1:
            fact *= m - 1
        out.append(s.coeffs[m] / fact)
    return TruncatedSeries(out, XI)


# ---------------------------------------------------------------- kappa

def rgamma_reflected_series(t0, order: int) -> TruncatedSeries:
    """Taylor series in ``u`` of ``exp(-i pi (t0+u)) / Gamma(1 - t0 - u)``.

    Built from the polygamma expansion of ``log Gamma``; a finite product
    shift moves the expansion point into ``Re z >= 1`` so that poles of
    ``Gamma`` never enter.
    """
    t0 = hp(t0)
    z0 = 1 - t0
    shift = 0
    while mpmath.re(z0 + shift) < 1:
        shift += 1
    zs = z0 + shift
    # log(1/Gamma(zs - u)) = -lnGamma(zs) - sum_k psi^(k-1)(zs) (-u)^k / k!
    h = [mpmath.mpc(0)] * (order + 1)
    fact = mpmath.mpf(1)
    for k in range(1, order + 1):
        fact *= k
        h[k] = -mpmath.polygamma(k - 1, zs) * (-1) ** k / fact
    if order >= 1:
        h[1] += -1j * mpmath.pi
    body = TruncatedSeries(h, XI).exp() * (mpmath.exp(-1j * mpmath.pi * t0) * mpmath.rgamma(zs))
    for i in range(shift):
        # 1/Gamma(z0-u) = (z0-u)(z0+1-u)...(z0+shift-1-u) / Gamma(z0+shift-u)
        lin = [z0 + i, -1] + [0] * (order - 1) if order >= 1 else [z0 + i]
        body = body * TruncatedSeries(lin[: order + 1], XI)
    return body


def kappa(p: int, lam) -> mpmath.mpc:
    """``2 pi i`` times the ``p``-th derivative of ``exp(-i pi t)/Gamma(1-t)``
    at ``t = lam``.

    Examples
    --------
    >>> from mpmath import mp, pi
    >>> abs(kappa(0, 0) - 2j * pi) < 1e-60
    True
    """
    if p < 0:
        raise ValueError("p must be non-negative")
    ser = rgamma_reflected_series(lam, p)
    return 2j * mpmath.pi * mpmath.factorial(p) * ser.coeffs[p]


# ---------------------------------------------------------------- matrices

def zeros(rows: int, cols: int | None = None, zero=None) -> np.ndarray:
    cols = rows if cols is None else cols
    z = mpmath.mpc(0) if zero is None else zero
    out = np.empty((rows, cols), dtype=object)
    for i in range(rows):
        for j in range(cols):
            out[i, j] = z
    return out


def identity(n: int, one=None, zero=None) -> np.ndarray:
    out = zeros(n, n, zero)
    for i in range(n):
        out[i, i] = mpmath.mpc(1) if one is None else one
    return out


def hp_matrix(rows: Sequence[Sequence]) -> np.ndarray:
    rows = [list(r) for r in rows]
    out = zeros(len(rows), len(rows[0]) if rows else 0)
    for i, r in enumerate(rows):
        for j, v in enumerate(r):
            out[i, j] = hp(v)
    return out


def max_abs(m: np.ndarray):
    best = mpmath.mpf(0)
    for v in np.asarray(m).flat:
        a = abs(hp(v)) if not isinstance(v, (mpmath.mpc, mpmath.mpf)) else abs(v)
        if a > best:
            best = a
    return best


def _all_negligible(m: np.ndarray, tol) -> bool:
    return all(is_negligible(v, tol) for v in np.asarray(m).flat)


def _zero_like(m: np.ndarray):
    return m.flat[0] * 0 if m.size else mpmath.mpc(0)


def _one_like(m: np.ndarray):
    z = _zero_like(m)
    return z + 1


class NilpotentMatrix:
    """Square matrix certified nilpotent by explicit powering.

    Attributes
    ----------
    entries : numpy object array
    index : int
        Smallest ``k`` with ``entries**k`` negligible.
    """

    __slots__ = ("entries", "index")

    def __init__(self, entries: np.ndarray, tol=None):
        m = np.array(entries, dtype=object)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise NilpotencyError("nilpotent matrix must be square")
        n = m.shape[0]
        tol = tolerance(0.5) if tol is None else tol
        power = m.copy()
        index = None
        for k in range(1, n + 1):
            if _all_negligible(power, tol):
                index = k
                break
            power = power @ m
        if index is None:
            if n == 0 or _all_negligible(power, tol):
                index = max(n, 1)
            else:
                raise NilpotencyError("matrix is not nilpotent to tolerance")
        self.entries = m
        self.index = index

    @property
    def n(self) -> int:
        return self.entries.shape[0]


def nilpotent_log(M: np.ndarray, tol=None) -> NilpotentMatrix:
    """Logarithm of a unipotent matrix ``M = I + N`` as the finite series
    ``sum (-1)**(k+1) N**k / k``."""
    M = np.array(M, dtype=object)
    n = M.shape[0]
    N = M - identity(n, _one_like(M), _zero_like(M))
    nil = NilpotentMatrix(N, tol)
    out = N.copy()
    power = N.copy()
    for k in range(2, nil.index):
        power = power @ N
        out = out + power * (1 if k % 2 else -1) / k
    return NilpotentMatrix(out, tol)


def nilpotent_exp(N, tol=None) -> np.ndarray:
    """Exponential of a nilpotent matrix as a finite series."""
    if not isinstance(N, NilpotentMatrix):
        N = NilpotentMatrix(N, tol)
    A = N.entries
    n = A.shape[0]
    out = identity(n, _one_like(A), _zero_like(A))
    term = out.copy()
    for k in range(1, N.index):
        term = (term @ A) / k
        out = out + term
    return out


def lstsq(rows: Sequence[Sequence], rhs: Sequence):
    """Least-squares solve at working precision via QR.

    Returns ``(solution list, residual norm)``.
    """
    A = mpmath.matrix([list(r) for r in rows])
    b = mpmath.matrix(list(rhs))
    if A.rows == A.cols:
        x = mpmath.lu_solve(A, b)
        res = mpmath.norm(A * x - b)
    else:
        x, res = mpmath.qr_solve(A, b)
    return [x[i] for i in range(A.cols)], res
