"""Log-polynomial germs at a singular point and the variation operator.

A germ is a finite sum of terms

    u**(lam + shift - 1) * (ln u / (2 pi i))**p * h(u),      u = xi - omega,

with ``0 <= Re lam < 1``, an integer ``shift`` and an analytic coefficient
``h`` given as a truncated series.  Logarithms are normalized by ``2 pi i`` so
that the variation of pure log powers has integer coefficients and the
identities for ``var`` hold exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import mpmath

from ..core_algebra import XI, TruncatedSeries, hp, tolerance


class InsufficientSheetData(ValueError):
    pass


class GermError(ValueError):
    pass


def _reduce(lam):
    """Split ``lam`` into ``(mu, n)`` with ``lam = mu + n`` and ``0 <= Re mu < 1``."""
    lam = hp(lam)
    n = int(mpmath.floor(mpmath.re(lam) + tolerance(0.25)))
    mu = lam - n
    if abs(mpmath.re(mu)) < tolerance(0.25):
        mu = mpmath.mpc(0, mpmath.im(mu))
    return mu, n


def _same_class(a, b) -> bool:
    return abs(a - b) < tolerance(0.25)


@dataclass(frozen=True)
class GermTerm:
    lam: mpmath.mpc
    p: int
    shift: int
    h: TruncatedSeries

    @property
    def exponent(self):
        return self.lam + self.shift - 1


def principal_log(u, theta_star=0, sheet: int = 0):
    """``ln u`` with ``arg u`` in ``(theta_star - 2 pi, theta_star]`` minus
    ``2 pi * sheet``."""
    u = hp(u)
    a = mpmath.arg(u)
    two_pi = 2 * mpmath.pi
    while a > theta_star:
        a -= two_pi
    while a <= theta_star - two_pi:
        a += two_pi
    return mpmath.log(abs(u)) + 1j * (a - two_pi * sheet)


class LogPolynomialGerm:
    """Finite sum of log-power monomials with analytic coefficients.

    Parameters
    ----------
    center : complex
        The singular point ``omega``.
    terms : iterable of ``(lam, p, shift, h)``
        ``h`` may be a :class:`TruncatedSeries` or a scalar constant.
    theta_star : real
        Determination: sheet 0 has ``arg u`` in ``(theta_star - 2 pi, theta_star]``.
    """

    def __init__(self, center=0, terms=(), theta_star=0, order: int = 8):
        self.center = hp(center)
        self.theta_star = mpmath.mpf(theta_star)
        merged: list[GermTerm] = []
        for lam, p, shift, h in terms:
            if not isinstance(h, TruncatedSeries):
                h = TruncatedSeries([h] + [0] * order, XI)
            mu, n = _reduce(lam)
            self._merge(merged, GermTerm(mu, int(p), int(shift) + n, h))
        self.terms = tuple(t for t in merged if any(c != 0 for c in t.h.coeffs))

    @staticmethod
    def _merge(acc: list, term: GermTerm):
        for idx, t in enumerate(acc):
            if t.p == term.p and _same_class(t.lam, term.lam):
                lo = min(t.shift, term.shift)
                order = min(t.h.order + t.shift, term.h.order + term.shift) - lo

                def lift(s: GermTerm):
                    c = [mpmath.mpc(0)] * (s.shift - lo) + list(s.h.coeffs)
                    return TruncatedSeries((c + [0] * (order + 1))[: order + 1], XI)

                acc[idx] = GermTerm(t.lam, t.p, lo, lift(t) + lift(term))
                return
        acc.append(term)

    # ---- algebra
    def __add__(self, other: "LogPolynomialGerm") -> "LogPolynomialGerm":
        self._same_center(other)
        return LogPolynomialGerm(self.center, [(t.lam, t.p, t.shift, t.h) for t in self.terms + other.terms],
                                 self.theta_star)

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, s) -> "LogPolynomialGerm":
        return LogPolynomialGerm(self.center, [(t.lam, t.p, t.shift, t.h * s) for t in self.terms],
                                 self.theta_star)

    def mul_power(self, beta) -> "LogPolynomialGerm":
        """Multiply by ``u**beta``."""
        return LogPolynomialGerm(self.center, [(t.lam + beta, t.p, t.shift, t.h) for t in self.terms],
                                 self.theta_star)

    def __mul__(self, other):
        if not isinstance(other, LogPolynomialGerm):
            return self.scale(other)
        self._same_center(other)
        out = []
        for a in self.terms:
            for b in other.terms:
                # u^(la+sa-1) u^(lb+sb-1) = u^((la+lb) + (sa+sb-1) - 1)
                out.append((a.lam + b.lam, a.p + b.p, a.shift + b.shift - 1, a.h * b.h))
        return LogPolynomialGerm(self.center, out, self.theta_star)

    __rmul__ = scale

    def _same_center(self, other):
        if abs(self.center - other.center) > tolerance(0.5) * max(1, abs(self.center)):
            raise GermError("germs live at different points")

    # ---- queries
    def evaluate(self, u, sheet: int = 0, log_u=None):
        """Value at ``omega + u`` on the given sheet (or with an explicit
        ``log_u``)."""
        u = hp(u)
        L = principal_log(u, self.theta_star, sheet) if log_u is None else hp(log_u)
        ell = L / (2j * mpmath.pi)
        total = mpmath.mpc(0)
        for t in self.terms:
            total += mpmath.exp(t.exponent * L) * ell ** t.p * t.h(u)
        return total

    def is_simple_moderate(self) -> bool:
        for t in self.terms:
            if t.shift < 0:
                return False
            if t.lam == 0 and t.p == 0 and t.shift < 1:
                return False
        return True

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, lam, p: int, power: int = 0):
        """Coefficient of ``u**(lam + power - 1) * ell**p`` (``ell = ln u / 2 pi i``)."""
        mu, n = _reduce(lam)
        for t in self.terms:
            if t.p == p and _same_class(t.lam, mu):
                m = power + n - t.shift
                if 0 <= m <= t.h.order:
                    return t.h.coeffs[m]
                return mpmath.mpc(0)
        return mpmath.mpc(0)

    def without_holomorphic_part(self) -> "LogPolynomialGerm":
        """Drop nonnegative integer powers without logs (the class of a major
        is unchanged)."""
        out = []
        for t in self.terms:
            if t.lam == 0 and t.p == 0:
                keep = max(0, min(1 - t.shift, t.h.order + 1))
                if keep == 0:
                    continue
                h = TruncatedSeries(list(t.h.coeffs[:keep]), XI)
                out.append((t.lam, t.p, t.shift, h))
            else:
                out.append((t.lam, t.p, t.shift, t.h))
        return LogPolynomialGerm(self.center, out, self.theta_star)

    def __repr__(self):
        parts = [f"u^({mpmath.nstr(t.exponent, 6)}) ell^{t.p} [{mpmath.nstr(t.h.coeffs[0], 8)} + ...]"
                 for t in self.terms]
        return f"LogPolynomialGerm(omega={mpmath.nstr(self.center, 8)}: " + " + ".join(parts) + ")"


def _var_germ(g: LogPolynomialGerm) -> LogPolynomialGerm:
    out = []
    for t in g.terms:
        # var(u^a ell^p) = u^a [ell^p - e^{-2 pi i a} (ell - 1)^p]
        if t.lam == 0:
            rot = 1
        else:
            rot = mpmath.exp(-2j * mpmath.pi * t.lam)
        for q in range(t.p + 1):
            coef = mpmath.binomial(t.p, q) * (-1) ** (t.p - q)
            c = -rot * coef
            if q == t.p:
                c = 1 + c if rot != 1 else 0
            if c == 0:
                continue
            out.append((t.lam, q, t.shift, t.h * c))
    return LogPolynomialGerm(g.center, out, g.theta_star)


class SheetSamples:
    """Values of a function on consecutive sheets around a point.

    ``values[s]`` is a list aligned with ``points`` (sheet ``s`` means the
    argument lowered by ``2 pi s``)."""

    def __init__(self, points, values: dict):
        self.points = list(points)
        self.values = {int(s): list(v) for s, v in values.items()}

    @property
    def sheets(self):
        return sorted(self.values)


def variation(g):
    """Loop difference ``g(u) - g(u e^{-2 pi i})``.

    On a :class:`LogPolynomialGerm` the closed-form rules are applied; on
    :class:`SheetSamples` or a callable ``f(u, sheet)`` the difference of
    consecutive sheets is returned.
    """
    if isinstance(g, LogPolynomialGerm):
        return _var_germ(g)
    if isinstance(g, SheetSamples):
        sh = g.sheets
        if len(sh) < 2:
            raise InsufficientSheetData("variation needs at least two consecutive sheets")
        out = {}
        for s in sh:
            if s + 1 in g.values:
                out[s] = [a - b for a, b in zip(g.values[s], g.values[s + 1])]
        if not out:
            raise InsufficientSheetData("no pair of consecutive sheets")
        return SheetSamples(g.points, out)
    if callable(g):
        def var_g(u, sheet=0):
            return g(u, sheet) - g(u, sheet + 1)
        return var_g
    raise TypeError("variation expects a germ, sheet samples or a callable")


def variation_power(g, p: int):
    for _ in range(p):
        g = variation(g)
    return g
