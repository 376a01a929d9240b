"""Exponential-torus grading, alien derivations and bridge relations.

The torus acts on the block ``(j, k)`` of a Stokes matrix by the monomial
``mu**(m_j - m_k)`` where ``m_j`` are the integer coordinates of ``a_j`` in a
basis of the lattice spanned by the Stokes values.  The alien derivations
are the homogeneous components of ``log(I + sum_omega D_omega^+ mu^m(omega))``.

Matrix entries may be ``mpmath.mpc``, exact ``QQ_I`` elements or sympy
expressions; all operations are ring operations plus division by integers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import mpmath
import numpy as np
import sympy
from sympy.matrices.normalforms import hermite_normal_form

from .core_algebra import hp, is_negligible, tolerance
from .stokes_laplace import StokesMatrix, delta_plus_split
from .system_model import LevelOneSystem, stokes_values


class GradingError(ValueError):
    """No exact lattice basis, or a value is not integral in the basis."""


class StrayMonomialError(ArithmeticError):
    """The graded logarithm has a component at a weight matching no Stokes
    value of the direction."""


def _is_zero(v) -> bool:
    if isinstance(v, sympy.Basic):
        return sympy.expand(v) == 0
    if isinstance(v, (mpmath.mpc, mpmath.mpf)):
        return is_negligible(v, tolerance(0.5))
    return is_negligible(v)


def _clean(v):
    return sympy.expand(v) if isinstance(v, sympy.Basic) else v


# ---------------------------------------------------------------- lattice

def _realify(z):
    # Re + pi Im is injective on Q-combinations of algebraic numbers
    return mpmath.re(z) + mpmath.pi * mpmath.im(z)


def _relation(values, maxcoeff=10 ** 6):
    tol = mpmath.mpf(2) ** (-(mpmath.mp.prec // 2))
    vec = [_realify(v) for v in values]
    if all(abs(v) <= tol for v in vec[1:]) and abs(vec[0]) > tol:
        return None
    for idx, v in enumerate(vec):
        # a vanishing entry is its own relation; PSLQ rejects zeros
        if abs(v) <= tol and abs(values[idx]) <= tol:
            return [1 if t == idx else 0 for t in range(len(vec))]
    rel = mpmath.pslq(vec, tol=tol, maxcoeff=maxcoeff, maxsteps=10 ** 5)
    if rel is None:
        return None
    # confirm on the complex values
    s = mpmath.fsum(c * v for c, v in zip(rel, values))
    if abs(s) > tol * max(1, max(abs(v) for v in values)):
        return None
    return rel


@dataclass
class TorusGrading:
    """Lattice basis ``b_1..b_nu`` and integer weights ``m_j`` per block."""

    basis: list
    weights: list
    values: list

    @property
    def rank(self) -> int:
        return len(self.basis)

    def value_of(self, m) -> mpmath.mpc:
        return mpmath.fsum(int(c) * b for c, b in zip(m, self.basis)) if self.basis else mpmath.mpc(0)

    def weight_of_value(self, omega) -> tuple:
        return _coordinates(hp(omega), self.basis)

    def torus_matrix(self, lam) -> list:
        """Diagonal of ``T_lambda`` (one entry per block)."""
        return [lam ** sum(int(c) for c in m) if self.rank == 1 else
                tuple(lam ** int(c) for c in m) for m in self.weights]

    def check(self):
        tol = mpmath.mpf(2) ** (-(mpmath.mp.prec // 2))
        for a, m in zip(self.values, self.weights):
            if abs(self.value_of(m) - a) > tol * max(1, abs(a)):
                raise GradingError(f"value {mpmath.nstr(a, 10)} is not the combination {m}")
        if self.rank > 1 and _relation(self.basis) is not None:
            raise GradingError("basis is not Z-linearly independent")
        return True


def _coordinates(a, basis) -> tuple:
    if abs(a) <= tolerance(0.5):
        return tuple(0 for _ in basis)
    if not basis:
        raise GradingError("nonzero value with empty basis")
    rel = _relation([a] + list(basis))
    if rel is None or rel[0] == 0:
        raise GradingError(f"{mpmath.nstr(a, 15)} has no integer coordinates in the basis")
    if abs(rel[0]) != 1:
        raise GradingError(f"{mpmath.nstr(a, 15)} has non-integral coordinates in the basis")
    return tuple(int(-c * rel[0]) for c in rel[1:])


def _rational_basis(values):
    """Greedy Q-basis in input order and rational coordinates of all values."""
    basis: list = []
    coords: list = []
    for v in values:
        if abs(v) <= tolerance(0.5):
            coords.append(None)
            continue
        rel = _relation([v] + basis) if basis else None
        if rel is None or rel[0] == 0:
            basis.append(v)
            coords.append(None)
        else:
            coords.append([sympy.Rational(-c, rel[0]) for c in rel[1:]])
    r = len(basis)
    out = []
    idx = 0
    for v, c in zip(values, coords):
        if abs(v) <= tolerance(0.5):
            out.append([sympy.Integer(0)] * r)
        elif c is None:
            e = [sympy.Integer(0)] * r
            e[idx] = sympy.Integer(1)
            idx += 1
            out.append(e)
        else:
            out.append(list(c) + [sympy.Integer(0)] * (r - len(c)))
    return basis, out


def lattice_basis(Omega: Sequence, basis: Sequence | None = None) -> TorusGrading:
    """Z-basis of the lattice spanned by ``Omega`` with integer weights.

    With a user ``basis`` the weights are validated against it.  Otherwise a
    Q-basis is chosen greedily in input order by integer-relation detection
    and refined to a Z-basis through a Hermite normal form.
    """
    values = [hp(a) for a in Omega]
    if basis is not None:
        b = [hp(v) for v in basis]
        g = TorusGrading(b, [_coordinates(a, b) for a in values], values)
        g.check()
        return g
    qb, coords = _rational_basis(values)
    r = len(qb)
    if r == 0:
        return TorusGrading([], [() for _ in values], values)
    den = sympy.ilcm(*[q.q for c in coords for q in c]) if coords else 1
    cols = [[int(q * den) for q in c] for c in coords]
    if all(all(q.q == 1 for q in c) for c in coords):
        weights = [tuple(int(q) for q in c) for c in coords]
        g = TorusGrading(qb, weights, values)
        g.check()
        return g
    A = sympy.Matrix(r, len(cols), lambda i, j: cols[j][i])
    H = hermite_normal_form(A)
    H = H[:, [j for j in range(H.shape[1]) if any(H[i, j] != 0 for i in range(r))]]
    new_basis = [mpmath.fsum(mpmath.mpf(int(H[i, j])) / int(den) * qb[i] for i in range(r))
                 for j in range(H.shape[1])]
    weights = []
    for c in cols:
        sol = H.solve(sympy.Matrix(c)) if H.shape[0] == H.shape[1] else H.pinv() * sympy.Matrix(c)
        if any(not v.is_integer for v in sol):
            raise GradingError("Hermite reduction produced non-integral weights")
        weights.append(tuple(int(v) for v in sol))
    g = TorusGrading(new_basis, weights, values)
    g.check()
    return g


def system_grading(sys: LevelOneSystem, basis: Sequence | None = None) -> TorusGrading:
    return lattice_basis([b.a for b in sys.blocks], basis)


def weights_of(sys: LevelOneSystem, j: int, grading: TorusGrading) -> tuple:
    """Integer coordinates of ``a_j`` (block ``j``, 1-based) in the basis."""
    if not 1 <= j <= sys.J:
        raise IndexError("block index out of range")
    return _coordinates(sys.blocks[j - 1].a, grading.basis)


# ---------------------------------------------------------------- graded algebra

def _add_weights(a, b):
    return tuple(x + y for x, y in zip(a, b))


def _mat_zero(m) -> bool:
    return all(_is_zero(v) for v in np.asarray(m).flat)


def graded_mul(A: dict, B: dict) -> dict:
    out: dict = {}
    for ka, ma in A.items():
        for kb, mb in B.items():
            key = _add_weights(ka, kb)
            prod = ma @ mb
            out[key] = out[key] + prod if key in out else prod
    return {k: v for k, v in out.items() if not _mat_zero(v)}


def graded_log(N: dict, n: int) -> dict:
    """``log(I + N)`` for a graded nilpotent ``N`` (dict weight -> matrix)."""
    out = {k: v.copy() for k, v in N.items()}
    power = dict(N)
    for k in range(2, n + 1):
        power = graded_mul(power, N)
        if not power:
            break
        sign = 1 if k % 2 else -1
        for key, m in power.items():
            term = m * sign / k
            out[key] = out[key] + term if key in out else term
    return {k: np.vectorize(_clean, otypes=[object])(v) for k, v in out.items() if not _mat_zero(v)}


def graded_exp(L: dict, n: int) -> dict:
    """``exp(L) - I`` for a graded nilpotent ``L``."""
    out = {k: v.copy() for k, v in L.items()}
    term = dict(L)
    for k in range(2, n + 1):
        term = {key: m / k for key, m in graded_mul(term, L).items()}
        if not term:
            break
        for key, m in term.items():
            out[key] = out[key] + m if key in out else m
    return {k: np.vectorize(_clean, otypes=[object])(v) for k, v in out.items() if not _mat_zero(v)}


# ---------------------------------------------------------------- alien derivations

@dataclass
class AlienComponent:
    """``omega``, its weight ``m(omega)`` and the matrix of the dotted alien
    derivation (``plus`` holds the Stokes part ``D_omega^+``)."""

    omega: mpmath.mpc
    weight: tuple
    matrix: np.ndarray
    plus: np.ndarray
    theta_star: mpmath.mpf = mpmath.mpf(0)
    label: str = ""


def _omega_pattern_ok(sys, omega, m) -> bool:
    for j in range(sys.J):
        for k in range(sys.J):
            w = sys.blocks[j].a - sys.blocks[k].a
            if abs(w - omega) <= tolerance(0.5) * max(1, abs(omega)):
                continue
            if not _mat_zero(m[sys.block_slice(j), sys.block_slice(k)]):
                return False
    return True


def alien_derivations(C, grading: TorusGrading, sys: LevelOneSystem | None = None,
                      extra_omegas: Sequence = ()) -> list:
    """Dotted alien derivations in the direction of ``C``.

    ``extra_omegas`` are Stokes values inserted with a zero Stokes part; they
    must not change any component.
    """
    if isinstance(C, StokesMatrix):
        sys = C.sys if sys is None else sys
        ts = C.theta_star
    else:
        ts = mpmath.mpf(0)
    plus = delta_plus_split(C, sys)
    n = sys.n
    N: dict = {}
    plus_by_weight: dict = {}
    omega_of: dict = {}
    for omega, m in plus:
        w = grading.weight_of_value(omega)
        N[w] = N[w] + m if w in N else m
        plus_by_weight[w] = N[w]
        omega_of[w] = omega
    for omega in extra_omegas:
        w = grading.weight_of_value(omega)
        if w not in N:
            zero = next(iter(N.values())) * 0 if N else np.full((n, n), mpmath.mpc(0), dtype=object)
            N[w] = zero
            omega_of[w] = hp(omega)
            plus_by_weight[w] = zero
    L = graded_log(N, n)
    allowed = stokes_values(sys).omegas(ts) if sys is not None else ()
    out = []
    for w, m in L.items():
        omega = omega_of.get(w, grading.value_of(w))
        if not any(abs(omega - a) <= tolerance(0.5) * max(1, abs(a)) for a in allowed):
            raise StrayMonomialError(f"component at weight {w} has no Stokes value in the direction")
        if not _omega_pattern_ok(sys, omega, m):
            raise StrayMonomialError(f"component at {mpmath.nstr(omega, 10)} breaks the block pattern")
        p = plus_by_weight.get(w)
        if p is None:
            p = m * 0
        out.append(AlienComponent(omega, w, m, p, ts, _omega_label(omega)))
    out.sort(key=lambda c: (abs(c.omega), mpmath.arg(c.omega)))
    return out


def reconstruct_plus(components: Sequence[AlienComponent], n: int) -> dict:
    """Graded ``exp(sum Delta_omega mu^m) - I``; equals the graded Stokes
    parts ``D_omega^+`` plus their products at composite weights."""
    L = {c.weight: c.matrix for c in components}
    return graded_exp(L, n)


def _omega_label(omega) -> str:
    omega = mpmath.chop(hp(omega), tolerance(0.5) * max(1, abs(hp(omega))))
    re, im = mpmath.re(omega), mpmath.im(omega)

    # integers and square roots of integers print in closed form
    def nice(v):
        if v == 0:
            return "0"
        if abs(v - mpmath.nint(v)) < tolerance(0.5):
            return str(int(mpmath.nint(v)))
        r = v ** 2
        if abs(r - mpmath.nint(r)) < tolerance(0.5):
            s = sympy.sqrt(sympy.Integer(int(mpmath.nint(r))))
            return str(s if v > 0 else -s)
        return mpmath.nstr(v, 20)
    if im == 0:
        return nice(re)
    if re == 0:
        return f"{nice(im)}*I"
    return f"{nice(re)} + {nice(im)}*I"


# ---------------------------------------------------------------- bridge equation

def _lam_expr(sys, j):
    b = sys.blocks[j]
    if b.lam_label:
        try:
            return sympy.sympify(b.lam_label, locals={"lam": sympy.Symbol("lam"), "mu": sympy.Symbol("mu")})
        except (sympy.SympifyError, TypeError):
            return sympy.Symbol(b.lam_label)
    v = hp(b.lam)
    re, im = mpmath.re(v), mpmath.im(v)

    def rat(t):
        if abs(t - mpmath.nint(t)) < tolerance(0.5):
            return sympy.Integer(int(mpmath.nint(t)))
        return sympy.nsimplify(mpmath.nstr(t, 30), rational=True)
    return rat(re) + sympy.I * rat(im)


def _fmt_entry(v) -> str:
    if isinstance(v, sympy.Basic):
        return str(sympy.expand(v))
    if isinstance(v, (mpmath.mpc, mpmath.mpf)):
        return mpmath.nstr(v, 20)
    return str(v)


@dataclass
class BridgeTerm:
    row_block: int          # j, 1-based
    exponent: str           # lam_j - lam_k
    log_terms: list         # per row l of block j, per column r of block k: [(power, coeff)]


@dataclass
class BridgeRelation:
    omega: mpmath.mpc
    label: str
    column_block: int       # k, 1-based
    terms: list = field(default_factory=list)

    def render(self) -> str:
        parts = []
        for t in self.terms:
            entries = []
            for l, row in enumerate(t.log_terms):
                for r, poly in enumerate(row):
                    if not poly:
                        continue
                    s = " + ".join(_fmt_poly_term(c, p) for p, c in poly)
                    entries.append(f"[{l + 1},{r + 1}]: {s}")
            expo = "" if t.exponent == "0" else f" x^({t.exponent})"
            parts.append(f"F^{t.row_block}{expo} {{ " + "; ".join(entries) + " }")
        return f"Delta_{{{self.label}}}(F^{self.column_block}) = " + " + ".join(parts)


def _fmt_poly_term(c, p):
    s = _fmt_entry(c)
    if p == 0:
        return s
    lg = "ln(x)" if p == 1 else f"ln(x)^{p}"
    return f"({s})*{lg}"


def bridge_report(components: Sequence[AlienComponent], sys: LevelOneSystem) -> list:
    """``Delta_omega(F^k) = sum_j F^j x^(lam_j - lam_k) x^J_j D^{jk} x^-J_k``
    for every component and column block with a nonzero entry.

    The conjugation by ``x^J`` is expanded into powers of ``ln x``: the entry
    ``(l, r)`` carries ``sum_{a, b} ln^(a+b) x / (a! b!) (-1)^b D[l+a, r-b]``.
    """
    out = []
    for comp in components:
        for k in range(sys.J):
            rel = BridgeRelation(comp.omega, comp.label, k + 1)
            for j in range(sys.J):
                blk = comp.matrix[sys.block_slice(j), sys.block_slice(k)]
                if _mat_zero(blk):
                    continue
                nj, nk = sys.blocks[j].size, sys.blocks[k].size
                rows = []
                for l in range(nj):
                    row = []
                    for r in range(nk):
                        poly: dict = {}
                        for a in range(nj - l):
                            for b in range(r + 1):
                                v = blk[l + a, r - b]
                                if _is_zero(v):
                                    continue
                                w = v * (-1) ** b / (sympy.factorial(a) * sympy.factorial(b)) \
                                    if isinstance(v, sympy.Basic) else \
                                    v * (-1) ** b / (int(mpmath.factorial(a)) * int(mpmath.factorial(b)))
                                p = a + b
                                poly[p] = poly[p] + w if p in poly else w
                        row.append(sorted((p, _clean(c)) for p, c in poly.items() if not _is_zero(c)))
                    rows.append(row)
                expo = sympy.factor(_lam_expr(sys, j) - _lam_expr(sys, k))
                rel.terms.append(BridgeTerm(j + 1, str(expo), rows))
            if rel.terms:
                out.append(rel)
    return out
