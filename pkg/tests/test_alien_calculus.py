from fractions import Fraction

import mpmath
import numpy as np
import pytest
import sympy
from sympy.polys.domains import QQ_I

from levelone.core_algebra import zeros
from levelone.stokes_laplace import StokesMatrix
from levelone.alien_calculus import (
    GradingError,
    StrayMonomialError,
    alien_derivations,
    bridge_report,
    graded_exp,
    graded_log,
    lattice_basis,
    reconstruct_plus,
    system_grading,
    weights_of,
)

from conftest import hypergeom13, twelve_zeta

PI = mpmath.pi

# placeholder Stokes multipliers of the 13-block system, 1-based (row, col) -> (re, im)
D13_ENTRIES = {
    (1, 8): ("3/7", "1"),
    (2, 1): ("-2", "5/3"),
    (4, 6): ("1/2", "0"),
    (12, 10): ("0", "-4"),
    (3, 7): ("7", "2/9"),
    (13, 9): ("-1/5", "-1"),
    (2, 8): ("11/4", "3"),
}


def d13_matrix(kind):
    sys = hypergeom13()
    if kind == "symbolic":
        C = np.full((13, 13), sympy.Integer(0), dtype=object)
        for (r, c) in D13_ENTRIES:
            C[r - 1, c - 1] = sympy.Symbol(f"c{r}_{c}")
    else:
        C = np.full((13, 13), QQ_I(0), dtype=object)
        for (r, c), (re, im) in D13_ENTRIES.items():
            fr, fi = Fraction(re), Fraction(im)
            C[r - 1, c - 1] = QQ_I(sympy.Rational(fr.numerator, fr.denominator),
                                   sympy.Rational(fi.numerator, fi.denominator))
    return sys, StokesMatrix(mpmath.mpf(0), C, sys)


def by_label(comps):
    return {c.label: c for c in comps}


def nonzero(m):
    return {(i + 1, j + 1): m[i, j] for i in range(m.shape[0]) for j in range(m.shape[1])
            if sympy.expand(m[i, j]) != 0 if isinstance(m[i, j], sympy.Basic) or m[i, j]}


class TestLattice:
    def test_d13_weights(self, sys13):
        g = system_grading(sys13)
        assert g.rank == 4
        assert weights_of(sys13, 6, g) == (-1, 0, 1, 0)
        assert weights_of(sys13, 13, g) == (0, 1, 0, -1)
        assert g.weight_of_value(12 * mpmath.sqrt(3)) == (0, 2, 0, -1)

    def test_user_basis(self, sys13):
        basis = [twelve_zeta(r) for r in range(4)]
        g = system_grading(sys13, basis)
        assert g.weights == system_grading(sys13).weights

    def test_dependent_basis_rejected(self):
        with pytest.raises(GradingError):
            lattice_basis([1, 2], basis=[1, 2])

    def test_hermite_refinement(self):
        g = lattice_basis([2, 3])
        assert g.rank == 1 and abs(abs(g.basis[0]) - 1) < 1e-60
        assert [abs(w[0]) for w in g.weights] == [2, 3]

    def test_empty(self):
        g = lattice_basis([0, 0])
        assert g.rank == 0 and g.weights == [(), ()]

    def test_torus_4x4(self, sys4):
        g = system_grading(sys4)
        assert g.weights == [(0,), (1,)]
        lam = sympy.Symbol("lam")
        assert g.torus_matrix(lam) == [1, lam]

    def test_value_not_in_lattice(self, sys4):
        g = system_grading(sys4)
        with pytest.raises(GradingError):
            g.weight_of_value(mpmath.sqrt(2))


class TestGradedAlgebra:
    def test_log_exp_inverse(self):
        N = {(1,): np.array([[0, 0, 0], [2, 0, 0], [0, 3, 0]], dtype=object),
             (2,): np.array([[0, 0, 0], [0, 0, 0], [5, 0, 0]], dtype=object)}
        N = {k: np.vectorize(lambda v: sympy.Integer(v), otypes=[object])(m) for k, m in N.items()}
        back = graded_exp(graded_log(N, 3), 3)
        assert set(back) == set(N)
        for k in N:
            assert all(sympy.expand(a - b) == 0 for a, b in zip(back[k].flat, N[k].flat))


class TestD13:
    def test_symbolic(self):
        sys, S = d13_matrix("symbolic")
        comps = by_label(alien_derivations(S, system_grading(sys)))
        assert set(comps) == {"12", "12*sqrt(3)", "24"}
        c = {k: sympy.Symbol(f"c{k[0]}_{k[1]}") for k in D13_ENTRIES}
        assert nonzero(comps["12"].matrix) == {k: c[k] for k in [(1, 8), (2, 1), (4, 6), (12, 10)]}
        assert nonzero(comps["12*sqrt(3)"].matrix) == {k: c[k] for k in [(3, 7), (13, 9)]}
        (key, val), = nonzero(comps["24"].matrix).items()
        assert key == (2, 8)
        assert sympy.expand(val - (c[(2, 8)] - c[(1, 8)] * c[(2, 1)] / 2)) == 0
        assert comps["24"].weight == (2, 0, 0, 0)

    def test_exact_rationals(self):
        sys, S = d13_matrix("exact")
        comps = by_label(alien_derivations(S, system_grading(sys)))
        C = S.C
        expected = C[1, 7] - C[0, 7] * C[1, 0] / QQ_I(2)
        assert comps["24"].matrix[1, 7] == expected
        assert comps["12"].matrix[1, 0] == C[1, 0]

    def test_reconstruction(self):
        sys, S = d13_matrix("symbolic")
        g = system_grading(sys)
        comps = alien_derivations(S, g)
        rec = reconstruct_plus(comps, 13)
        total = sum((m for m in rec.values()), np.full((13, 13), sympy.Integer(0), dtype=object))
        assert all(sympy.expand(a - b) == 0 for a, b in zip(total.flat, S.C.flat))

    def test_grading_independence(self):
        sys, S = d13_matrix("symbolic")
        b = [twelve_zeta(r) for r in range(4)]
        # unimodular change of basis
        other = [b[0], b[0] + b[1], b[2] - b[1], b[3]]
        a1 = by_label(alien_derivations(S, system_grading(sys)))
        a2 = by_label(alien_derivations(S, system_grading(sys, other)))
        assert set(a1) == set(a2)
        for lab in a1:
            assert all(sympy.expand(u - v) == 0 for u, v in zip(a1[lab].matrix.flat, a2[lab].matrix.flat))

    def test_missing_singularity(self):
        sys, S = d13_matrix("symbolic")
        C = S.C.copy()
        C[2, 6] = C[12, 8] = sympy.Integer(0)
        S2 = StokesMatrix(mpmath.mpf(0), C, sys)
        g = system_grading(sys)
        plain = by_label(alien_derivations(S2, g))
        extra = by_label(alien_derivations(S2, g, extra_omegas=[12 * mpmath.sqrt(3)]))
        assert set(plain) == set(extra) == {"12", "24"}

    def test_stray_monomial(self):
        sys, S = d13_matrix("symbolic")
        C = S.C.copy()
        # a_8 - a_2 = 12 zeta^6 - 12 = -24 is not in direction 0
        C[7, 1] = sympy.Symbol("bad")
        with pytest.raises(StrayMonomialError):
            alien_derivations(StokesMatrix(mpmath.mpf(0), C, sys), system_grading(sys))

    def test_bridge(self):
        sys, S = d13_matrix("symbolic")
        rel = [r.render() for r in bridge_report(alien_derivations(S, system_grading(sys)), sys)]
        assert "Delta_{12}(F^1) = F^2 x^(-12*(lam + mu)) { [1,1]: c2_1 }" in rel
        assert "Delta_{24}(F^8) = F^2 { [1,1]: -c1_8*c2_1/2 + c2_8 }" in rel
        assert len(rel) == 7


class TestFourByFour:
    def test_bridge_logs(self, sys4):
        C = zeros(4)
        C[1, 0], C[2, 0], C[3, 0] = mpmath.mpc(3), mpmath.mpc(2), mpmath.mpc(1)
        S = StokesMatrix(mpmath.mpf(0), C, sys4)
        comps = alien_derivations(S, system_grading(sys4))
        assert len(comps) == 1 and comps[0].label == "1"
        (rel,) = bridge_report(comps, sys4)
        (term,) = rel.terms
        # x^J with J superdiagonal on the size-3 block: row l collects ln^a / a! D[l+a]
        row0 = dict(term.log_terms[0][0])
        assert row0[0] == 3 and row0[1] == 2 and abs(row0[2] - mpmath.mpf("0.5")) < 1e-70
        assert dict(term.log_terms[2][0]) == {0: 1}

    def test_zero_components(self, sys4):
        S = StokesMatrix(mpmath.mpf(0), zeros(4), sys4)
        comps = alien_derivations(S, system_grading(sys4))
        assert comps == [] and bridge_report(comps, sys4) == []
