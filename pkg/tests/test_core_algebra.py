import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from mpmath import mp
from sympy.polys.domains import QQ_I

from levelone.core_algebra import (
    NilpotencyError,
    NilpotentMatrix,
    SeriesError,
    TruncatedSeries,
    borel_coeffs,
    hp,
    identity,
    kappa,
    max_abs,
    nilpotent_exp,
    nilpotent_log,
    series_arith,
    tolerance,
    zeros,
)

PI = mpmath.pi
EULER = mpmath.euler


def close(a, b, tol=1e-60):
    return abs(hp(a) - hp(b)) <= tol * max(1, abs(hp(b)))


class TestSeriesArith:
    def test_difference_of_squares(self):
        a = TruncatedSeries([1, 1, 0, 0])
        b = TruncatedSeries([1, -1, 0, 0])
        assert series_arith(a, b, "mul").coeffs == TruncatedSeries([1, 0, -1, 0]).coeffs

    def test_multiplicative_identity(self):
        a = TruncatedSeries([3, "0.5", 2, 7])
        one = TruncatedSeries.constant(1, 3)
        assert series_arith(a, one, "mul") == a

    def test_geometric_square(self):
        g = TruncatedSeries([1] * 6)
        sq = series_arith(g, g, "mul")
        assert [int(mpmath.re(c)) for c in sq.coeffs] == [1, 2, 3, 4, 5, 6]

    def test_truncates_to_min_order(self):
        a = TruncatedSeries([1, 2, 3])
        b = TruncatedSeries([1, 1])
        assert series_arith(a, b, "add").order == 1
        assert series_arith(a, b, "mul").order == 1

    def test_variable_mismatch(self):
        with pytest.raises(SeriesError):
            series_arith(TruncatedSeries([1], "x"), TruncatedSeries([1], "xi"), "add")

    def test_unknown_op(self):
        with pytest.raises(SeriesError):
            series_arith(TruncatedSeries([1]), TruncatedSeries([1]), "div")

    def test_shift_center_matches_evaluation(self):
        a = TruncatedSeries([1, -2, 3, "0.25", 5])
        h = mpmath.mpc("0.3", "-0.7")
        shifted = a.shift_center(h)
        z = mpmath.mpc("0.11", "0.2")
        assert close(shifted(z), a(h + z))

    def test_exp_and_inverse(self):
        s = TruncatedSeries([0, 1, 0, 0, 0, 0])
        e = s.exp()
        for m in range(6):
            assert close(e[m], 1 / mpmath.factorial(m))
        inv = TruncatedSeries([1, -1, 0, 0]).inverse()
        assert all(close(c, 1) for c in inv.coeffs)


small = st.integers(min_value=-50, max_value=50)
series3 = st.lists(small, min_size=5, max_size=5)


@settings(max_examples=30, deadline=None)
@given(series3, series3, series3)
def test_ring_laws(a, b, c):
    A, B, C = (TruncatedSeries(v) for v in (a, b, c))
    assert ((A * B) * C).coeffs == (A * (B * C)).coeffs
    assert (A * B).coeffs == (B * A).coeffs


@settings(max_examples=30, deadline=None)
@given(series3, series3)
def test_borel_linear(a, b):
    A = TruncatedSeries([0] + a)
    B = TruncatedSeries([0] + b)
    lhs = borel_coeffs(A + B)
    rhs = borel_coeffs(A) + borel_coeffs(B)
    assert all(close(u, v) for u, v in zip(lhs.coeffs, rhs.coeffs))


class TestBorel:
    def test_factorial_series_becomes_geometric(self):
        N = 20
        coeffs = [0, 0] + [-mpmath.factorial(m - 1) for m in range(2, N + 1)]
        out = borel_coeffs(TruncatedSeries(coeffs))
        assert out.var == "xi"
        assert out[0] == 0
        assert all(out[m] == -1 for m in range(1, N))

    def test_x_and_x_cubed(self):
        assert borel_coeffs(TruncatedSeries([0, 1])).coeffs == (mpmath.mpc(1),)
        out = borel_coeffs(TruncatedSeries([0, 0, 0, 1]))
        assert out.coeffs[2] == mpmath.mpf(1) / 2

    def test_rejects_constant_term(self):
        with pytest.raises(SeriesError):
            borel_coeffs(TruncatedSeries([1, 1]))


class TestKappa:
    def test_closed_forms(self):
        assert close(kappa(0, 0), 2j * PI)
        assert close(kappa(1, 0), 2 * PI**2 - 2j * PI * EULER)
        assert close(kappa(2, 0), -4 * PI**2 * EULER - 7j * PI**3 / 3 + 2j * PI * EULER**2)

    @pytest.mark.parametrize("lam", ["0.3", "-2.5", "3", mpmath.mpc("0.4", "0.7")])
    def test_against_finite_differences(self, lam):
        lam = hp(lam)

        def k0(t):
            return 2j * PI * mpmath.exp(-1j * PI * t) * mpmath.rgamma(1 - t)

        for p in (1, 2, 3):
            ref = mpmath.diff(k0, lam, p)
            assert abs(kappa(p, lam) - ref) <= 1e-8 * max(1, abs(ref))

    def test_kappa0_is_hankel_integral(self):
        # kappa_0(t) = Gamma(t) (1 - exp(-2 pi i t))
        t = mpmath.mpc("0.35", "0.1")
        assert close(kappa(0, t), mpmath.gamma(t) * (1 - mpmath.exp(-2j * PI * t)))


def test_var_of_power_numeric():
    lam = mpmath.mpc("0.37", "0.11")
    xi = mpmath.mpf("0.8")
    on_sheet0 = mpmath.exp(lam * mpmath.log(xi))
    on_sheet1 = mpmath.exp(lam * (mpmath.log(xi) - 2j * PI))
    assert close(on_sheet0 - on_sheet1, (1 - mpmath.exp(-2j * PI * lam)) * on_sheet0)


class TestNilpotent:
    def test_log_identity(self):
        L = nilpotent_log(identity(3))
        assert max_abs(L.entries) == 0

    def test_square_zero(self):
        N = zeros(3)
        N[0, 2] = hp(5)
        N[0, 1] = hp(0)
        M = identity(3) + N
        assert nilpotent_log(M).entries[0, 2] == 5

    def test_average_formula_exact(self):
        c, d, e = QQ_I(2, 1), QQ_I(-3, 5), QQ_I(7, 0)
        M = identity(13, QQ_I(1, 0), QQ_I(0, 0))
        M[1, 0] = c
        M[0, 7] = d
        M[1, 7] = e
        L = nilpotent_log(M).entries
        assert L[1, 7] == e - c * d / 2
        assert L[1, 0] == c and L[0, 7] == d

    def test_not_nilpotent(self):
        with pytest.raises(NilpotencyError):
            nilpotent_log(identity(2) * 2)

    def test_index_is_certified(self):
        N = zeros(4)
        N[0, 1] = N[1, 2] = N[2, 3] = hp(1)
        assert NilpotentMatrix(N).index == 4

    @settings(max_examples=20, deadline=None)
    @given(st.integers(min_value=1, max_value=16), st.integers(min_value=0, max_value=10**6))
    def test_exp_log_round_trip(self, n, seed):
        rng = np.random.default_rng(seed)
        N = zeros(n)
        for i in range(n):
            for j in range(i + 1, n):
                N[i, j] = mpmath.mpc(rng.normal(), rng.normal())
        M = identity(n) + N
        back = nilpotent_exp(nilpotent_log(M))
        scale = max(1, max_abs(M))
        assert max_abs(back - M) <= mpmath.ldexp(1, -(mp.prec - 16)) * scale ** n


def test_tolerance_scales_with_precision():
    assert tolerance(0.5) == mpmath.ldexp(1, -(mp.prec // 2))
