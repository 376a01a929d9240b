import math

import mpmath
import pytest

from levelone.core_algebra import zeros
from levelone.formal_solution import (
    ALL,
    ScalarEquation,
    borel_first_block,
    homological_residual,
    solve_homological,
    solve_scalar_equation,
)
from levelone.system_model import JordanBlockSpec, LevelOneSystem

from conftest import euler_scalar, hypergeom13, resonant4x4


@pytest.fixture(scope="module")
def f4x4():
    return solve_homological(resonant4x4(), 40)


def column(series, row):
    return [series.coeffs[m][row, 0] for m in range(series.order + 1)]


class TestResonantExample:
    def test_f4_factorials(self, f4x4):
        c = column(f4x4, 3)
        assert c[0] == 0 and c[1] == 0
        for m in range(2, 41):
            assert c[m] == -math.factorial(m - 1)

    def test_f3_coupled_recurrence(self, f4x4):
        # x^2 f3' - f3 = x^2 + x f4
        c3, c4 = column(f4x4, 2), column(f4x4, 3)
        for m in range(2, 41):
            lhs = (m - 1) * c3[m - 1] - c3[m]
            assert lhs == (1 if m == 2 else 0) + c4[m - 1]

    def test_first_coefficient_is_identity(self, f4x4):
        F0 = f4x4.coeffs[0]
        assert all(F0[i, 0] == (1 if i == 0 else 0) for i in range(4))

    def test_order_one_vanishes_on_equal_a_blocks(self):
        F = solve_homological(resonant4x4(), 6, ALL)
        assert all(F.coeffs[1][i, c] == 0 for i in range(1, 4) for c in range(1, 4))

    def test_residual(self, f4x4):
        assert homological_residual(f4x4) < mpmath.mpf(2) ** (-(mpmath.mp.prec - 32))

    def test_all_columns_residual(self):
        F = solve_homological(resonant4x4(), 20, ALL)
        scale = max(abs(v) for v in F.coeffs[-1].flat)
        assert homological_residual(F) < mpmath.mpf(2) ** (-(mpmath.mp.prec - 32)) * scale

    def test_gevrey_one(self, f4x4):
        ratios = [max(abs(v) for v in f4x4.coeffs[m].flat) / mpmath.factorial(m) ** 1.05
                  for m in range(1, 41)]
        assert max(ratios) < 10

    def test_dense_elimination_agrees(self):
        a = solve_homological(resonant4x4(), 25, ALL)
        b = solve_homological(resonant4x4(), 25, ALL, dense=True)
        for Fa, Fb in zip(a.coeffs, b.coeffs):
            for u, v in zip(Fa.flat, Fb.flat):
                assert abs(u - v) <= 1e-60 * max(1, abs(u))


class TestGeneric:
    def test_zero_B_gives_identity(self):
        blocks = (JordanBlockSpec(0, 0, 1), JordanBlockSpec(2, "0.3", 2))
        F = solve_homological(LevelOneSystem(blocks, (zeros(3), zeros(3))), 10, ALL)
        for m, Fm in enumerate(F.coeffs):
            for i in range(3):
                for c in range(3):
                    assert Fm[i, c] == (1 if (m == 0 and i == c) else 0)

    def test_structural_rejected(self):
        with pytest.raises(ValueError):
            solve_homological(hypergeom13(), 5)

    def test_jordan_block_with_noninteger_lambda(self):
        B1 = zeros(3)
        B1[0, 1] = mpmath.mpc(1)
        B1[2, 0] = mpmath.mpc("0.5")
        B2 = zeros(3)
        B2[1, 2] = mpmath.mpc(1)
        blocks = (JordanBlockSpec(0, 0, 1), JordanBlockSpec(1, "0.4", 2))
        F = solve_homological(LevelOneSystem(blocks, (B1, B2)), 20, ALL)
        scale = max(abs(v) for v in F.coeffs[-1].flat)
        assert homological_residual(F) < 1e-60 * scale


class TestBorel:
    def test_f4_geometric(self, f4x4):
        hat, delta = borel_first_block(f4x4)
        e = hat.entry(3, 0)
        assert e.var == "xi"
        assert e.coeffs[0] == 0
        assert all(e.coeffs[m] == -1 for m in range(1, 40))
        assert delta[0, 0] == 1 and delta[3, 0] == 0

    def test_identity_series(self):
        blocks = (JordanBlockSpec(0, 0, 1), JordanBlockSpec(1, 0, 1))
        F = solve_homological(LevelOneSystem(blocks, (zeros(2),)), 12)
        hat, delta = borel_first_block(F)
        assert all(v == 0 for Fm in hat.coeffs for v in Fm.flat)
        assert delta[0, 0] == 1

    def test_f3_taylor_data(self, f4x4):
        # hat f3 = sum F_m xi^(m-1)/(m-1)!: -xi - xi^2/2 - xi^3/6 + 2 xi^4/24 ...
        hat, _ = borel_first_block(f4x4)
        e = hat.entry(2, 0)
        expect = [0, -1, mpmath.mpf(-1) / 2, mpmath.mpf(-1) / 6, mpmath.mpf(2) / 24, mpmath.mpf(34) / 120]
        assert all(abs(u - v) < 1e-70 for u, v in zip(e.coeffs, expect))


class TestScalarEquation:
    def test_euler(self):
        # x^2 y' - y = x^2  <=>  -y + theta y = x^2
        eq = ScalarEquation(((-1, 1),), (0, 0, 1))
        y = solve_scalar_equation(eq, 40)
        assert y.coeffs[:2] == (0, 0)
        assert all(y.coeffs[m] == -math.factorial(m - 1) for m in range(2, 41))

    def test_matches_system_embedding(self):
        eq = ScalarEquation(((-1, 1),), (0, 0, 1))
        y = solve_scalar_equation(eq, 20)
        F = solve_homological(euler_scalar(), 20)
        assert all(y.coeffs[m] == F.coeffs[m][1, 0] for m in range(21))

    def test_singular_leading_coefficient(self):
        from levelone.formal_solution import SingularStepError
        with pytest.raises(SingularStepError):
            solve_scalar_equation(ScalarEquation(((0, 1),), (1,)), 5)
