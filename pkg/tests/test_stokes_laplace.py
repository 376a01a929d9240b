import mpmath
import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from levelone.core_algebra import kappa, max_abs, zeros
from levelone.formal_solution import ALL, solve_homological
from levelone.system_model import JordanBlockSpec, LevelOneSystem
from levelone.borel_plane.majors import connection_matrix
from levelone.stokes_laplace import (
    MINUS,
    PLUS,
    PatternError,
    StokesMatrix,
    LateralSummer,
    connection_to_stokes,
    delta_plus_split,
    hankel_integral,
    lateral_sum,
    stokes_from_jumps,
    stokes_to_connection,
)

from conftest import euler_scalar, resonant4x4

PI = mpmath.pi
GAMMA = mpmath.euler

# frozen closed forms for the resonant 4x4 system at theta = 0
C_ORACLE = {
    (1, 0): (6 * PI - PI ** 3 / 6 - 4 * PI * GAMMA + PI * GAMMA ** 2) * 1j,
    (2, 0): 2 * PI * (2 - GAMMA) * 1j,
    (3, 0): 2j * PI,
}
K_ORACLE = {
    (1, 0): (6 - PI ** 2 + 4j * PI) / 2,
    (2, 0): 2 + 1j * PI,
    (3, 0): mpmath.mpc(1),
}


def close(a, b, tol=1e-30):
    return abs(a - b) <= tol * max(1, abs(b))


def K4():
    K = zeros(4)
    for key, v in K_ORACLE.items():
        K[key] = v
    return K


@pytest.fixture(scope="module")
def series4():
    return solve_homological(resonant4x4(), 40, ALL)


@pytest.fixture(scope="module")
def jumps4(series4):
    return stokes_from_jumps(resonant4x4(), 0, series=series4)


class TestLateralSums:
    def test_f4_jump(self, series4):
        summer = LateralSummer(series4, 0, x_max="0.11")
        x = mpmath.mpf("0.1")
        d = summer.block(0, PLUS, x).value[3, 0] - summer.block(0, MINUS, x).value[3, 0]
        assert close(d, 2j * PI * mpmath.exp(-10), 1e-25)

    def test_opposite_direction_sides_agree(self, series4):
        summer = LateralSummer(series4, PI, x_max="0.11")
        x = mpmath.mpf("-0.1")
        a = summer.block(0, PLUS, x).value[3, 0]
        b = summer.block(0, MINUS, x).value[3, 0]
        # f4 has Borel transform xi / (xi - 1); integrate along the negative axis
        ref = -mpmath.quad(lambda t: mpmath.exp(t / x) * t / (t + 1), [0, 1, mpmath.inf])
        assert close(a, ref, 1e-25) and close(b, ref, 1e-25)

    def test_zero_series_gives_identity_column(self):
        sys = resonant4x4()
        F = solve_homological(sys, 20, ALL)
        s = lateral_sum(sys, F, 0, PLUS, "0.1", k=1)
        assert s.value[1, 0] == 1 and all(s.value[i, 0] == 0 for i in (0, 2, 3))

    def test_bad_side(self, series4):
        with pytest.raises(ValueError):
            lateral_sum(resonant4x4(), series4, 0, "left", "0.1")


class TestStokesMatrices:
    def test_boxed_values_from_jumps(self, jumps4):
        for key, v in C_ORACLE.items():
            assert close(jumps4.C[key], v), key
        assert jumps4.diagnostics["off_pattern"] < 1e-30
        jumps4.check_pattern(tol=1e-30)

    def test_boxed_values_from_K(self):
        C = connection_to_stokes(K4(), resonant4x4())
        for key, v in C_ORACLE.items():
            assert close(C.C[key], v, 1e-60)

    def test_routes_agree(self, jumps4, series4):
        cm = connection_matrix(resonant4x4(), 0, series=series4)
        C = connection_to_stokes(cm, resonant4x4())
        assert max_abs(C.C - jumps4.C) < 1e-30

    def test_opposite_direction_is_trivial(self, series4):
        C = stokes_from_jumps(resonant4x4(), PI, series=series4)
        assert all(v == 0 for v in C.C.flat)

    def test_scalar_embedding(self):
        sys = euler_scalar()
        C = stokes_from_jumps(sys, 0)
        assert close(C.C[1, 0], 2j * PI)

    def test_pattern_violation(self):
        sys = resonant4x4()
        C = zeros(4)
        C[0, 1] = mpmath.mpc(1)  # a_1 - a_2 = -1 is not in direction 0
        with pytest.raises(PatternError):
            StokesMatrix(mpmath.mpf(0), C, sys).check_pattern()

    def test_nilpotent(self, jumps4):
        assert jumps4.is_nilpotent()
        M = jumps4.matrix
        assert M[0, 0] == 1 and close(M[1, 0], jumps4.C[1, 0], 1e-70)


class TestRoundTrip:
    def test_fixed(self):
        sys = resonant4x4()
        K = K4()
        back = stokes_to_connection(connection_to_stokes(K, sys), sys).total
        assert max_abs(back - K) < 1e-70

    @settings(max_examples=50, deadline=None, suppress_health_check=[HealthCheck.too_slow])
    @given(st.data())
    def test_random_systems(self, data):
        sizes = data.draw(st.lists(st.integers(1, 3), min_size=2, max_size=4))
        if sum(sizes) > 8:
            sizes = [1, 3, 1]
        n_a = data.draw(st.integers(2, len(sizes)))
        a_vals = [mpmath.mpc(t, t % 2) for t in range(n_a)]
        lams = [mpmath.mpf(0), mpmath.mpf("0.25"), mpmath.mpc("0.5", "0.3"), mpmath.mpf("0.9")]
        blocks = []
        for idx, s in enumerate(sizes):
            a = a_vals[idx % n_a]
            lam = lams[data.draw(st.integers(0, 3))]
            blocks.append(JordanBlockSpec(a, lam, s))
        sys = LevelOneSystem(tuple(blocks), (), structural=True)
        K = zeros(sys.n)
        for j in range(sys.J):
            for k in range(sys.J):
                if sys.same_a(j, k):
                    continue
                for i in range(sys.block_slice(j).start, sys.block_slice(j).stop):
                    for c in range(sys.block_slice(k).start, sys.block_slice(k).stop):
                        re = data.draw(st.integers(-9, 9))
                        im = data.draw(st.integers(-9, 9))
                        K[i, c] = mpmath.mpc(re, im) / 7
        C = connection_to_stokes(K, sys)
        back = stokes_to_connection(C, sys).total
        assert max_abs(back - K) < 1e-60


class TestHankel:
    @pytest.mark.parametrize("lam", [0, "0.3", "0.25+0.5j", "-0.6"])
    @pytest.mark.parametrize("p", [0, 1, 2])
    def test_kappa_matches_quadrature(self, lam, p):
        lam = mpmath.mpmathify(complex(lam))
        assert abs(hankel_integral(lam, p) - kappa(p, lam)) < 1e-18

    def test_diagonal_exponents(self):
        # scalar blocks: C = kappa_0(lam_j - lam_k) K
        blocks = (JordanBlockSpec(0, 0, 1), JordanBlockSpec(1, mpmath.mpf("0.3"), 1))
        sys = LevelOneSystem(blocks, (), structural=True)
        K = zeros(2)
        K[1, 0] = mpmath.mpc(2, -1)
        C = connection_to_stokes(K, sys)
        assert abs(C.C[1, 0] - hankel_integral(mpmath.mpf("0.3"), 0) * K[1, 0]) < 1e-18


class TestDeltaSplit:
    def test_sum_is_C(self):
        blocks = (JordanBlockSpec(0, 0, 1), JordanBlockSpec(1, 0, 2), JordanBlockSpec(2, 0, 1))
        sys = LevelOneSystem(blocks, (), structural=True)
        C = zeros(4)
        C[1, 0] = mpmath.mpc(1)
        C[2, 0] = mpmath.mpc(2)
        C[3, 0] = mpmath.mpc(3)
        C[3, 1] = mpmath.mpc(4)
        parts = delta_plus_split(C, sys)
        assert [w for w, _ in parts] == [1, 2]
        total = parts[0][1] + parts[1][1]
        assert all(u == v for u, v in zip(total.flat, C.flat))
        assert parts[0][1][3, 0] == 0 and parts[1][1][3, 0] == 3

    def test_zero_masks_omitted(self):
        assert delta_plus_split(zeros(4), resonant4x4()) == []

    def test_generic_entries(self):
        from sympy.polys.domains import QQ_I
        sys = resonant4x4()
        C = np.full((4, 4), QQ_I(0), dtype=object)
        C[3, 0] = QQ_I(1, 2)
        (w, m), = delta_plus_split(C, sys)
        assert m[3, 0] == QQ_I(1, 2) and m[0, 0] == QQ_I(0)
