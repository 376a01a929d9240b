import mpmath
import pytest

from levelone.core_algebra import zeros
from levelone.system_model import (
    JordanBlockSpec,
    LevelOneSystem,
    SystemSpecError,
    normalize_block,
    pairs_for,
    stokes_values,
    validate_prepared,
)

from conftest import resonant4x4

PI = mpmath.pi


def near(u, v, tol=1e-50):
    return abs(u - v) < tol


def as_set(values):
    vals = [mpmath.chop(mpmath.mpc(v), 1e-40) for v in values]
    return sorted((mpmath.nstr(mpmath.re(v), 20), mpmath.nstr(mpmath.im(v), 20)) for v in vals)


class TestValidate:
    def test_resonant_example_passes(self, sys4):
        assert validate_prepared(sys4).ok

    def test_first_block_lambda(self):
        base = resonant4x4()
        blocks = (JordanBlockSpec(0, "0.5", 1), base.blocks[1])
        d = validate_prepared(LevelOneSystem(blocks, base.B))
        assert "first_block_normalized" in d.codes()

    def test_all_equal_a(self):
        blocks = (JordanBlockSpec(0, 0, 1), JordanBlockSpec(0, "0.25", 2))
        d = validate_prepared(LevelOneSystem(blocks))
        assert d.codes() == ["single_level"]

    def test_lambda_range(self):
        blocks = (JordanBlockSpec(0, 0, 1), JordanBlockSpec(1, "1.2", 1))
        assert "monodromy_exponent_range" in validate_prepared(LevelOneSystem(blocks)).codes()

    def test_resonant_B1(self):
        B1 = zeros(3)
        B1[1, 2] = mpmath.mpc(1)
        blocks = (JordanBlockSpec(0, 0, 1), JordanBlockSpec(1, 0, 1), JordanBlockSpec(1, "0.5", 1))
        assert validate_prepared(LevelOneSystem(blocks, (B1,))).codes() == ["resonant_B1_block"]

    def test_shape_check(self):
        with pytest.raises(SystemSpecError):
            LevelOneSystem((JordanBlockSpec(0, 0, 2),), (zeros(3),))


class TestNormalize:
    def test_first_block_is_identity(self, sys4):
        out = normalize_block(sys4, 1)
        assert [b.a for b in out.blocks] == [b.a for b in sys4.blocks]
        assert out.lam_shifts == (0, 0)
        assert all((x == y).all() for x, y in zip(out.B, sys4.B))

    def test_second_block_flips_directions(self, sys4):
        out = normalize_block(sys4, 2)
        assert [b.a for b in out.blocks] == [0, -1]
        assert [b.size for b in out.blocks] == [3, 1]
        assert out.perm == (1, 0)
        dirs = stokes_values(out).direction_list()
        assert dirs == stokes_values(sys4).direction_list()
        assert list(stokes_values(out).omegas(0)) == [1]

    def test_hypergeometric_shift_by_12(self, sys13):
        out = normalize_block(sys13, 2)
        expected = [sys13.blocks[1].a - 12] + [b.a - 12 for j, b in enumerate(sys13.blocks) if j != 1]
        assert all(near(b.a, e) for b, e in zip(out.blocks, expected))

    def test_lambda_shift_recorded(self):
        blocks = (JordanBlockSpec(0, 0, 1), JordanBlockSpec(1, "0.7", 1), JordanBlockSpec(2, "0.2", 1))
        out = normalize_block(LevelOneSystem(blocks), 2)
        lams = [b.lam for b in out.blocks]
        assert near(lams[1], mpmath.mpf("0.3")) and out.lam_shifts[1] == -1
        assert near(lams[2], mpmath.mpf("0.5")) and out.lam_shifts[2] == -1

    @pytest.mark.parametrize("k", [1, 2])
    def test_invariants(self, sys4, k):
        out = normalize_block(sys4, k)
        assert validate_prepared(out).ok
        assert as_set(stokes_values(out).BoldOmega) == as_set(stokes_values(sys4).BoldOmega)

    def test_bad_index(self, sys4):
        with pytest.raises(SystemSpecError):
            normalize_block(sys4, 3)


class TestStokesValues:
    def test_resonant(self, sys4):
        sv = stokes_values(sys4)
        assert as_set(sv.Omega) == as_set([0, 1])
        assert as_set(sv.BoldOmega) == as_set([1, -1])
        assert len(sv.direction_list()) == 2
        assert sv.omegas(0) == (1,) and sv.omegas(PI) == (-1,)

    def test_conjugate_pair(self):
        blocks = (JordanBlockSpec(0, 0, 1), JordanBlockSpec(1j, 0, 1))
        sv = stokes_values(LevelOneSystem(blocks))
        assert as_set(sv.BoldOmega) == as_set([1j, -1j])
        assert [near(t, s) for t, s in zip(sv.direction_list(), [-PI / 2, PI / 2])] == [True, True]

    def test_hypergeometric_direction_zero(self, sys13):
        om = stokes_values(sys13).omegas(0)
        assert len(om) == 3
        assert all(near(u, v, 1e-40) for u, v in zip(om, [12, 12 * mpmath.sqrt(3), 24]))

    def test_opposite_directions_are_negatives(self, sys13):
        sv = stokes_values(sys13)
        for t in sv.direction_list():
            mirror = sv.omegas(t + PI if t <= 0 else t - PI)
            assert as_set([-w for w in sv.omegas(t)]) == as_set(mirror)

    def test_hypergeometric_pairs(self, sys13):
        got = sorted((j + 1, k + 1) for j, k in pairs_for(sys13, 12))
        assert got == [(1, 8), (2, 1), (4, 6), (12, 10)]
        got = sorted((j + 1, k + 1) for j, k in pairs_for(sys13, 12 * mpmath.sqrt(3)))
        assert got == [(3, 7), (13, 9)]
        assert pairs_for(sys13, 24) == [(1, 7)]
