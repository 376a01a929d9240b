import sys

import mpmath
import pytest

from levelone.core_algebra import zeros
from levelone.system_model import JordanBlockSpec, LevelOneSystem


def resonant4x4() -> LevelOneSystem:
    B2 = zeros(4)
    for i in (1, 2, 3):
        B2[i, 0] = mpmath.mpc(1)
    blocks = (JordanBlockSpec(0, 0, 1), JordanBlockSpec(1, 0, 3))
    return LevelOneSystem(blocks, (zeros(4), B2), name="resonant4x4")


def euler_scalar() -> LevelOneSystem:
    """x^2 y' = y + x^2 embedded as a 2x2 system (first column)."""
    B2 = zeros(2)
    B2[1, 0] = mpmath.mpc(1)
    blocks = (JordanBlockSpec(0, 0, 1), JordanBlockSpec(1, 0, 1))
    return LevelOneSystem(blocks, (zeros(2), B2), name="euler")


def twelve_zeta(k):
    return 12 * mpmath.expjpi(mpmath.mpf(k) / 6)


def hypergeom13() -> LevelOneSystem:
    blocks = [JordanBlockSpec(0, 0, 1, "q1", "12*mu")]
    for j in range(2, 14):
        blocks.append(JordanBlockSpec(twelve_zeta(j - 2), 0, 1, f"q{j}", "-12*lam"))
    return LevelOneSystem(tuple(blocks), (), structural=True, name="hypergeom13")


@pytest.fixture
def sys4():
    return resonant4x4()


@pytest.fixture
def sys13():
    return hypergeom13()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
