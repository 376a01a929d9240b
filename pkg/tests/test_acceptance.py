"""Acceptance suite: one PASS/FAIL line per criterion, printed in the pytest summary."""
import mpmath
import pytest

from levelone import acceptance

PI = mpmath.pi
GAMMA = mpmath.euler
LINES = []  # read by the terminal summary hook in conftest


@pytest.fixture(scope="module")
def results():
    out = acceptance.run_all(256, echo=LINES.append)
    return {r.number: r for r in out}


def test_oracles_frozen():
    # guard against edits to the closed forms the criteria compare against
    with mpmath.workdps(40):
        k = acceptance.k_oracle()
        assert abs(k[(1, 0)] - mpmath.mpc("-1.934802200544679309417245499938", "6.283185307179586476925286766559")) < 1e-28
        c = acceptance.c_oracle()
        assert abs(c[(2, 0)] - 2j * PI * (2 - GAMMA)) < 1e-35
        assert abs(c[(1, 0)].imag - mpmath.mpf("7.475046489695004261673594164503")) < 1e-28
        kap = acceptance.kappa_oracle()
        assert kap[0] == 2j * PI and abs(kap[1] - (2 * PI ** 2 - 2j * PI * GAMMA)) < 1e-35


@pytest.mark.parametrize("number", range(1, 9))
def test_criterion(results, number):
    r = results[number]
    assert r.passed, r.line()
