"""Acceptance criteria as runnable checks.

Each check returns a :class:`CriterionResult`; ``run_all`` runs them in order.
The oracles are closed forms; nothing here is derived from the code under
test.
"""
from __future__ import annotations

import random
import time
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources

import mpmath
import numpy as np
import sympy
from sympy.polys.domains import QQ_I

from .alien_calculus import alien_derivations, reconstruct_plus, system_grading
from .borel_plane.continuation import equation_borel_problem
from .borel_plane.germs import LogPolynomialGerm, variation, variation_power
from .borel_plane.majors import connection_matrix
from .borel_plane.pade import pade_continue
from .core_algebra import kappa, max_abs, working_precision, zeros
from .formal_solution import ALL, ScalarEquation, solve_homological, solve_scalar_equation
from .stokes_laplace import StokesMatrix, connection_to_stokes, delta_plus_split, stokes_from_jumps, stokes_to_connection
from .system_model import JordanBlockSpec, LevelOneSystem


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} [{self.number}] {self.title}: {self.detail}"


def _e(v) -> str:
    return mpmath.nstr(mpmath.mpf(v), 3)


# ---------------------------------------------------------------- oracles

def _pi():
    return mpmath.pi


def k_oracle():
    pi = _pi()
    return {(1, 0): (6 - pi ** 2 + 4j * pi) / 2, (2, 0): 2 + 1j * pi, (3, 0): mpmath.mpc(1)}


def c_oracle():
    pi, g = _pi(), mpmath.euler
    return {
        (1, 0): (6 * pi - pi ** 3 / 6 - 4 * pi * g + pi * g ** 2) * 1j,
        (2, 0): 2 * pi * (2 - g) * 1j,
        (3, 0): 2j * pi,
    }


def kappa_oracle():
    pi, g = _pi(), mpmath.euler
    return [2j * pi, 2 * pi ** 2 - 2j * pi * g, -4 * pi ** 2 * g - 7j * pi ** 3 / 3 + 2j * pi * g ** 2]


D13_SUPPORT = {
    "12": {(1, 8), (2, 1), (4, 6), (12, 10)},
    "12*sqrt(3)": {(3, 7), (13, 9)},
    "24": {(2, 8)},
}

D13_WEIGHTS = [
    (0, 0, 0, 0), (1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1), (-1, 0, 1, 0), (0, -1, 0, 1),
    (-1, 0, 0, 0), (0, -1, 0, 0), (0, 0, -1, 0), (0, 0, 0, -1), (1, 0, -1, 0), (0, 1, 0, -1),
]


def resonant4x4() -> LevelOneSystem:
    B2 = zeros(4)
    for i in (1, 2, 3):
        B2[i, 0] = mpmath.mpc(1)
    blocks = (JordanBlockSpec(0, 0, 1), JordanBlockSpec(1, 0, 3))
    return LevelOneSystem(blocks, (zeros(4), B2), name="resonant4x4")


class _Shared:
    """Computations reused by several criteria."""

    def __init__(self):
        self._series = None
        self._cm = None

    def series(self):
        if self._series is None:
            self._series = solve_homological(resonant4x4(), 40, ALL)
        return self._series

    def cm(self):
        if self._cm is None:
            self._cm = connection_matrix(resonant4x4(), 0, 40, series=self.series())
        return self._cm


# ---------------------------------------------------------------- criteria

def criterion_1(shared: _Shared) -> CriterionResult:
    t0 = time.perf_counter()
    cm = shared.cm()
    elapsed = time.perf_counter() - t0
    K = cm.total
    err = max(abs(K[k] - v) for k, v in k_oracle().items())
    ok = err <= 1e-8 and elapsed < 30
    return CriterionResult(1, "4x4 connection constants (Borel route)", ok,
                           f"max error {_e(err)}, {elapsed:.1f} s")


def criterion_2(shared: _Shared) -> CriterionResult:
    sys = resonant4x4()
    K = zeros(4)
    for k, v in k_oracle().items():
        K[k] = v
    exact = connection_to_stokes(K, sys).C
    err_exact = max(abs(exact[k] - v) / abs(v) for k, v in c_oracle().items())
    computed = connection_to_stokes(shared.cm(), sys).C
    err_comp = max(abs(computed[k] - v) for k, v in c_oracle().items())
    ok = err_exact <= 1e-10 and err_comp <= 1e-8
    return CriterionResult(2, "4x4 Stokes multipliers from K", ok,
                           f"from exact K {_e(err_exact)}, end-to-end {_e(err_comp)}")


def criterion_3(shared: _Shared) -> CriterionResult:
    sys = resonant4x4()
    C = stokes_from_jumps(sys, 0, 40, series=shared.series()).C
    rel = max(abs(C[k] - v) / abs(v) for k, v in c_oracle().items())
    Cpi = stokes_from_jumps(sys, mpmath.pi, 40, series=shared.series()).C
    norm_pi = max_abs(Cpi)
    ok = rel <= 1e-6 and norm_pi <= 1e-8
    return CriterionResult(3, "route agreement (lateral sums)", ok,
                           f"relative {_e(rel)}, |C_pi| {_e(norm_pi)}")


def criterion_4(shared=None) -> CriterionResult:
    errs = [abs(kappa(p, 0) - v) / abs(v) for p, v in enumerate(kappa_oracle())]
    return CriterionResult(4, "kappa table", max(errs) <= 1e-15, f"max relative {_e(max(errs))}")


def _random_case(rng: random.Random, with_jordan: bool):
    sizes = [rng.randint(1, 2) for _ in range(rng.randint(2, 4))]
    if with_jordan:
        sizes[rng.randrange(len(sizes))] = 3
    while sum(sizes) > 8:
        sizes.pop()
    n_a = rng.randint(2, len(sizes))
    blocks = []
    for idx, s in enumerate(sizes):
        a = mpmath.mpc(idx % n_a, rng.randint(-1, 1) * (idx % n_a))
        lam = mpmath.mpf(0) if idx == 0 or rng.random() < 0.3 else mpmath.mpf(rng.randint(0, 99)) / 100
        blocks.append(JordanBlockSpec(a, lam, s))
    sys = LevelOneSystem(tuple(blocks), (), structural=True)
    K = zeros(sys.n)
    for j in range(sys.J):
        for k in range(sys.J):
            if sys.same_a(j, k):
                continue
            for i in range(sys.block_slice(j).start, sys.block_slice(j).stop):
                for c in range(sys.block_slice(k).start, sys.block_slice(k).stop):
                    K[i, c] = mpmath.mpc(rng.uniform(-3, 3), rng.uniform(-3, 3))
    return sys, K


def criterion_5(shared=None, trials: int = 50, seed: int = 20240601) -> CriterionResult:
    rng = random.Random(seed)
    worst = mpmath.mpf(0)
    jordan = False
    for t in range(trials):
        sys, K = _random_case(rng, with_jordan=(t % 5 == 0))
        jordan = jordan or any(b.size == 3 for b in sys.blocks)
        back = stokes_to_connection(connection_to_stokes(K, sys), sys).total
        worst = max(worst, max_abs(back - K))
    return CriterionResult(5, "K <-> C round trip", worst <= 1e-10 and jordan,
                           f"{trials} random systems, max error {_e(worst)}")


def _d13_parsed():
    from .cli.io import parse_input
    with resources.as_file(resources.files("levelone") / "data" / "hypergeom13.json") as path:
        return parse_input(str(path))


def criterion_6(shared=None, seed: int = 7) -> CriterionResult:
    t0 = time.perf_counter()
    parsed = _d13_parsed()
    sys = parsed.system
    rng = random.Random(seed)
    C = np.full((13, 13), QQ_I(0), dtype=object)
    for o in parsed.overrides:
        re = Fraction(rng.choice([-1, 1]) * rng.randint(1, 9), rng.randint(1, 9))
        im = Fraction(rng.randint(-9, 9), rng.randint(1, 9))
        C[o.row - 1, o.col - 1] = QQ_I(sympy.Rational(re.numerator, re.denominator),
                                       sympy.Rational(im.numerator, im.denominator))
    S = StokesMatrix(mpmath.mpf(0), C, sys)
    problems = []
    grading = system_grading(sys, parsed.lattice_basis)
    auto = system_grading(sys)
    if [tuple(w) for w in grading.weights] != D13_WEIGHTS or [tuple(w) for w in auto.weights] != D13_WEIGHTS:
        problems.append("weights")
    if max(abs(b - 12 * mpmath.expjpi(mpmath.mpf(r) / 6)) for r, b in enumerate(auto.basis)) > 1e-40:
        problems.append("basis")
    from .alien_calculus import _omega_label
    split = {_omega_label(w): {(i + 1, j + 1) for i in range(13) for j in range(13) if m[i, j]}
             for w, m in delta_plus_split(S)}
    if split != D13_SUPPORT:
        problems.append("split support")
    comps = {c.label: c for c in alien_derivations(S, grading, sys)}
    d24 = comps["24"].matrix if "24" in comps else None
    expect = C[1, 7] - C[0, 7] * C[1, 0] / QQ_I(2)
    if d24 is None or d24[1, 7] != expect or sum(1 for v in d24.flat if v) != 1:
        problems.append("Delta_24")
    rec = reconstruct_plus(list(comps.values()), 13)
    total = np.full((13, 13), QQ_I(0), dtype=object)
    for m in rec.values():
        total = total + m
    if any(u != v for u, v in zip(total.flat, C.flat)):
        problems.append("reconstruction")
    elapsed = time.perf_counter() - t0
    ok = not problems and elapsed < 5
    detail = f"{len(parsed.overrides)} exact placeholders, {elapsed:.2f} s"
    return CriterionResult(6, "D13 structural suite", ok, detail + ("" if not problems else "; " + ", ".join(problems)))


def criterion_7(shared=None) -> CriterionResult:
    pi = _pi()

    def ell(p=1, lam=0):
        return LogPolynomialGerm(0, [(lam, p, 1, 1)])

    bad = []
    v = variation(ell())
    if len(v.terms) != 1 or v.terms[0].p != 0 or v.terms[0].h.coeffs[0] != 1:
        bad.append("var(ell)")
    for p in range(1, 6):
        vp = variation(ell(p))
        if any(vp.coefficient(0, r, 1) != (-1) ** (p - r - 1) * mpmath.binomial(p, r) for r in range(p)):
            bad.append(f"var(ell^{p})")
        t = variation_power(ell(p), p)
        if t.terms[0].h.coeffs[0] != mpmath.factorial(p) or not variation_power(ell(p), p + 1).is_zero():
            bad.append(f"var^{p}")
    worst = mpmath.mpf(0)
    for lam in (mpmath.mpf("0.3"), mpmath.mpc("0.5", "0.25"), mpmath.mpf("-0.7")):
        rot = 1 - mpmath.exp(-2j * pi * lam)
        for p in (1, 2, 3):
            worst = max(worst, abs(variation_power(ell(0, lam), p).terms[0].h.coeffs[0] - rot ** p))
        for p in (1, 2):
            g = ell(p, lam)
            expect = g.scale(rot) + variation(ell(p)).mul_power(lam).scale(1 - rot)
            diff = variation(g) - expect
            worst = max([worst] + [abs(c) for t in diff.terms for c in t.h.coeffs])
    if any(not variation(ell(0, k)).is_zero() for k in (-2, 0, 3)):
        bad.append("integer powers")
    f, g = ell(2), ell(3, mpmath.mpf("0.25"))
    vf, vg = variation(f), variation(g)
    diff = variation(f * g) - (vf * g + f * vg - vf * vg)
    worst = max([worst] + [abs(c) for t in diff.terms for c in t.h.coeffs])
    ok = not bad and worst <= 1e-12
    return CriterionResult(7, "variation identities", ok,
                           f"exact identities {'ok' if not bad else ', '.join(bad)}, numeric {_e(worst)}")


def criterion_8(shared=None) -> CriterionResult:
    eq = ScalarEquation(((-1, 1),), (0, 0, 1))
    y = solve_scalar_equation(eq, 40)
    exact = all(y.coeffs[m] == -mpmath.factorial(m - 1) for m in range(2, 41))
    exact = exact and y.coeffs[0] == 0 and y.coeffs[1] == 0
    prob = equation_borel_problem(eq, y)
    pts = [mpmath.mpc("0.5", "0.5"), mpmath.mpc("2", "1"), mpmath.mpc("-1", "-0.5"),
           mpmath.mpc("1.5", "-0.75"), mpmath.mpc("0.25", "-2")]
    worst = mpmath.mpf(0)
    for z in pts:
        ref = 1 - 1 / (1 - z)
        # continuation rung: straight path, stepping off the axis first
        via = [mpmath.mpc(0, mpmath.sign(mpmath.im(z)) * mpmath.mpf("0.5")), z]
        el = prob.continuator.walk(via)[-1]
        worst = max(worst, abs(el.value(z)[0] - ref))
        # rational rung on the Borel series
        from .core_algebra import XI, TruncatedSeries
        bs = TruncatedSeries([y.coeffs[m + 1] / mpmath.factorial(m) for m in range(40)], XI)
        worst = max(worst, abs(pade_continue(bs, z).value - ref))
    ok = exact and worst <= 1e-20
    return CriterionResult(8, "Euler subsystem", ok,
                           f"coefficients {'exact' if exact else 'WRONG'}, continuation max error {_e(worst)}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8]


def run_all(precision: int = 256, echo=None) -> list:
    """Run every criterion; ``echo`` receives each PASS/FAIL line."""
    out = []
    with working_precision(precision):
        shared = _Shared()
        for fn in CRITERIA:
            try:
                res = fn(shared)
            except Exception as err:  # a crash is a failed criterion, not a crashed suite
                num = CRITERIA.index(fn) + 1
                res = CriterionResult(num, fn.__name__, False, f"{type(err).__name__}: {err}")
            out.append(res)
            if echo is not None:
                echo(res.line())
    return out
