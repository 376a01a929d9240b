"""Lateral Borel-Laplace sums, Stokes-Ramis matrices and the map between
Stokes matrices and connection matrices.

Conventions: ``S = I + C`` relates the lateral sums by
``s_plus = s_minus x^L e^{Q(1/x)} S e^{-Q(1/x)} x^{-L}`` with
``Q(1/x) = diag(-a_j / x)`` and ``x^L = x^{lam_j} x^{J_j}`` blockwise.  The
plus side is the ray rotated clockwise off ``theta`` (singular points passed
on the right), consistent with the path used for principal majors.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import mpmath
import numpy as np

from .borel_plane.continuation import BorelProblem, system_borel_problem
from .borel_plane.majors import ConnectionMatrix, theta_star_of
from .core_algebra import (
    NilpotentMatrix,
    hp,
    identity,
    is_negligible,
    kappa,
    lstsq,
    tolerance,
    zeros,
)
from .formal_solution import ALL, BlockMatrixSeries, solve_homological
from .system_model import LevelOneSystem, stokes_values

PLUS, MINUS = "plus", "minus"


class PatternError(ValueError):
    """A matrix has a nonzero block outside its Stokes-value pattern."""


class QuadratureError(ArithmeticError):
    pass


class JumpFitError(ArithmeticError):
    pass


def _block_omega(sys: LevelOneSystem, j: int, k: int):
    return sys.blocks[j].a - sys.blocks[k].a


def _same_value(u, v) -> bool:
    return abs(u - v) <= tolerance(0.5) * max(1, abs(u), abs(v))


def _nonzero(v) -> bool:
    return not is_negligible(v, 0) if not isinstance(v, mpmath.mpc) else v != 0


@dataclass
class StokesMatrix:
    """``I + C`` for the determination ``theta_star``."""

    theta_star: mpmath.mpf
    C: np.ndarray
    sys: LevelOneSystem
    diagnostics: dict = field(default_factory=dict)

    def omegas(self) -> list:
        return stokes_values(self.sys).omegas(self.theta_star)

    def check_pattern(self, tol=0):
        """Raise unless every nonzero block ``(j, k)`` has ``a_j - a_k`` in the
        Stokes values of the direction."""
        sys = self.sys
        allowed = self.omegas()
        for j in range(sys.J):
            for k in range(sys.J):
                w = _block_omega(sys, j, k)
                if any(_same_value(w, o) for o in allowed):
                    continue
                blk = self.C[sys.block_slice(j), sys.block_slice(k)]
                for v in blk.flat:
                    if (abs(v) > tol) if isinstance(v, (mpmath.mpc, mpmath.mpf)) else bool(v):
                        raise PatternError(f"nonzero block ({j + 1},{k + 1}) with a_j - a_k not in the direction")
        return True

    def is_nilpotent(self) -> bool:
        NilpotentMatrix(self.C)
        return True

    @property
    def matrix(self) -> np.ndarray:
        one = self.C.flat[0] ** 0 if self.C.size else 1
        return identity(self.sys.n, one=one, zero=one - one) + self.C


# ---------------------------------------------------------------- Connection to Stokes

def _pair_blocks(sys: LevelOneSystem):
    for j in range(sys.J):
        for k in range(sys.J):
            if not sys.same_a(j, k):
                yield j, k


def _kappa_table(sys: LevelOneSystem, j: int, k: int, pmax: int) -> list:
    lam = sys.blocks[j].lam - sys.blocks[k].lam
    return [kappa(p, lam) for p in range(pmax + 1)]


def _forward_block(Kb, kap, nj, nk):
    """Entries ``C[l, r]`` (0-based) from ``K`` for one block pair."""
    out = zeros(nj, nk)
    for l in range(nj):
        for r in range(nk):
            acc = mpmath.mpc(0)
            for lp in range(nj - l):
                for rp in range(r + 1):
                    p = lp + r - rp
                    w = (-1) ** (r - rp) / (mpmath.factorial(r - rp) * mpmath.factorial(lp))
                    acc += kap[p] * w * Kb[l + lp, rp]
            out[l, r] = acc
    return out


def _backward_block(Cb, kap, nj, nk):
    if abs(kap[0]) <= tolerance(0.5):
        raise ArithmeticError("kappa_0 vanishes; map not invertible")
    K = zeros(nj, nk)
    for l in range(nj - 1, -1, -1):
        for r in range(nk):
            acc = Cb[l, r]
            for lp in range(nj - l):
                for rp in range(r + 1):
                    if lp == 0 and rp == r:
                        continue
                    p = lp + r - rp
                    w = (-1) ** (r - rp) / (mpmath.factorial(r - rp) * mpmath.factorial(lp))
                    acc -= kap[p] * w * K[l + lp, rp]
            K[l, r] = acc / kap[0]
    return K


def _as_matrix(K):
    if isinstance(K, ConnectionMatrix):
        return K.total, K.theta_star
    return K, None


def connection_to_stokes(K, sys: LevelOneSystem, theta_star=None) -> StokesMatrix:
    """``C`` from ``K+`` entry by entry:
    ``C[l, r] = sum_p kappa_p(lam_j - lam_k) H_p[l, r]`` for every block
    pair with ``a_j != a_k``."""
    Km, ts = _as_matrix(K)
    ts = ts if theta_star is None else mpmath.mpf(theta_star)
    ts = mpmath.mpf(0) if ts is None else ts
    C = zeros(sys.n)
    for j, k in _pair_blocks(sys):
        js, ks = sys.block_slice(j), sys.block_slice(k)
        Kb = Km[js, ks]
        if all(v == 0 for v in Kb.flat):
            continue
        nj, nk = sys.blocks[j].size, sys.blocks[k].size
        kap = _kappa_table(sys, j, k, nj + nk - 2)
        C[js, ks] = _forward_block(Kb, kap, nj, nk)
    return StokesMatrix(ts, C, sys)


def stokes_to_connection(C, sys: LevelOneSystem) -> ConnectionMatrix:
    """Inverse of :func:`connection_to_stokes` by back-substitution (rows
    descending, columns ascending within each block)."""
    Cm = C.C if isinstance(C, StokesMatrix) else C
    ts = C.theta_star if isinstance(C, StokesMatrix) else mpmath.mpf(0)
    K = zeros(sys.n)
    for j, k in _pair_blocks(sys):
        js, ks = sys.block_slice(j), sys.block_slice(k)
        Cb = Cm[js, ks]
        if all(v == 0 for v in Cb.flat):
            continue
        nj, nk = sys.blocks[j].size, sys.blocks[k].size
        kap = _kappa_table(sys, j, k, nj + nk - 2)
        K[js, ks] = _backward_block(Cb, kap, nj, nk)
    groups: dict = {}
    for j, k in _pair_blocks(sys):
        w = _block_omega(sys, j, k)
        blk = K[sys.block_slice(j), sys.block_slice(k)]
        if all(v == 0 for v in blk.flat):
            continue
        key = next((g for g in groups if _same_value(g, w)), w)
        m = groups.setdefault(key, zeros(sys.n))
        m[sys.block_slice(j), sys.block_slice(k)] = blk
    blocks = sorted(groups.items(), key=lambda t: abs(t[0]))
    return ConnectionMatrix(ts, ts, blocks, sys)


def hankel_integral(lam, p: int = 0, delta=mpmath.mpf("1e-3"), cutoff=50, dps: int = 30):
    """``int xi^(lam-1) ln^p(xi) e^-xi dxi`` along the Hankel path: in on
    ``arg = -2 pi``, around ``|xi| = delta`` counterclockwise, out on ``arg = 0``.

    Computed by direct quadrature (independent of the series used in
    :func:`~levelone.core_algebra.kappa`).
    """
    with mpmath.workdps(dps):
        lam = mpmath.mpc(lam)
        two_pi_i = 2j * mpmath.pi

        def on_ray(r, shift):
            L = mpmath.log(r) + shift
            return mpmath.exp((lam - 1) * L) * L ** p * mpmath.exp(-r)

        out_ray = mpmath.quad(lambda r: on_ray(r, 0), [delta, 1, 10, cutoff])
        in_ray = -mpmath.quad(lambda r: on_ray(r, -two_pi_i), [delta, 1, 10, cutoff])

        def on_circle(t):
            xi = delta * mpmath.expj(t)
            L = mpmath.log(delta) + 1j * t
            return mpmath.exp((lam - 1) * L) * L ** p * mpmath.exp(-xi) * 1j * xi

        circle = mpmath.quad(on_circle, [-2 * mpmath.pi, -mpmath.pi, 0])
        return +(out_ray + in_ray + circle)


# ---------------------------------------------------------------- split by omega

def delta_plus_split(C, sys: LevelOneSystem | None = None) -> list:
    """Per Stokes value ``omega``, the matrix keeping only the blocks with
    ``a_j - a_k = omega``.  Returns ``[(omega, matrix)]`` sorted by modulus;
    values with an all-zero mask are omitted."""
    if isinstance(C, StokesMatrix):
        sys = C.sys if sys is None else sys
        Cm = C.C
    else:
        Cm = C
    groups: list = []
    for j, k in _pair_blocks(sys):
        blk = Cm[sys.block_slice(j), sys.block_slice(k)]
        if not any(_nonzero(v) for v in blk.flat):
            continue
        w = _block_omega(sys, j, k)
        for g in groups:
            if _same_value(g[0], w):
                target = g[1]
                break
        else:
            zero = Cm.flat[0] - Cm.flat[0]
            target = np.full((sys.n, sys.n), zero, dtype=object)
            groups.append((w, target))
        target[sys.block_slice(j), sys.block_slice(k)] = blk
    groups.sort(key=lambda t: (abs(t[0]), mpmath.arg(t[0])))
    return groups


# ---------------------------------------------------------------- lateral sums

def lateral_offset(sys: LevelOneSystem, theta) -> mpmath.mpf:
    """``min(0.05, gap / 4)`` with ``gap`` the angular distance to the
    nearest other anti-Stokes direction."""
    dirs = stokes_values(sys).direction_list()
    two_pi = 2 * mpmath.pi
    gaps = []
    for d in dirs:
        diff = abs(mpmath.fmod(mpmath.mpf(d) - theta + 3 * mpmath.pi, two_pi) - mpmath.pi)
        if diff > tolerance(0.25):
            gaps.append(diff)
    gap = min(gaps) if gaps else two_pi
    return min(mpmath.mpf("0.05"), gap / 4)


def _moments(h, x, order: int) -> list:
    """``J_m = int_0^h t^m e^(-t/x) dt`` for ``m = 0..order`` (straight
    segment).  Top moment by its series, the rest by backward recurrence."""
    z = h / x
    M = order
    # J_M = h^(M+1) sum_k (-z)^k / (k! (M + k + 1))
    acc = mpmath.mpc(0)
    term = mpmath.mpc(1)
    k = 0
    eps = mpmath.eps
    while True:
        add = term / (M + k + 1)
        acc += add
        k += 1
        term = term * (-z) / k
        if abs(term) < eps * abs(acc) and k > abs(z):
            break
    J = [mpmath.mpc(0)] * (M + 1)
    J[M] = h ** (M + 1) * acc
    e = mpmath.exp(-z)
    hp_pow = h ** M
    for m in range(M, 0, -1):
        J[m - 1] = (J[m] + x * hp_pow * e) / (m * x)
        hp_pow = hp_pow / h
    return J


@dataclass
class RaySegments:
    """Taylor elements along a ray, ready for exact Laplace integration."""

    problem: BorelProblem
    segments: list          # (element, start, end)
    phi: mpmath.mpf
    length: mpmath.mpf


def _ray_segments(problem: BorelProblem, phi, length) -> RaySegments:
    target = length * mpmath.expj(phi)
    els = problem.continuator.walk([target])
    segs = []
    prev = problem.continuator.origin
    for el in els:
        segs.append((prev, prev.center, el.center))
        prev = el
    return RaySegments(problem, segs, mpmath.mpf(phi), mpmath.mpf(length))


def _laplace_from_segments(rs: RaySegments, x, comps) -> tuple:
    total = [mpmath.mpc(0)] * len(comps)
    tail = mpmath.mpf(0)
    for el, a, b in rs.segments:
        h = b - a
        pref = mpmath.exp(-a / x)
        if abs(pref) < mpmath.eps ** 2:
            continue
        # shift the element polynomial to start at a (a == el.center here)
        order = max(len(el.coeffs[c]) for c in comps) - 1
        J = _moments(h, x, order)
        for t, c in enumerate(comps):
            cs = el.coeffs[c]
            if a != el.center:
                raise QuadratureError("segment must start at the element center")
            total[t] += pref * mpmath.fsum(cm * J[m] for m, cm in enumerate(cs))
    # size of the neglected tail beyond the ray end
    el, a, b = rs.segments[-1]
    end_vals = el.value(b, comps)
    tail = max(abs(v) for v in end_vals) * abs(mpmath.exp(-b / x)) * abs(x)
    return total, tail


@dataclass
class LateralSumSample:
    x: mpmath.mpc
    side: str
    value: np.ndarray
    error: mpmath.mpf


def _ray_length(x_max_modulus, tol, growth=mpmath.mpf(1)):
    return (-mpmath.log(tol) + 10) * x_max_modulus * growth + 1


class LateralSummer:
    """Lateral sums of the column blocks of ``F`` along one direction.

    Rays are continued once per side and reused for every ``x``.
    """

    def __init__(self, series: BlockMatrixSeries, theta, eps=None, tol=None, x_max=None):
        self.series = series
        self.sys = series.sys
        self.theta = mpmath.mpf(theta)
        self.eps = lateral_offset(self.sys, self.theta) if eps is None else mpmath.mpf(eps)
        self.tol = mpmath.eps ** mpmath.mpf("0.45") if tol is None else tol
        self.x_max = mpmath.mpf("0.2") if x_max is None else mpmath.mpf(x_max)
        self._rays: dict = {}
        self._problems: dict = {}

    def _phi(self, side):
        return self.theta - self.eps if side == PLUS else self.theta + self.eps

    def _rays_for(self, k, side):
        key = (k, side)
        if key not in self._rays:
            if k not in self._problems:
                self._problems[k] = system_borel_problem(self.series, k)
            prob = self._problems[k]
            if prob is None:
                self._rays[key] = None
            else:
                length = _ray_length(self.x_max / mpmath.cos(self.eps), self.tol)
                self._rays[key] = _ray_segments(prob, self._phi(side), length)
        return self._rays[key]

    def block(self, k: int, side: str, x) -> LateralSumSample:
        """``n x n_k`` value of the lateral sum of column block ``k``."""
        sys = self.sys
        x = hp(x)
        if abs(x) > self.x_max:
            raise QuadratureError("x outside the range the rays were built for")
        n, nk = sys.n, sys.blocks[k].size
        ks = sys.block_slice(k)
        out = zeros(n, nk)
        for c in range(nk):
            out[ks.start + c, c] = mpmath.mpc(1)
        rs = self._rays_for(k, side)
        err = mpmath.mpf(0)
        if rs is not None:
            comps = [i * nk + c for i in range(n) for c in range(nk)]
            vals, tail = _laplace_from_segments(rs, x, comps)
            for i in range(n):
                for c in range(nk):
                    out[i, c] += vals[i * nk + c]
            err = tail
            scale = max(1, max(abs(v) for v in vals))
            if tail > self.tol * scale * 1e6:
                raise QuadratureError(f"Laplace tail {mpmath.nstr(tail, 5)} not negligible")
        return LateralSumSample(x, side, out, err)

    def full(self, side: str, x) -> LateralSumSample:
        sys = self.sys
        out = zeros(sys.n)
        err = mpmath.mpf(0)
        for k in range(sys.J):
            s = self.block(k, side, x)
            out[:, sys.block_slice(k)] = s.value
            err = max(err, s.error)
        return LateralSumSample(hp(x), side, out, err)


def lateral_sum(sys: LevelOneSystem, series: BlockMatrixSeries, theta, side: str, x,
                k: int = 0) -> LateralSumSample:
    """Lateral Borel-Laplace sum of column block ``k`` at ``x``.

    ``side`` is ``"plus"`` (ray at ``theta - eps``) or ``"minus"``
    (``theta + eps``).
    """
    if side not in (PLUS, MINUS):
        raise ValueError("side must be 'plus' or 'minus'")
    summer = LateralSummer(series, theta, x_max=abs(hp(x)) * mpmath.mpf("1.01"))
    return summer.block(k, side, x)


# ---------------------------------------------------------------- Stokes from jumps

def jump_grid(sys: LevelOneSystem, theta_star, count: int = 10) -> list:
    """``x = rho e^{i theta}`` with ``rho`` in ``{0.05, 0.06, ...}`` scaled by
    the smallest modulus of the Stokes values in the direction."""
    oms = stokes_values(sys).omegas(theta_star)
    scale = min(abs(w) for w in oms) if oms else mpmath.mpf(1)
    rhos = [mpmath.mpf(5 + t) / 100 * scale for t in range(count)]
    return [r * mpmath.expj(theta_star) for r in rhos]


def _x_power_J(size, lnx):
    """``x^{J}`` for the superdiagonal nilpotent Jordan block."""
    out = zeros(size)
    for l in range(size):
        for d in range(size - l):
            out[l, l + d] = lnx ** d / mpmath.factorial(d)
    return out


def stokes_from_jumps(sys: LevelOneSystem, theta, N: int = 40, *, series: BlockMatrixSeries | None = None,
                      grid=None, theta_star=None) -> StokesMatrix:
    """Fit ``C`` from ``s_minus^-1 (s_plus - s_minus)`` on a ray of ``x``.

    Each block pair ``(j, k)`` with ``a_j - a_k = omega`` in the direction
    gives ``e^{omega/x} x^{lam_k - lam_j} D^{jk}(x) = x^{J_j} C^{jk} x^{-J_k}``,
    linear in the entries of ``C^{jk}`` with powers of ``ln x`` as
    coefficients.  Rows are weighted by ``|e^{-omega/x}|`` so the residual is
    measured in the scale of the sums.
    """
    theta = mpmath.mpf(theta)
    ts = theta_star_of(theta) if theta_star is None else mpmath.mpf(theta_star)
    oms = stokes_values(sys).omegas(theta)
    C = zeros(sys.n)
    diag = {"samples": 0, "residual": mpmath.mpf(0), "off_pattern": mpmath.mpf(0)}
    if not oms:
        return StokesMatrix(ts, C, sys, diag)
    if series is None:
        series = solve_homological(sys, N, ALL)
    xs = jump_grid(sys, ts) if grid is None else [hp(x) for x in grid]
    summer = LateralSummer(series, theta, x_max=max(abs(x) for x in xs) * mpmath.mpf("1.01"))
    Ds = []
    for x in xs:
        sp = summer.full(PLUS, x).value
        sm = summer.full(MINUS, x).value
        Sm = mpmath.matrix(sm.tolist())
        Dm = mpmath.inverse(Sm) * mpmath.matrix((sp - sm).tolist())
        Ds.append((x, Dm))
    diag["samples"] = len(xs)
    pairs = [(j, k) for j, k in _pair_blocks(sys)
             if any(_same_value(_block_omega(sys, j, k), w) for w in oms)]
    worst = mpmath.mpf(0)
    for j, k in pairs:
        js, ks = sys.block_slice(j), sys.block_slice(k)
        nj, nk = sys.blocks[j].size, sys.blocks[k].size
        omega = _block_omega(sys, j, k)
        dl = sys.blocks[j].lam - sys.blocks[k].lam
        rows, rhs = [], []
        for x, Dm in Ds:
            lnx = mpmath.log(abs(x)) + 1j * ts
            weight = abs(mpmath.exp(-omega / x))
            factor = mpmath.exp(omega / x) * mpmath.exp(-dl * lnx)
            Pj = _x_power_J(nj, lnx)
            Pk = _x_power_J(nk, -lnx)
            for l in range(nj):
                for r in range(nk):
                    # (x^J_j C x^-J_k)[l, r] = sum_{a, b} Pj[l, a] C[a, b] Pk[b, r]
                    row = [Pj[l, a] * Pk[b, r] * weight for a in range(nj) for b in range(nk)]
                    rows.append(row)
                    rhs.append(Dm[js.start + l, ks.start + r] * factor * weight)
        sol, res = lstsq(rows, rhs)
        for a in range(nj):
            for b in range(nk):
                C[js.start + a, ks.start + b] = sol[a * nk + b]
        scale = max([abs(v) for v in rhs] + [mpmath.mpf(0)])
        worst = max(worst, res / scale if scale else res)
    # jumps outside the pattern must vanish
    off = mpmath.mpf(0)
    for x, Dm in Ds:
        for j in range(sys.J):
            for k in range(sys.J):
                if (j, k) in pairs:
                    continue
                for i in range(sys.block_slice(j).start, sys.block_slice(j).stop):
                    for c in range(sys.block_slice(k).start, sys.block_slice(k).stop):
                        off = max(off, abs(Dm[i, c]))
    diag["residual"] = worst
    diag["off_pattern"] = off
    if worst > mpmath.mpf("1e-6"):
        raise JumpFitError(f"jump fit residual {mpmath.nstr(worst, 5)}")
    sm_ = StokesMatrix(ts, C, sys, diag)
    return sm_


# ---------------------------------------------------------------- scalar equations

@dataclass
class EquationJump:
    """Jump constants of a scalar equation at ``omega``:
    ``s_plus - s_minus ~ e^{-omega/x} x^rho (C + C_log ln x)``."""

    omega: mpmath.mpc
    rho: mpmath.mpc
    C: mpmath.mpc
    C_log: mpmath.mpc
    residual: mpmath.mpf


def equation_constants_from_major(K, log_coefficient, rho) -> tuple:
    """``(C, C_log)`` from a major ``u^(rho-1) (K + L ln u)``."""
    return kappa(0, rho) * K + kappa(1, rho) * log_coefficient, kappa(0, rho) * log_coefficient


def equation_stokes_from_jumps(problem: BorelProblem, omega, rho, log_degree: int, theta,
                               count: int = 10, tol=None) -> EquationJump:
    """Fit the jump constants of a scalar Borel problem on a ray of ``x``."""
    omega = hp(omega)
    theta = mpmath.mpf(theta)
    ts = theta_star_of(theta)
    gaps = []
    for s in problem.singular_points:
        diff = abs(mpmath.fmod(mpmath.arg(s) - theta + 3 * mpmath.pi, 2 * mpmath.pi) - mpmath.pi)
        if diff > tolerance(0.25):
            gaps.append(diff)
    eps = min([mpmath.mpf("0.05")] + [g / 4 for g in gaps])
    tol = mpmath.eps ** mpmath.mpf("0.45") if tol is None else tol
    xs = [mpmath.mpf(5 + t) / 100 * abs(omega) * mpmath.expj(ts) for t in range(count)]
    length = _ray_length(max(abs(x) for x in xs) * mpmath.mpf("1.01") / mpmath.cos(eps), tol)
    plus = _ray_segments(problem, theta - eps, length)
    minus = _ray_segments(problem, theta + eps, length)
    rows, rhs = [], []
    for x in xs:
        (vp,), tail_p = _laplace_from_segments(plus, x, [0])
        (vm,), tail_m = _laplace_from_segments(minus, x, [0])
        if max(tail_p, tail_m) > tol * max(1, abs(vp)) * 1e6:
            raise QuadratureError("Laplace tail not negligible")
        lnx = mpmath.log(abs(x)) + 1j * ts
        weight = abs(mpmath.exp(-omega / x) * mpmath.exp(rho * lnx))
        target = (vp - vm) * mpmath.exp(omega / x) * mpmath.exp(-rho * lnx)
        rows.append([weight, weight * lnx] if log_degree else [weight])
        rhs.append(target * weight)
    sol, res = lstsq(rows, rhs)
    scale = max(abs(v) for v in rhs)
    res = res / scale if scale else res
    if res > mpmath.mpf("1e-6"):
        raise JumpFitError(f"jump fit residual {mpmath.nstr(res, 5)}")
    return EquationJump(omega, hp(rho), sol[0], sol[1] if log_degree else mpmath.mpc(0), res)
