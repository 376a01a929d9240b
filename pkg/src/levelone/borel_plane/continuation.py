"""Analytic continuation in the Borel plane by Taylor stepping.

The Borel transform of a column block of the formal series satisfies a
first-order Fuchsian system with polynomial coefficients,

    Q(xi) Y' = R(xi) Y + g(xi),      Q diagonal,

whose only singular points are the Stokes values of that column block and 0.
At every non-singular center the Taylor coefficients follow from a linear
recurrence, so a path is followed by re-centering with steps no larger than a
third of the distance to the singular set.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import mpmath

from ..core_algebra import TruncatedSeries, hp, tolerance
from ..formal_solution import BlockMatrixSeries, ScalarEquation
from ..system_model import column_singularities


class ContinuationError(ArithmeticError):
    """Continuation could not proceed (path too close to a singularity)."""


class PathClearanceError(ContinuationError):
    pass


def continuation_tolerance():
    return tolerance(0.45)


def _poly_shift(p: Sequence, z0) -> list:
    """Coefficients of ``p(z0 + t)`` in ``t``."""
    c = list(p)
    n = len(c)
    for k in range(n):
        for i in range(n - 2, k - 1, -1):
            c[i] += z0 * c[i + 1]
    return c


def _poly_eval(p: Sequence, z):
    acc = mpmath.mpc(0)
    for c in reversed(p):
        acc = acc * z + c
    return acc


@dataclass
class PolyODE:
    """``Q_a(xi) Y_a' = sum_b R_ab(xi) Y_b + g_a(xi)`` for ``a = 0..dim-1``.

    Attributes
    ----------
    Q : list of coefficient lists, one per component
    R : list, per component ``a``, of ``(b, coeffs)`` pairs
    g : list of coefficient lists (possibly empty)
    singular : list of singular points (roots of the ``Q_a``)
    """

    dim: int
    Q: list
    R: list
    g: list
    singular: list

    def taylor(self, z0, y0: Sequence, order: int) -> list:
        """Taylor coefficients (per component) at ``z0`` from values ``y0``."""
        Q = [_poly_shift(q, z0) for q in self.Q]
        R = [[(b, _poly_shift(c, z0)) for b, c in row] for row in self.R]
        g = [_poly_shift(c, z0) if c else [] for c in self.g]
        for a in range(self.dim):
            if abs(Q[a][0]) == 0:
                raise ContinuationError(f"center {z0} is a singular point")
        y = [[hp(v)] for v in y0]
        dim = self.dim
        for k in range(order):
            new = []
            for a in range(dim):
                acc = g[a][k] if k < len(g[a]) else 0
                terms = []
                for b, c in R[a]:
                    yb = y[b]
                    for i in range(min(k, len(c) - 1) + 1):
                        terms.append(c[i] * yb[k - i])
                qa = Q[a]
                ya = y[a]
                for i in range(1, min(k + 1, len(qa) - 1) + 1):
                    terms.append(-(k + 1 - i) * qa[i] * ya[k + 1 - i])
                s = mpmath.fsum(terms) + acc if terms else mpmath.mpc(acc)
                new.append(s / (qa[0] * (k + 1)))
            for a in range(dim):
                y[a].append(new[a])
        return y

    def nearest_singular(self, z, exclude=None):
        best = None
        for s in self.singular:
            if exclude is not None and abs(s - exclude) == 0:
                continue
            d = abs(z - s)
            if best is None or d < best:
                best = d
        return best


@dataclass
class TaylorElement:
    """Local expansion ``sum_m c[a][m] (xi - center)**m`` of every component."""

    center: mpmath.mpc
    coeffs: list
    radius: mpmath.mpf

    def value(self, z, comps=None) -> list:
        t = z - self.center
        idx = range(len(self.coeffs)) if comps is None else comps
        out = []
        for a in idx:
            acc = mpmath.mpc(0)
            for c in reversed(self.coeffs[a]):
                acc = acc * t + c
            out.append(acc)
        return out


def _order_for(ratio, tol) -> int:
    ratio = max(mpmath.mpf(ratio), mpmath.mpf("1e-6"))
    return int(mpmath.ceil(mpmath.log(tol) / mpmath.log(ratio))) + 6


@dataclass
class SheetLog:
    """Accumulated argument change of ``xi - omega`` for each tracked point."""

    points: list
    winding: list = field(default_factory=list)

    def __post_init__(self):
        if not self.winding:
            self.winding = [mpmath.mpf(0)] * len(self.points)

    def advance(self, z_from, z_to):
        for i, w in enumerate(self.points):
            a = z_from - w
            b = z_to - w
            if a == 0 or b == 0:
                continue
            self.winding[i] += mpmath.arg(b / a)

    def copy(self):
        return SheetLog(list(self.points), list(self.winding))

    def turns(self) -> list:
        return [w / (2 * mpmath.pi) for w in self.winding]


class Continuator:
    """Follows the solution of a :class:`PolyODE` along polygonal paths.

    Parameters
    ----------
    ode : PolyODE
    origin : TaylorElement
        Expansion at 0 taken from the formal series; its ``radius`` is the
        distance from 0 to the nearest nonzero singular point.
    tol : mpf, optional
        Target truncation error per step.
    """

    def __init__(self, ode: PolyODE, origin: TaylorElement, tol=None):
        self.ode = ode
        self.origin = origin
        self.tol = continuation_tolerance() if tol is None else tol
        n0 = max(len(c) for c in origin.coeffs) - 1
        ratio = min(mpmath.mpf(1) / 3, self.tol ** (mpmath.mpf(1) / max(n0, 1)))
        self.first_step = origin.radius * ratio * mpmath.mpf("0.9")
        self.steps = 0

    def _step_from(self, el: TaylorElement, z) -> TaylorElement:
        d = self.ode.nearest_singular(z)
        if d is None:
            d = mpmath.mpf(10) ** 6
        if d == 0:
            raise ContinuationError(f"path hits the singular point {z}")
        y0 = el.value(z)
        ratio = mpmath.mpf(1) / 3
        coeffs = self.ode.taylor(z, y0, _order_for(ratio, self.tol))
        self.steps += 1
        return TaylorElement(z, coeffs, d)

    def _check_segment(self, z0, z1):
        # a singular point on the segment would make the steps shrink forever
        d = z1 - z0
        if d == 0:
            return
        tol = tolerance(0.25)
        for s in self.ode.singular:
            if abs(s - z0) <= tol:
                continue  # the origin element may sit on a regular singular point
            t = mpmath.re((s - z0) / d)
            t = min(max(t, 0), 1)
            if abs(z0 + t * d - s) <= tol * max(1, abs(s)):
                raise PathClearanceError(f"segment {z0} -> {z1} passes through the singular point {s}")

    def walk(self, waypoints: Sequence, start: TaylorElement | None = None,
             sheets: SheetLog | None = None, clearance=None) -> list:
        """Continue through ``waypoints`` and return the elements centered at
        every intermediate and final point (waypoints included, in order).

        Starting from the origin element the first move is limited to the
        origin's reliable disc.
        """
        el = self.origin if start is None else start
        out = []
        for target in waypoints:
            target = hp(target)
            self._check_segment(el.center, target)
            while True:
                here = el.center
                dist = abs(target - here)
                if dist == 0:
                    break
                if el is self.origin:
                    hmax = self.first_step
                else:
                    hmax = el.radius / 3
                if clearance is not None:
                    d_t = self.ode.nearest_singular(target)
                    if d_t is not None and d_t < clearance:
                        raise PathClearanceError(f"waypoint {target} within clearance of the singular set")
                if dist <= hmax:
                    z = target
                else:
                    z = here + (target - here) * hmax / dist
                if sheets is not None:
                    sheets.advance(here, z)
                el = self._step_from(el, z)
                out.append(el)
                if z == target:
                    break
        return out


# ---------------------------------------------------------------- builders

@dataclass
class BorelProblem:
    """A continuation problem together with the component map for output.

    ``comp(i, c)`` gives the state index of the Borel transform entry at row
    ``i`` and held column ``c``.
    """

    ode: PolyODE
    continuator: Continuator
    rows: int
    cols: int
    stride: int
    singular_points: list  # nonzero singular points (Stokes values)

    def comp(self, i: int, c: int) -> int:
        return i * self.cols + c

    def matrix_at(self, el: TaylorElement, z):
        vals = el.value(z, range(self.rows * self.cols))
        return [[vals[i * self.cols + c] for c in range(self.cols)] for i in range(self.rows)]


def system_borel_problem(series: BlockMatrixSeries, k: int, tol=None) -> BorelProblem | None:
    """Build the Borel ODE of column block ``k`` from its formal series.

    Returns ``None`` when the Borel transform of the block vanishes
    identically (then the block sums to the identity columns).
    """
    sys = series.sys
    blk = series.block(k)
    n = sys.n
    nk = sys.blocks[k].size
    N = blk.order
    M = max(sys.M, 1)
    if all(v == 0 for F in blk.coeffs[1:] for v in F.flat):
        return None
    L = sys.L_matrix()
    ks = sys.block_slice(k)
    Lk = L[ks, ks]
    ak = sys.blocks[k].a
    dim = M * n * nk

    def idx(s, i, c):
        return (s * n + i) * nk + c

    Q, R, g = [], [], []
    for s in range(M):
        for i in range(n):
            for c in range(nk):
                row = []
                if s == 0:
                    Q.append([-(sys.a_of(i) - ak), mpmath.mpc(1)])
                    diag = mpmath.mpc(-1) + L[i, i] - Lk[c, c]
                    coeffs = {idx(0, i, c): diag}
                    for l in range(n):
                        if l != i and L[i, l] != 0:
                            coeffs[idx(0, l, c)] = coeffs.get(idx(0, l, c), 0) + L[i, l]
                    for cc in range(nk):
                        if cc != c and Lk[cc, c] != 0:
                            coeffs[idx(0, i, cc)] = coeffs.get(idx(0, i, cc), 0) - Lk[cc, c]
                    for sb in range(1, sys.M + 1):
                        Bs = sys.B[sb - 1]
                        for l in range(n):
                            if Bs[i, l] != 0:
                                key = idx(sb - 1, l, c)
                                coeffs[key] = coeffs.get(key, 0) + Bs[i, l]
                    row = [(b, [v]) for b, v in sorted(coeffs.items()) if v != 0]
                    gp = [mpmath.mpc(0)] * max(sys.M - 1, 0)
                    for sb in range(2, sys.M + 1):
                        gp[sb - 2] += sys.B[sb - 1][i, ks.start + c] / mpmath.factorial(sb - 2)
                    g.append(gp if any(v != 0 for v in gp) else [])
                else:
                    Q.append([mpmath.mpc(1)])
                    row = [(idx(s - 1, i, c), [mpmath.mpc(1)])]
                    g.append([])
                R.append(row)
    # Taylor data at 0 from the formal coefficients
    order = N - 1
    coeffs = []
    fact = [mpmath.mpf(1)]
    for m in range(1, N + M + 2):
        fact.append(fact[-1] * m)
    for s in range(M):
        for i in range(n):
            for c in range(nk):
                seq = [mpmath.mpc(0)] * (order + 1)
                for m in range(1, N + 1):
                    deg = m - 1 + s
                    if deg <= order:
                        seq[deg] = blk.coeffs[m][i, c] / fact[deg]
                coeffs.append(seq)
    sing = column_singularities(sys, k)
    all_sing = list(sing) + [mpmath.mpc(0)]
    ode = PolyODE(dim, Q, R, g, all_sing)
    radius = min(abs(w) for w in sing) if sing else mpmath.mpf(10) ** 6
    origin = TaylorElement(mpmath.mpc(0), coeffs, radius)
    return BorelProblem(ode, Continuator(ode, origin, tol), n, nk, nk, list(sing))


def equation_borel_problem(eq: ScalarEquation, series: TruncatedSeries, tol=None) -> BorelProblem:
    """Companion-form Borel ODE of a scalar equation (see
    :class:`~levelone.formal_solution.ScalarEquation`)."""
    y0 = series.coeffs[0]
    imax = len(eq.coeffs) - 1
    # effective Borel right-hand side degree
    gdeg = -1
    for m in range(1, len(eq.rhs)):
        if eq.rhs[m] != 0:
            gdeg = max(gdeg, m - 1)
    if y0 != 0:
        for i in range(1, imax + 1):
            if eq.c(i, 0) != 0:
                gdeg = max(gdeg, i - 1)
    Mp = max(imax, gdeg + 1, 1)
    # coefficient polynomials c_d(xi) of yhat^(d) in sum_i d^(Mp-i) [P_i yhat]
    cpoly = [[mpmath.mpc(0)] for _ in range(Mp + 1)]

    def add(d, poly):
        cur = cpoly[d]
        if len(cur) < len(poly):
            cur.extend([mpmath.mpc(0)] * (len(poly) - len(cur)))
        for t, v in enumerate(poly):
            cur[t] += v

    for i in range(imax + 1):
        P = eq.P(i)
        if not P:
            continue
        r = Mp - i
        Pq = list(P)
        for q in range(r + 1):
            if not Pq:
                break
            add(r - q, [mpmath.binomial(r, q) * v for v in Pq])
            Pq = [t * Pq[t] for t in range(1, len(Pq))]
    lead = cpoly[Mp]
    while len(lead) > 1 and lead[-1] == 0:
        lead.pop()
    if all(v == 0 for v in lead):
        raise ValueError("degenerate operator: leading Borel coefficient vanishes")
    Q, R, g = [], [], []
    for d in range(Mp - 1):
        Q.append([mpmath.mpc(1)])
        R.append([(d + 1, [mpmath.mpc(1)])])
        g.append([])
    Q.append(lead)
    R.append([(d, [-v for v in cpoly[d]]) for d in range(Mp) if any(v != 0 for v in cpoly[d])])
    g.append([])
    roots = mpmath.polyroots(list(reversed(lead)), maxsteps=200, extraprec=2 * mpmath.mp.prec) \
        if len(lead) > 1 else []
    roots = [hp(r) for r in roots]
    sing = [r for r in roots if abs(r) > tolerance(0.5)]
    ode = PolyODE(Mp, Q, R, g, sing + [mpmath.mpc(0)])
    yhat = [series.coeffs[m] / mpmath.factorial(m - 1) for m in range(1, series.order + 1)]
    coeffs = []
    cur = TruncatedSeries(yhat or [0], "xi")
    for d in range(Mp):
        coeffs.append(list(cur.coeffs))
        cur = cur.derivative()
        cur = TruncatedSeries(list(cur.coeffs) + [0], "xi")
    radius = min(abs(w) for w in sing) if sing else mpmath.mpf(10) ** 6
    origin = TaylorElement(mpmath.mpc(0), coeffs, radius)
    return BorelProblem(ode, Continuator(ode, origin, tol), 1, 1, 1, sing)


# ---------------------------------------------------------------- paths

@dataclass
class PathSpec:
    """Polygonal path from 0 with bypass annotations.

    Attributes
    ----------
    waypoints : list of complex points (arcs already discretized)
    bypass : list of ``(omega, side, winding)``
    """

    waypoints: list
    bypass: list = field(default_factory=list)

    def to_json(self):
        return {
            "waypoints": [[mpmath.nstr(mpmath.re(z), 20), mpmath.nstr(mpmath.im(z), 20)]
                          for z in self.waypoints],
            "bypass": [{"omega": [mpmath.nstr(mpmath.re(w), 20), mpmath.nstr(mpmath.im(w), 20)],
                        "side": side, "winding": wnd} for w, side, wnd in self.bypass],
        }


def _arc(center, radius, phi0, phi1, max_step=mpmath.mpf("0.25")):
    n = int(mpmath.ceil(abs(phi1 - phi0) / max_step))
    n = max(n, 1)
    return [center + radius * mpmath.expj(phi0 + (phi1 - phi0) * t / n) for t in range(1, n + 1)]


def gamma_plus(omega, singular: Sequence, nu, end_radius) -> PathSpec:
    """Straight path from 0 toward ``omega`` that passes every intermediate
    singular point on its right (counterclockwise half-turn of radius ``nu``)
    and stops at distance ``end_radius`` before ``omega``."""
    omega = hp(omega)
    theta = mpmath.arg(omega)
    e = mpmath.expj(theta)
    tol = tolerance(0.25)
    inter = sorted((w for w in singular
                    if abs(w) < abs(omega) - tol and abs(mpmath.im(w / e)) < tol * max(1, abs(w))
                    and mpmath.re(w / e) > 0), key=abs)
    pts, byp = [], []
    for w in inter:
        pts.append(w - nu * e)
        pts.extend(_arc(w, nu, theta + mpmath.pi, theta + 2 * mpmath.pi))
        byp.append((w, "right", 0))
    pts.append(omega - end_radius * e)
    return PathSpec(pts, byp)


def ray_path(phi, length, singular: Sequence = ()) -> PathSpec:
    """Ray from 0 with argument ``phi`` up to ``|xi| = length``."""
    return PathSpec([length * mpmath.expj(phi)])
