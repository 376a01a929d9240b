"""Padé continuation of Borel series.

Two rungs are provided.  If some approximant ``[L/M]`` reproduces every given
coefficient the series is taken to be rational and is evaluated exactly.
Otherwise near-diagonal approximants of three consecutive orders are compared
and, along a path, the approximant is re-expanded stepwise: the Taylor
coefficients at the next center come from a Cauchy integral of the current
approximant on a circle inside the clearance tube.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import mpmath

from ..core_algebra import TruncatedSeries, XI, hp, tolerance
from .continuation import ContinuationError, PathClearanceError


class PadeStabilizationError(ContinuationError):
    """Approximants of consecutive orders disagree."""

    def __init__(self, agreement):
        super().__init__(f"Pade approximants did not stabilize (agreement {mpmath.nstr(agreement, 5)})")
        self.agreement = agreement


@dataclass
class PadeValue:
    value: mpmath.mpc
    agreement: mpmath.mpf
    rational: bool


def _poly(c, z):
    acc = mpmath.mpc(0)
    for a in reversed(c):
        acc = acc * z + a
    return acc


def rational_form(ts: TruncatedSeries, tol=None):
    """Return ``(p, q)`` if an approximant with ``deg p + deg q < order``
    reproduces every coefficient of ``ts``, else ``None``."""
    c = [hp(v) for v in ts.coeffs]
    N = len(c) - 1
    tol = tolerance(0.5) if tol is None else tol
    scale = max([abs(v) for v in c] + [mpmath.mpf(1)])
    # a rational function of type (L, M) is reproduced by every [L'/M'] with
    # L' >= L, M' >= M; keep a few coefficients spare for the check
    total = max(N - 4, 0)
    for M in range(0, total // 2 + 1):
        L = total - M
        try:
            p, q = mpmath.pade(c[: L + M + 1], L, M)
        except (ZeroDivisionError, ValueError, ArithmeticError):
            continue
        s = [mpmath.mpc(0)] * (N + 1)
        for m in range(N + 1):
            acc = p[m] if m < len(p) else mpmath.mpc(0)
            for r in range(1, min(m, len(q) - 1) + 1):
                acc -= q[r] * s[m - r]
            s[m] = acc / q[0]
        if max(abs(u - v) for u, v in zip(s, c)) <= tol * scale:
            return p, q
    return None


def _diagonal(c: Sequence, z, shift: int = 0):
    N = len(c) - 1
    M = (N - shift) // 2
    L = N - shift - M
    p, q = mpmath.pade(list(c[: L + M + 1]), L, M)
    return _poly(p, z) / _poly(q, z)


def pade_value(ts: TruncatedSeries, z, stab_tol=None) -> PadeValue:
    """Value at ``z`` of the continuation along the straight segment from the
    expansion point (principal sheet)."""
    z = hp(z)
    rf = rational_form(ts)
    if rf is not None:
        p, q = rf
        return PadeValue(_poly(p, z) / _poly(q, z), mpmath.mpf(0), True)
    vals = [_diagonal(ts.coeffs, z, s) for s in (0, 1, 2)]
    agree = max(abs(vals[0] - vals[1]), abs(vals[1] - vals[2])) / max(1, abs(vals[0]))
    limit = mpmath.mpf(1e-10) if stab_tol is None else stab_tol
    if agree > limit:
        raise PadeStabilizationError(agree)
    return PadeValue(vals[0], agree, False)


def _reexpand(ts: TruncatedSeries, z0, radius, n_nodes=None):
    """Taylor series at ``z0`` of the diagonal approximant of ``ts``, with the
    worst disagreement of two neighbouring approximants on the circle."""
    N = ts.order
    K = n_nodes or 2 * (N + 1)
    c = list(ts.coeffs)
    Mq = N // 2
    p, q = mpmath.pade(c, N - Mq, Mq)
    p2, q2 = mpmath.pade(c[:N], N - 1 - Mq, Mq)
    samples = []
    agree = mpmath.mpf(0)
    for t in range(K):
        z = z0 + radius * mpmath.expj(2 * mpmath.pi * t / K)
        v = _poly(p, z) / _poly(q, z)
        agree = max(agree, abs(v - _poly(p2, z) / _poly(q2, z)) / max(1, abs(v)))
        samples.append((z, v))
    out = []
    for m in range(N + 1):
        acc = mpmath.fsum(v * mpmath.expj(-2 * mpmath.pi * m * t / K) for t, (_, v) in enumerate(samples))
        out.append(acc / K / radius ** m)
    return TruncatedSeries(out, XI), agree


def _circle(z, sing):
    # large enough that the new coefficients stay accurate well past the next
    # step, small enough to stay clear of the approximant's cuts
    return min([abs(z - s) for s in sing] + [mpmath.mpf(1)]) * mpmath.mpf("0.6")


def _walk(ts: TruncatedSeries, pts: list, sing: list):
    center = mpmath.mpc(0)
    cur = ts
    for idx, target in enumerate(pts):
        while True:
            if sing and min(abs(target - s) for s in sing) == 0:
                raise PathClearanceError("path hits a singular point")
            reach = min([abs(center - s) for s in sing] + [mpmath.inf]) / 4
            if abs(target - center) <= reach or not sing:
                break
            step = center + (target - center) * (reach / abs(target - center))
            cur, _ = _reexpand(cur, step - center, _circle(step, sing))
            center = step
        if idx == len(pts) - 1:
            return _diagonal(cur.coeffs, target - center)
        cur, _ = _reexpand(cur, target - center, _circle(target, sing))
        center = target


def pade_continue(ts: TruncatedSeries, zeta, waypoints: Sequence = (), singular: Sequence = (),
                  stab_tol=None) -> PadeValue:
    """Continue the Borel series ``ts`` (centered at 0) to ``zeta``.

    Parameters
    ----------
    ts : TruncatedSeries in xi, at least 8 coefficients
    zeta : target point
    waypoints : intermediate points fixing the sheet; empty means the straight
        segment from 0
    singular : singular support, used for the clearance and step rule
    stab_tol : accepted disagreement between the runs at three truncation
        orders (default ``1e-10``)

    Notes
    -----
    Re-expansion loses accuracy at every step, so the whole walk is repeated
    with the series truncated at orders ``N``, ``N-2`` and ``N-4`` and the
    spread of the three results is reported as the achieved agreement.
    """
    if ts.order < 7:
        raise ValueError("need at least 8 coefficients")
    zeta = hp(zeta)
    rf = rational_form(ts)
    if rf is not None:
        p, q = rf
        return PadeValue(_poly(p, zeta) / _poly(q, zeta), mpmath.mpf(0), True)
    sing = [hp(s) for s in singular]
    pts = [hp(w) for w in waypoints] + [zeta]
    if not waypoints and not sing:
        return pade_value(ts, zeta, stab_tol)
    vals = [_walk(ts.truncate(ts.order - d), pts, sing) for d in (0, 2, 4)]
    agree = max(abs(vals[0] - vals[1]), abs(vals[0] - vals[2])) / max(1, abs(vals[0]))
    limit = mpmath.mpf(1e-10) if stab_tol is None else stab_tol
    if agree > limit:
        raise PadeStabilizationError(agree)
    return PadeValue(vals[0], agree, False)
