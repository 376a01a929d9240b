"""Prepared level-one systems ``x^2 Y' = A(x) Y`` and their Stokes values.

``A(x) = A0(x) + B(x)`` with ``A0 = (+)_j a_j I + x (lam_j I + J)`` where
``J`` is the nilpotent Jordan block with ones on the superdiagonal, and
``B(x) = sum_{s>=1} B_s x^s``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import mpmath
import numpy as np

from .core_algebra import hp, is_negligible, tolerance, zeros


class SystemSpecError(ValueError):
    """Raised for structurally invalid system descriptions."""


@dataclass(frozen=True)
class JordanBlockSpec:
    """One block ``a I + x (lam I + J)`` of size ``size``.

    ``label`` is an optional identifier; ``lam_label`` an optional symbolic
    name for ``lam`` used only in structural reports.
    """

    a: mpmath.mpc
    lam: mpmath.mpc
    size: int
    label: str | None = None
    lam_label: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "a", hp(self.a))
        object.__setattr__(self, "lam", hp(self.lam))
        if int(self.size) < 1:
            raise SystemSpecError("block size must be at least 1")
        object.__setattr__(self, "size", int(self.size))


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


@dataclass(frozen=True)
class Diagnostics:
    violations: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def codes(self) -> list[str]:
        return [v.code for v in self.violations]


def _same(u, v) -> bool:
    return abs(u - v) <= tolerance(0.5) * max(1, abs(u), abs(v))


@dataclass(frozen=True, eq=False)
class LevelOneSystem:
    """Block description of a prepared level-one system.

    Attributes
    ----------
    blocks : tuple of JordanBlockSpec
    B : tuple of n x n object arrays
        ``B[s-1]`` is the coefficient of ``x**s``.
    lam_shifts : tuple of int
        Integer shifts removed from each ``lam`` by :func:`normalize_block`.
    perm : tuple of int
        Original block index of each block (0-based).
    structural : bool
        True when ``B`` is unknown and only the exponential structure is used.
    """

    blocks: tuple
    B: tuple = ()
    lam_shifts: tuple = ()
    perm: tuple = ()
    structural: bool = False
    name: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        blocks = tuple(self.blocks)
        object.__setattr__(self, "blocks", blocks)
        n = sum(b.size for b in blocks)
        mats = []
        for s, Bs in enumerate(self.B, start=1):
            arr = np.array(Bs, dtype=object)
            if arr.shape != (n, n):
                raise SystemSpecError(f"B_{s} has shape {arr.shape}, expected {(n, n)}")
            out = zeros(n)
            for i in range(n):
                for j in range(n):
                    out[i, j] = hp(arr[i, j])
            mats.append(out)
        object.__setattr__(self, "B", tuple(mats))
        if not self.lam_shifts:
            object.__setattr__(self, "lam_shifts", (0,) * len(blocks))
        if not self.perm:
            object.__setattr__(self, "perm", tuple(range(len(blocks))))

    # ---- shape helpers
    @property
    def n(self) -> int:
        return sum(b.size for b in self.blocks)

    @property
    def J(self) -> int:
        return len(self.blocks)

    @property
    def M(self) -> int:
        return len(self.B)

    @property
    def offsets(self) -> list[int]:
        out, pos = [], 0
        for b in self.blocks:
            out.append(pos)
            pos += b.size
        return out

    def block_slice(self, j: int) -> slice:
        start = self.offsets[j]
        return slice(start, start + self.blocks[j].size)

    def block_of(self, i: int) -> tuple[int, int]:
        """Map scalar index ``i`` to ``(block, position in block)``."""
        for j, start in enumerate(self.offsets):
            if i < start + self.blocks[j].size:
                return j, i - start
        raise IndexError(i)

    def a_of(self, i: int):
        return self.blocks[self.block_of(i)[0]].a

    def L_matrix(self) -> np.ndarray:
        """``L = (+)_j lam_j I + J_{n_j}``."""
        L = zeros(self.n)
        for j, b in enumerate(self.blocks):
            s = self.offsets[j]
            for r in range(b.size):
                L[s + r, s + r] = b.lam
                if r + 1 < b.size:
                    L[s + r, s + r + 1] = mpmath.mpc(1)
        return L

    def D_matrix(self) -> np.ndarray:
        D = zeros(self.n)
        for i in range(self.n):
            D[i, i] = self.a_of(i)
        return D

    def A_coeffs(self) -> list[np.ndarray]:
        """Coefficients ``A_0, A_1, ...`` of ``A(x)``."""
        out = [self.D_matrix(), self.L_matrix()]
        for s, Bs in enumerate(self.B, start=1):
            while len(out) <= s:
                out.append(zeros(self.n))
            out[s] = out[s] + Bs
        return out

    def same_a(self, j: int, k: int) -> bool:
        return _same(self.blocks[j].a, self.blocks[k].a)


def validate_prepared(sys: LevelOneSystem) -> Diagnostics:
    """Check the prepared-form conditions without transforming anything."""
    out = []
    if not sys.blocks:
        return Diagnostics((Violation("dimension", "system has no blocks"),))
    tol = tolerance(0.5)
    for j, b in enumerate(sys.blocks):
        re = mpmath.re(b.lam)
        if re < -tol or re >= 1 - tol:
            out.append(Violation("monodromy_exponent_range",
                                 f"block {j + 1}: Re(lambda) = {mpmath.nstr(re, 10)} not in [0, 1)"))
    first = sys.blocks[0]
    if not is_negligible(first.a) or not is_negligible(first.lam):
        out.append(Violation("first_block_normalized", "block 1 must have a = 0 and lambda = 0"))
    if all(sys.same_a(0, k) for k in range(sys.J)):
        out.append(Violation("single_level", "all Stokes values a_j coincide; no level one"))
    if sys.B:
        B1 = sys.B[0]
        for j in range(sys.J):
            for k in range(sys.J):
                if not sys.same_a(j, k):
                    continue
                blk = B1[sys.block_slice(j), sys.block_slice(k)]
                if not all(is_negligible(v) for v in blk.flat):
                    out.append(Violation("resonant_B1_block",
                                         f"B_1 block ({j + 1},{k + 1}) must vanish since a_{j + 1} = a_{k + 1}"))
    return Diagnostics(tuple(out))


def normalize_block(sys: LevelOneSystem, k: int) -> LevelOneSystem:
    """Move block ``k`` (1-based) to the front and shift Stokes values and
    exponents so that it becomes ``a = lam = 0``.

    The integer removed from each ``lam_j - lam_k`` to bring its real part
    into ``[0, 1)`` is recorded in ``lam_shifts``; ``B`` is conjugated by the
    block permutation only.
    """
    if not 1 <= k <= sys.J:
        raise SystemSpecError(f"block index {k} out of range 1..{sys.J}")
    k0 = k - 1
    order = [k0] + [j for j in range(sys.J) if j != k0]
    ak, lk = sys.blocks[k0].a, sys.blocks[k0].lam
    blocks, shifts = [], []
    tol = tolerance(0.5)
    for j in order:
        b = sys.blocks[j]
        d = b.lam - lk
        s = int(mpmath.floor(mpmath.re(d) + tol))
        lam_label = None
        if b.lam_label is not None or sys.blocks[k0].lam_label is not None:
            lam_label = f"({b.lam_label or mpmath.nstr(b.lam, 10)}) - ({sys.blocks[k0].lam_label or mpmath.nstr(lk, 10)})"
        blocks.append(JordanBlockSpec(b.a - ak, d - s, b.size, b.label, lam_label))
        shifts.append(s + sys.lam_shifts[j])
    idx = []
    for j in order:
        sl = sys.block_slice(j)
        idx.extend(range(sl.start, sl.stop))
    B = tuple(Bs[np.ix_(idx, idx)] for Bs in sys.B)
    return LevelOneSystem(tuple(blocks), B, tuple(shifts), tuple(sys.perm[j] for j in order),
                          sys.structural, sys.name)


# ---------------------------------------------------------------- Stokes values

def angle_tolerance():
    return tolerance(0.25)


def principal_arg(z):
    """Argument in ``(-pi, pi]``."""
    return mpmath.arg(z)


def same_direction(theta1, theta2) -> bool:
    d = mpmath.fmod(theta1 - theta2, 2 * mpmath.pi)
    if d < 0:
        d += 2 * mpmath.pi
    return min(d, 2 * mpmath.pi - d) < angle_tolerance()


@dataclass(frozen=True)
class StokesValueSet:
    """Stokes values, their nonzero differences and anti-Stokes directions."""

    Omega: tuple
    BoldOmega: tuple
    directions: tuple  # of (theta, tuple of omega sorted by modulus)

    def direction_list(self) -> list:
        return [t for t, _ in self.directions]

    def omegas(self, theta) -> tuple:
        theta = mpmath.mpf(theta)
        for t, om in self.directions:
            if same_direction(t, theta):
                return om
        return ()

    def min_distance(self):
        pts = list(self.Omega)
        best = None
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                d = abs(pts[i] - pts[j])
                if best is None or d < best:
                    best = d
        return best


def _dedupe(values) -> list:
    out = []
    for v in values:
        if not any(_same(v, w) for w in out):
            out.append(v)
    return out


def stokes_values(sys: LevelOneSystem) -> StokesValueSet:
    Omega = _dedupe([b.a for b in sys.blocks] + [mpmath.mpc(0)])
    Omega.sort(key=lambda z: (abs(z), mpmath.arg(z)))
    diffs = []
    for bj in sys.blocks:
        for bk in sys.blocks:
            d = bj.a - bk.a
            if abs(d) > tolerance(0.5) * max(1, abs(bj.a), abs(bk.a)):
                diffs.append(d)
    Bold = _dedupe(diffs)
    groups: list[tuple] = []
    for w in Bold:
        t = principal_arg(w)
        for g in groups:
            if same_direction(g[0], t):
                g[1].append(w)
                break
        else:
            groups.append((t, [w]))
    dirs = tuple(sorted(((t, tuple(sorted(ws, key=abs))) for t, ws in groups), key=lambda g: g[0]))
    Bold.sort(key=lambda z: (mpmath.arg(z), abs(z)))
    return StokesValueSet(tuple(Omega), tuple(Bold), dirs)


def pairs_for(sys: LevelOneSystem, omega) -> list[tuple[int, int]]:
    """Block pairs ``(j, k)`` (0-based) with ``a_j - a_k = omega``."""
    return [(j, k) for j in range(sys.J) for k in range(sys.J)
            if _same(sys.blocks[j].a - sys.blocks[k].a, omega)]


def column_singularities(sys: LevelOneSystem, k: int) -> list:
    """Distinct nonzero ``a_j - a_k`` for column block ``k`` (0-based)."""
    ak = sys.blocks[k].a
    vals = [b.a - ak for b in sys.blocks]
    return [v for v in _dedupe(vals) if abs(v) > tolerance(0.5) * max(1, abs(ak))]
