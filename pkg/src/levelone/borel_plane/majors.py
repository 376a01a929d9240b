"""Principal majors at Stokes values and the connection matrices ``K+``.

For a column block ``k`` and a Stokes value ``omega`` the Borel transform is
continued along the right-bypassing path to a ring around ``omega`` and then
around the ring over several sheets.  With ``u = xi - omega`` and
``ell = ln u / 2 pi i`` (principal determination on sheet 0) the values on
sheet ``s`` are

    g_s(u) = sum_mu exp(-2 pi i mu s) sum_p w_{mu,p}(u) (ell - s)**p,

one term per exponent class ``mu`` (mod 1).  Solving this small system at
every ring point separates the classes and log powers, which is what the
iterated variations of the theory do.  ``c_{mu,p}(u) = u**(1-mu) w_{mu,p}(u)``
is single valued, so its Laurent coefficients follow from the trapezoidal
rule on the ring.  The connection constant of an entry is the Laurent
coefficient of the dominant monomial ``u**(lam_j - lam_k - 1)`` in the
log-free part.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import mpmath
import numpy as np

from ..core_algebra import XI, TruncatedSeries, hp, lstsq, tolerance, zeros
from ..formal_solution import ALL, BlockMatrixSeries, solve_homological
from ..system_model import LevelOneSystem, column_singularities, stokes_values
from .continuation import BorelProblem, PathSpec, gamma_plus, system_borel_problem
from .germs import LogPolynomialGerm, _reduce, _same_class


class FitError(ArithmeticError):
    """Major fit failed its residual or consistency checks."""

    def __init__(self, message, where=None):
        super().__init__(message if where is None else f"{message} at {where}")
        self.where = where


def theta_star_of(theta) -> mpmath.mpf:
    """Determination of the direction ``theta`` in ``(-2 pi, 0]``."""
    t = mpmath.mpf(theta)
    two_pi = 2 * mpmath.pi
    t = mpmath.fmod(t, two_pi)
    if t > tolerance(0.25):
        t -= two_pi
    if t <= -two_pi:
        t += two_pi
    if abs(t) <= tolerance(0.25):
        t = mpmath.mpf(0)
    return t


@dataclass
class ExtractionConfig:
    radius_factors: tuple = (mpmath.mpf(1) / 4, mpmath.mpf(1) / 8)
    n_angles: int = 24
    min_sheets: int = 3
    laurent_terms: int = 12
    fit_tolerance: float = 1e-8


@dataclass
class RingData:
    """Continuation samples on one ring around ``omega``."""

    radius: mpmath.mpf
    phis: list            # sheet-0 arguments of the sample points
    values: dict          # sheet -> list (per angle) of rows x cols matrices
    held_out: list        # (u, sheet, matrix) on sheet 1 at shifted angles


def _sample_ring(problem: BorelProblem, arrival, omega, theta_star, radius, sheets, n_angles):
    """Walk the ring of given radius starting at the element ``arrival``
    (centered at ``omega + radius e^{i(theta_star - pi)}``)."""
    two_pi = 2 * mpmath.pi
    Q = n_angles
    phis = [theta_star - two_pi * (q + mpmath.mpf(1) / 2) / Q for q in range(Q)]
    cont = problem.continuator

    def point(arg):
        return omega + radius * mpmath.expj(arg)

    values = {s: [None] * Q for s in range(sheets)}
    held = []
    # counterclockwise part of sheet 0
    up = [q for q in range(Q) if phis[q] > theta_star - mpmath.pi]
    up.sort(key=lambda q: phis[q])
    el = arrival
    for q in up:
        el = cont.walk([point(phis[q])], start=el)[-1]
        values[0][q] = problem.matrix_at(el, el.center)
    # clockwise through the remaining samples of every sheet
    el = arrival
    for s in range(sheets):
        for q in range(Q):
            arg = phis[q] - two_pi * s
            if s == 0 and q in up:
                continue
            el = cont.walk([point(arg)], start=el)[-1]
            values[s][q] = problem.matrix_at(el, el.center)
            if s == min(1, sheets - 1):
                dphi = two_pi / (4 * Q)
                u = radius * mpmath.expj(arg + dphi)
                held.append((u, s, arg + dphi, problem.matrix_at(el, omega + u)))
    return RingData(radius, phis, values, held)


@dataclass
class EntryModel:
    classes: list         # list of (mu, max log power)


def _entry_model(sys: LevelOneSystem, k: int, omega, i: int, c: int) -> EntryModel:
    ak = sys.blocks[k].a
    lk = sys.blocks[k].lam
    classes: list = [[mpmath.mpc(0), 0]]
    tol = tolerance(0.5)
    for l, b in enumerate(sys.blocks):
        if abs(b.a - ak - omega) > tol * max(1, abs(omega)):
            continue
        mu, _ = _reduce(b.lam - lk)
        deg = (b.size - 1) + c + (1 if mu == 0 else 0)
        for cl in classes:
            if _same_class(cl[0], mu):
                cl[1] = max(cl[1], deg)
                break
        else:
            classes.append([mu, deg])
    return EntryModel([(m, d) for m, d in classes])


def _decompose(vals_by_sheet: list, ell0, classes, sheets):
    """Solve for ``w_{mu,p}`` from the sheet values at one point."""
    cols = [(mu, p) for mu, P in classes for p in range(P + 1)]
    rows = []
    for s in range(sheets):
        rot = [mpmath.mpc(1) if mu == 0 else mpmath.exp(-2j * mpmath.pi * mu * s) for mu, _ in classes]
        row = []
        for ci, (mu, P) in enumerate(classes):
            for p in range(P + 1):
                row.append(rot[ci] * (ell0 - s) ** p)
        rows.append(row)
    sol, res = lstsq(rows, vals_by_sheet)
    return dict(zip(cols, sol)), res


@dataclass
class EntryFit:
    K: mpmath.mpc
    laurent: dict          # (mu, p) -> (n_min, list of Laurent coefficients)
    residual: mpmath.mpf
    dominant: tuple | None  # (mu, shift) of the dominant monomial, or None


def _fit_entry(ring: RingData, theta_star, i, c, model: EntryModel, dominant, cfg: ExtractionConfig):
    Q = len(ring.phis)
    sheets = len(ring.values)
    two_pi_i = 2j * mpmath.pi
    w_pts = []
    worst = mpmath.mpf(0)
    scale = mpmath.mpf(0)
    for q, phi in enumerate(ring.phis):
        vals = [ring.values[s][q][i][c] for s in range(sheets)]
        scale = max(scale, max(abs(v) for v in vals))
        L0 = mpmath.log(ring.radius) + 1j * phi
        w, res = _decompose(vals, L0 / two_pi_i, model.classes, sheets)
        worst = max(worst, res)
        w_pts.append(w)
    laurent = {}
    nmin = -2
    nmax = cfg.laurent_terms
    for mu, P in model.classes:
        for p in range(P + 1):
            cvals = []
            for q, phi in enumerate(ring.phis):
                L0 = mpmath.log(ring.radius) + 1j * phi
                cvals.append(w_pts[q][(mu, p)] * mpmath.exp((1 - mu) * L0))
            coeffs = []
            for n in range(nmin, nmax + 1):
                acc = mpmath.fsum(cvals[q] * mpmath.expj(-n * ring.phis[q]) for q in range(Q)) / Q
                coeffs.append(acc / ring.radius ** n)
            laurent[(mu, p)] = (nmin, coeffs)
    K = mpmath.mpc(0)
    if dominant is not None:
        mu_d, sh = dominant
        for (mu, p), (n0, coeffs) in laurent.items():
            if p == 0 and _same_class(mu, mu_d):
                K = coeffs[sh - n0]
    rel = worst / scale if scale else worst
    return EntryFit(K, laurent, rel, dominant)


def _model_value(fit: EntryFit, u, L):
    total = mpmath.mpc(0)
    ell = L / (2j * mpmath.pi)
    for (mu, p), (n0, coeffs) in fit.laurent.items():
        cval = mpmath.fsum(a * u ** (n0 + t) for t, a in enumerate(coeffs))
        total += mpmath.exp((mu - 1) * L) * cval * ell ** p
    return total


def _germ_from_fit(fit: EntryFit, omega, theta_star, principal=True) -> LogPolynomialGerm:
    terms = []
    for (mu, p), (n0, coeffs) in fit.laurent.items():
        mag = max(abs(a) for a in coeffs) if coeffs else 0
        cut = [a if abs(a) > tolerance(0.3) * max(1, mag) else mpmath.mpc(0) for a in coeffs]
        first = next((t for t, a in enumerate(cut) if a != 0), None)
        if first is None:
            continue
        terms.append((mu, p, n0 + first, TruncatedSeries(cut[first:], XI)))
    g = LogPolynomialGerm(omega, terms, theta_star)
    return g.without_holomorphic_part() if principal else g


@dataclass
class MajorResult:
    """Principal major data for one ``(omega, column block)``."""

    omega: mpmath.mpc
    column_block: int
    K_block: np.ndarray                 # n x n_k, nonzero only on the pattern rows
    germs: dict                          # (row, col) -> LogPolynomialGerm
    path: PathSpec
    diagnostics: dict


def _ring_arrival(problem: BorelProblem, omega, theta_star, nu, radii, sheets_needed, cfg):
    path = gamma_plus(omega, problem.singular_points, nu, radii[0])
    els = problem.continuator.walk(path.waypoints, clearance=None)
    arrival = els[-1]
    direction = mpmath.expj(theta_star - mpmath.pi)
    rings = []
    start = arrival
    for r in radii:
        target = omega + r * direction
        if abs(start.center - target) > 0:
            start = problem.continuator.walk([target], start=start)[-1]
        rings.append(_sample_ring(problem, start, omega, theta_star, r, sheets_needed, cfg.n_angles))
    return path, rings


def _fit_entries(problem: BorelProblem, omega, entries: dict, theta_star, nu, cfg: ExtractionConfig):
    """Sample rings at ``omega`` and fit every entry ``(i, c) -> (model,
    dominant)``.  Returns the outer-ring fits, the path and the worst fit
    metrics."""
    radii = [nu * f for f in cfg.radius_factors]
    unknowns = max(sum(P + 1 for _, P in m.classes) for m, _ in entries.values())
    sheets = max(cfg.min_sheets, unknowns + 1)
    path, rings = _ring_arrival(problem, omega, theta_star, nu, radii, sheets, cfg)
    worst = {"fit_residual": mpmath.mpf(0), "radius_agreement": mpmath.mpf(0),
             "held_out_residual": mpmath.mpf(0)}
    fits_main = {}
    for (i, c), (model, dominant) in entries.items():
        fits = [_fit_entry(rg, theta_star, i, c, model, dominant, cfg) for rg in rings]
        main = fits[0]
        fits_main[(i, c)] = main
        worst["fit_residual"] = max(worst["fit_residual"], max(f.residual for f in fits))
        scaleK = max(1, abs(main.K))
        for f in fits[1:]:
            worst["radius_agreement"] = max(worst["radius_agreement"], abs(f.K - main.K) / scaleK)
        # held-out points on sheet 1 of the outer ring
        for u, _, arg, mat in rings[0].held_out:
            pred = _model_value(main, u, mpmath.log(abs(u)) + 1j * arg)
            ref = mat[i][c]
            worst["held_out_residual"] = max(worst["held_out_residual"], abs(pred - ref) / max(1, abs(ref)))
    info = {"sheets": sheets, "radii": [mpmath.nstr(r, 10) for r in radii]}
    return fits_main, path, worst, info


def _raise_on(diag, cfg, where):
    limit = mpmath.mpf(cfg.fit_tolerance)
    for key in ("fit_residual", "radius_agreement", "held_out_residual", "log_structure_residual"):
        if key in diag and diag[key] > limit:
            raise FitError(f"{key} = {mpmath.nstr(diag[key], 5)} exceeds {cfg.fit_tolerance}", where=where)


def extract_principal_major(problem: BorelProblem, sys: LevelOneSystem, k: int, omega,
                            theta_star=None, cfg: ExtractionConfig | None = None) -> MajorResult:
    """Fit the principal major of column block ``k`` at ``omega``.

    Returns per-entry germs and the ``K`` rows of every row block ``j`` with
    ``a_j - a_k = omega``; rows of other blocks carry zero ``K``.
    """
    cfg = cfg or ExtractionConfig()
    omega = hp(omega)
    if theta_star is None:
        theta_star = theta_star_of(mpmath.arg(omega))
    nu = stokes_values(sys).min_distance() / 10
    n, nk = sys.n, sys.blocks[k].size
    ak, lk = sys.blocks[k].a, sys.blocks[k].lam
    tol = tolerance(0.5)
    entries = {}
    for i in range(n):
        j, _ = sys.block_of(i)
        on_pattern = abs(sys.blocks[j].a - ak - omega) <= tol * max(1, abs(omega))
        dominant = _reduce(sys.blocks[j].lam - lk) if on_pattern else None
        for c in range(nk):
            entries[(i, c)] = (_entry_model(sys, k, omega, i, c), dominant)
    fits_main, path, worst, info = _fit_entries(problem, omega, entries, theta_star, nu, cfg)
    K = zeros(n, nk)
    germs = {}
    for (i, c), fit in fits_main.items():
        if entries[(i, c)][1] is not None:
            K[i, c] = fit.K
        germs[(i, c)] = _germ_from_fit(fit, omega, theta_star)
    diag = dict(info)
    worst_struct = mpmath.mpf(0)
    # consistency of log coefficients with the K block: entry (l, r) of
    # u^J_j K u^-J_k carries ln^p with coefficient sum K[l+a, b] / a! (-1)^(r-b) / (r-b)!
    for j in range(sys.J):
        if abs(sys.blocks[j].a - ak - omega) > tol * max(1, abs(omega)):
            continue
        js = sys.block_slice(j)
        nj = sys.blocks[j].size
        mu_d, sh = _reduce(sys.blocks[j].lam - lk)
        Kj = K[js, :]
        for l in range(nj):
            for r in range(nk):
                fit = fits_main[(js.start + l, r)]
                for p in range(1, (nj - 1 - l) + r + 1):
                    pred = mpmath.mpc(0)
                    for a in range(nj - l):
                        b = r - (p - a)
                        if 0 <= b <= r:
                            pred += Kj[l + a, b] / mpmath.factorial(a) * (-1) ** (r - b) / mpmath.factorial(r - b)
                    got = mpmath.mpc(0)
                    for (mu, pp), (n0, coeffs) in fit.laurent.items():
                        if pp == p and _same_class(mu, mu_d):
                            got = coeffs[sh - n0] / (2j * mpmath.pi) ** p
                    worst_struct = max(worst_struct, abs(got - pred) / max(1, abs(pred)))
    diag.update(worst, log_structure_residual=worst_struct, steps=problem.continuator.steps)
    _raise_on(diag, cfg, (mpmath.nstr(omega, 10), k))
    return MajorResult(omega, k, K, germs, path, diag)


@dataclass
class ScalarMajor:
    """Principal major of a scalar Borel transform at ``omega``."""

    omega: mpmath.mpc
    rho: mpmath.mpc
    K: mpmath.mpc
    log_coefficient: mpmath.mpc
    germ: LogPolynomialGerm
    path: PathSpec
    diagnostics: dict


def equation_singularity_classes(eq) -> list:
    """``(omega, rho, log_degree)`` for every nonzero simple root ``omega`` of
    ``P_0``; the Borel transform behaves like ``(xi - omega)^(rho - 1)`` with
    ``rho = -P_1(omega) / P_0'(omega)`` and may carry one log when ``rho`` is
    an integer."""
    P0 = eq.P(0)
    P1 = eq.P(1)
    coeffs = list(P0)
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    if len(coeffs) < 2:
        return []
    roots = mpmath.polyroots(list(reversed(coeffs)), maxsteps=200, extraprec=2 * mpmath.mp.prec)
    dP0 = [t * coeffs[t] for t in range(1, len(coeffs))]
    out = []
    for r in roots:
        r = hp(r)
        if abs(r) <= tolerance(0.5):
            continue
        d = mpmath.polyval(list(reversed(dP0)), r)
        if abs(d) <= tolerance(0.5):
            raise FitError("multiple root of the characteristic polynomial", where=mpmath.nstr(r, 10))
        p1 = mpmath.polyval(list(reversed(P1)), r) if P1 else mpmath.mpc(0)
        rho = -p1 / d
        mu, _ = _reduce(rho)
        out.append((r, rho, 1 if mu == 0 else 0))
    out.sort(key=lambda t: (abs(t[0]), mpmath.arg(t[0])))
    return out


def extract_scalar_major(problem: BorelProblem, eq, omega, theta_star=None,
                         cfg: ExtractionConfig | None = None) -> ScalarMajor:
    """Principal major of a scalar equation's Borel transform at ``omega``.

    ``K`` is the coefficient of ``(xi - omega)^(rho - 1)`` without logs;
    ``log_coefficient`` multiplies ``(xi - omega)^(rho - 1) ln(xi - omega)``.
    """
    cfg = cfg or ExtractionConfig()
    omega = hp(omega)
    classes = {mpmath.nstr(w, 30): (w, rho, deg) for w, rho, deg in equation_singularity_classes(eq)}
    match = [v for v in classes.values() if abs(v[0] - omega) <= tolerance(0.5) * max(1, abs(omega))]
    if not match:
        raise FitError("not a singular point of the Borel transform", where=mpmath.nstr(omega, 10))
    _, rho, deg = match[0]
    if theta_star is None:
        theta_star = theta_star_of(mpmath.arg(omega))
    pts = [w for w, _, _ in classes.values()] + [mpmath.mpc(0)]
    dmin = min(abs(a - b) for a in pts for b in pts if abs(a - b) > tolerance(0.5))
    nu = dmin / 10
    mu, sh = _reduce(rho)
    model_classes = [(mpmath.mpc(0), deg)] if mu == 0 else [(mpmath.mpc(0), 0), (mu, deg)]
    entries = {(0, 0): (EntryModel(model_classes), (mu, sh))}
    fits, path, worst, info = _fit_entries(problem, omega, entries, theta_star, nu, cfg)
    fit = fits[(0, 0)]
    logc = mpmath.mpc(0)
    for (m, p), (n0, coeffs) in fit.laurent.items():
        if p == 1 and _same_class(m, mu):
            logc = coeffs[sh - n0] / (2j * mpmath.pi)
    diag = dict(info)
    diag.update(worst, steps=problem.continuator.steps)
    _raise_on(diag, cfg, mpmath.nstr(omega, 10))
    return ScalarMajor(omega, rho, fit.K, logc, _germ_from_fit(fit, omega, theta_star), path, diag)


# ---------------------------------------------------------------- assembly

@dataclass
class ConnectionMatrix:
    """``K+`` for one direction, split by Stokes value.

    ``blocks`` is a list of ``(omega, n x n matrix)`` sorted by modulus.
    """

    theta: mpmath.mpf
    theta_star: mpmath.mpf
    blocks: list
    sys: LevelOneSystem
    diagnostics: dict = field(default_factory=dict)
    majors: list = field(default_factory=list)

    @property
    def total(self) -> np.ndarray:
        out = zeros(self.sys.n)
        for _, m in self.blocks:
            out = out + m
        return out

    def check_pattern(self):
        sys = self.sys
        tol = tolerance(0.5)
        for omega, m in self.blocks:
            for j in range(sys.J):
                for k in range(sys.J):
                    if abs(sys.blocks[j].a - sys.blocks[k].a - omega) <= tol * max(1, abs(omega)):
                        continue
                    blk = m[sys.block_slice(j), sys.block_slice(k)]
                    if any(v != 0 for v in blk.flat):
                        raise FitError("K pattern violated", where=(j, k))


def connection_matrix(sys: LevelOneSystem, theta, N: int = 40, *, series: BlockMatrixSeries | None = None,
                      theta_star=None, cfg: ExtractionConfig | None = None,
                      problems: dict | None = None) -> ConnectionMatrix:
    """Assemble ``K+_theta = sum_omega K+_(omega)`` over every column block."""
    theta = mpmath.mpf(theta)
    ts = theta_star_of(theta) if theta_star is None else mpmath.mpf(theta_star)
    sv = stokes_values(sys)
    omegas = sv.omegas(theta)
    blocks = []
    majors = []
    diag = {}
    if omegas:
        if series is None:
            series = solve_homological(sys, N, ALL)
        for omega in omegas:
            Kw = zeros(sys.n)
            for k in range(sys.J):
                sing = column_singularities(sys, k)
                if not any(abs(s - omega) <= tolerance(0.5) * max(1, abs(omega)) for s in sing):
                    continue
                key = k
                prob = None
                if problems is not None and key in problems:
                    prob = problems[key]
                else:
                    prob = system_borel_problem(series, k)
                    if problems is not None:
                        problems[key] = prob
                if prob is None:
                    continue
                res = extract_principal_major(prob, sys, k, omega, ts, cfg)
                majors.append(res)
                Kw[:, sys.block_slice(k)] = res.K_block
                diag[f"omega={mpmath.nstr(omega, 15)},k={k + 1}"] = res.diagnostics
            blocks.append((omega, Kw))
    cm = ConnectionMatrix(theta, ts, blocks, sys, diag, majors)
    cm.check_pattern()
    return cm
