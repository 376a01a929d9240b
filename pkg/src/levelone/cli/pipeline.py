"""Job configuration and the analysis pipeline.

series -> Borel plane -> K -> C -> alien derivations, per anti-Stokes
direction.  The report is a plain JSON-compatible dict with every number
rendered as a string, so identical configurations give identical bytes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import mpmath

from ..alien_calculus import GradingError, alien_derivations, bridge_report, system_grading
from ..borel_plane.continuation import equation_borel_problem
from ..borel_plane.majors import (
    connection_matrix,
    equation_singularity_classes,
    extract_scalar_major,
    theta_star_of,
)
from ..core_algebra import default_precision, max_abs, working_precision
from ..formal_solution import ALL, solve_homological, solve_scalar_equation
from ..stokes_laplace import (
    PatternError,
    StokesMatrix,
    connection_to_stokes,
    delta_plus_split,
    equation_constants_from_major,
    equation_stokes_from_jumps,
    stokes_from_jumps,
)
from ..system_model import SystemSpecError, same_direction, stokes_values
from .io import (
    SCHEMA_VERSION,
    InputError,
    ParsedInput,
    fmt_real,
    fmt_value,
    override_matrix,
    parse_input,
    sparse_matrix,
)

ROUTES = ("laplace", "borel", "both")
FORMATS = ("json", "text")
EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3


class PipelineError(Exception):
    """A module error tagged with the pipeline stage that raised it."""

    def __init__(self, stage: str, error: Exception):
        super().__init__(f"[{stage}] {type(error).__name__}: {error}")
        self.stage = stage
        self.error = error

    @property
    def exit_code(self) -> int:
        if isinstance(self.error, (InputError, SystemSpecError, PatternError, GradingError)):
            return EXIT_INVALID
        return EXIT_NUMERIC


@dataclass
class JobConfig:
    """One analysis job.

    ``directions`` is ``"all"`` or a list of angles in degrees.
    """

    input: object
    directions: object = "all"
    order: int = 40
    precision: int = field(default_factory=default_precision)
    route: str = "both"
    format: str = "json"

    def __post_init__(self):
        if self.route not in ROUTES:
            raise InputError("route", f"must be one of {', '.join(ROUTES)}")
        if self.format not in FORMATS:
            raise InputError("format", f"must be one of {', '.join(FORMATS)}")
        if self.order < 8:
            raise InputError("order", "must be at least 8")
        if self.precision < 64:
            raise InputError("precision", "must be at least 64 bits")
        if self.directions != "all":
            if isinstance(self.directions, (str, int)):
                self.directions = [self.directions]
            self.directions = [str(d) for d in self.directions]
            for d in self.directions:
                try:
                    mpmath.mpf(d)
                except (ValueError, TypeError):
                    raise InputError("direction", f"not an angle in degrees: {d!r}") from None

    def describe(self) -> dict:
        return {
            "order": self.order,
            "precision": self.precision,
            "route": self.route,
            "directions": self.directions,
        }


# ---------------------------------------------------------------- helpers

def _deg(theta) -> str:
    d = mpmath.mpf(theta) * 180 / mpmath.pi
    r = mpmath.nint(d)
    if abs(d - r) < mpmath.mpf(10) ** -20:
        return str(int(r))
    return fmt_real(d, 20)


def _rad(deg) -> mpmath.mpf:
    return mpmath.mpf(deg) * mpmath.pi / 180


def _diag(d):
    if isinstance(d, dict):
        return {str(k): _diag(v) for k, v in d.items()}
    if isinstance(d, (list, tuple)):
        return [_diag(v) for v in d]
    if isinstance(d, bool) or isinstance(d, int) or isinstance(d, str) or d is None:
        return d
    if isinstance(d, mpmath.mpc):
        return fmt_value(d, 6)
    return fmt_real(d, 6)


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError:
        raise
    except (ArithmeticError, ValueError) as err:
        raise PipelineError(name, err) from err


def _resolve_directions(cfg: JobConfig, available: list) -> list:
    if cfg.directions == "all":
        return list(available)
    out = []
    for d in cfg.directions:
        t = _rad(d)
        match = next((a for a in available if same_direction(a, t)), None)
        out.append(match if match is not None else mpmath.atan2(mpmath.sin(t), mpmath.cos(t)))
    return out


# ---------------------------------------------------------------- systems

def _system_header(parsed: ParsedInput) -> dict:
    sys = parsed.system
    sv = stokes_values(sys)
    return {
        "name": parsed.name,
        "mode": "system",
        "structural": sys.structural,
        "dimension": sys.n,
        "blocks": [{"id": bid, "a": fmt_value(b.a), "lambda": fmt_value(b.lam), "size": b.size,
                    **({"lambda_label": b.lam_label} if b.lam_label else {})}
                   for bid, b in zip(parsed.block_ids, sys.blocks)],
        "stokes_values": [fmt_value(w) for w in sv.Omega],
        "differences": [fmt_value(w) for w in sv.BoldOmega],
        "anti_stokes_directions_deg": [_deg(t) for t in sv.direction_list()],
    }


def _alien_section(C: StokesMatrix, grading, sys) -> tuple:
    comps = _stage("alien", alien_derivations, C, grading, sys)
    alien = [{"omega": fmt_value(c.omega), "label": c.label, "weight": list(c.weight),
              "matrix": sparse_matrix(c.matrix)} for c in comps]
    bridge = [r.render() for r in _stage("bridge", bridge_report, comps, sys)]
    return alien, bridge


def _run_system(cfg: JobConfig, parsed: ParsedInput) -> dict:
    sys = parsed.system
    sv = stokes_values(sys)
    grading = _stage("grading", system_grading, sys, parsed.lattice_basis)
    header = _system_header(parsed)
    header["grading"] = {
        "basis": [fmt_value(b) for b in grading.basis],
        "weights": {bid: list(w) for bid, w in zip(parsed.block_ids, grading.weights)},
    }
    available = sv.direction_list()
    if sys.structural and cfg.directions == "all" and parsed.overrides:
        available = [t for t in available if same_direction(t, _rad(parsed.override_direction))]
    directions = _resolve_directions(cfg, available)
    if cfg.route == "both" and not sys.structural and not available:
        raise PipelineError("config", InputError("route", "route 'both' needs at least one anti-Stokes direction"))
    series = None
    problems: dict = {}
    sections = []
    for theta in directions:
        ts = theta_star_of(theta)
        omegas = sv.omegas(theta)
        sec = {
            "direction_deg": _deg(theta),
            "theta_star": fmt_real(ts),
            "omegas": [fmt_value(w) for w in omegas],
            "connection": None,
            "stokes": {},
            "route_delta": None,
            "split": [],
            "alien": [],
            "bridge": [],
            "paths": [],
            "diagnostics": {},
        }
        C_used = None
        if sys.structural:
            if parsed.overrides and same_direction(theta, _rad(parsed.override_direction)):
                C_used = StokesMatrix(ts, override_matrix(parsed), sys)
                _stage("overrides", C_used.check_pattern)
                sec["stokes"]["override"] = sparse_matrix(C_used.C)
        elif omegas:
            if series is None:
                series = _stage("series", solve_homological, sys, cfg.order, ALL)
            C_b = C_l = None
            if cfg.route in ("borel", "both"):
                cm = _stage("borel", connection_matrix, sys, theta, cfg.order, series=series,
                            theta_star=ts, problems=problems)
                sec["connection"] = {
                    "blocks": [{"omega": fmt_value(w), "entries": sparse_matrix(m)} for w, m in cm.blocks],
                }
                sec["paths"] = [{"omega": fmt_value(m.omega), "column_block": m.column_block + 1,
                                 **m.path.to_json()} for m in cm.majors]
                sec["diagnostics"]["borel"] = _diag(cm.diagnostics)
                C_b = _stage("stokes", connection_to_stokes, cm, sys)
                sec["stokes"]["borel"] = sparse_matrix(C_b.C)
            if cfg.route in ("laplace", "both"):
                C_l = _stage("laplace", stokes_from_jumps, sys, theta, cfg.order, series=series, theta_star=ts)
                sec["stokes"]["laplace"] = sparse_matrix(C_l.C)
                sec["diagnostics"]["laplace"] = _diag(C_l.diagnostics)
            if C_b is not None and C_l is not None:
                sec["route_delta"] = fmt_real(max_abs(C_b.C - C_l.C), 6)
            C_used = C_b if C_b is not None else C_l
        if C_used is not None:
            sec["split"] = [{"omega": fmt_value(w), "entries": sparse_matrix(m)}
                            for w, m in delta_plus_split(C_used)]
            sec["alien"], sec["bridge"] = _alien_section(C_used, grading, sys)
        sections.append(sec)
    return {"input": header, "directions": sections}


# ---------------------------------------------------------------- equations

def _run_equation(cfg: JobConfig, parsed: ParsedInput) -> dict:
    eq = parsed.equation
    classes = _stage("singularities", equation_singularity_classes, eq)
    y = _stage("series", solve_scalar_equation, eq, cfg.order)
    header = {
        "name": parsed.name,
        "mode": "equation",
        "operator": [[fmt_value(v) for v in row] for row in eq.coeffs],
        "rhs": [fmt_value(v) for v in eq.rhs],
        "series_head": [fmt_value(v) for v in y.coeffs[:12]],
        "singularities": [{"omega": fmt_value(w), "rho": fmt_value(r), "log_degree": d} for w, r, d in classes],
    }
    available = []
    for w, _, _ in classes:
        t = mpmath.arg(w)
        if not any(same_direction(t, a) for a in available):
            available.append(t)
    available.sort()
    directions = _resolve_directions(cfg, available)
    problem = None
    sections = []
    for theta in directions:
        ts = theta_star_of(theta)
        here = [c for c in classes if same_direction(mpmath.arg(c[0]), theta)]
        sec = {"direction_deg": _deg(theta), "theta_star": fmt_real(ts),
               "omegas": [fmt_value(w) for w, _, _ in here], "singularities": []}
        for w, rho, deg in here:
            if problem is None:
                problem = _stage("borel", equation_borel_problem, eq, y)
            item = {"omega": fmt_value(w), "rho": fmt_value(rho), "log_degree": deg,
                    "stokes": {}, "route_delta": None, "diagnostics": {}}
            Cb = Cl = None
            if cfg.route in ("borel", "both"):
                m = _stage("borel", extract_scalar_major, problem, eq, w, ts)
                Cb = equation_constants_from_major(m.K, m.log_coefficient, rho)
                item["K"] = fmt_value(m.K)
                item["log_coefficient"] = fmt_value(m.log_coefficient)
                item["path"] = m.path.to_json()
                item["stokes"]["borel"] = {"C": fmt_value(Cb[0]), "C_log": fmt_value(Cb[1])}
                item["diagnostics"]["borel"] = _diag(m.diagnostics)
            if cfg.route in ("laplace", "both"):
                j = _stage("laplace", equation_stokes_from_jumps, problem, w, rho, deg, theta)
                Cl = (j.C, j.C_log)
                item["stokes"]["laplace"] = {"C": fmt_value(j.C), "C_log": fmt_value(j.C_log)}
                item["diagnostics"]["laplace"] = {"residual": fmt_real(j.residual, 6)}
            if Cb is not None and Cl is not None:
                item["route_delta"] = fmt_real(max(abs(Cb[0] - Cl[0]), abs(Cb[1] - Cl[1])), 6)
            sec["singularities"].append(item)
        sections.append(sec)
    return {"input": header, "directions": sections}


# ---------------------------------------------------------------- entry

def run_pipeline(cfg: JobConfig, parsed: ParsedInput | None = None) -> dict:
    """Run one job and return the report dict.

    Raises
    ------
    PipelineError
        Tagged with the failing stage; ``exit_code`` is 2 for invalid input
        and 3 for numerical failures.
    """
    with working_precision(cfg.precision):
        if parsed is None:
            try:
                parsed = parse_input(cfg.input)
            except (InputError, SystemSpecError) as err:
                raise PipelineError("parse", err) from err
            except OSError as err:
                raise PipelineError("parse", InputError(str(cfg.input), err.strerror or str(err))) from err
        body = _run_equation(cfg, parsed) if parsed.mode == "equation" else _run_system(cfg, parsed)
    return {"schema_version": SCHEMA_VERSION, "config": cfg.describe(), **body}


def render_text(report: dict) -> str:
    """Short human-readable summary of a report."""
    inp = report["input"]
    lines = [f"{inp.get('name') or 'input'} ({inp['mode']})"]
    if inp["mode"] == "system":
        lines.append(f"  dimension {inp['dimension']}, blocks {len(inp['blocks'])}"
                     + (", structural" if inp["structural"] else ""))
        lines.append("  anti-Stokes directions (deg): " + ", ".join(inp["anti_stokes_directions_deg"]))
    else:
        for s in inp["singularities"]:
            lines.append(f"  singular point {_pair_str(s['omega'])}, rho {_pair_str(s['rho'])}")

    for sec in report["directions"]:
        lines.append(f"direction {sec['direction_deg']} deg (theta* = {sec['theta_star']})")
        lines.append("  omegas: " + (", ".join(_pair_str(w) for w in sec["omegas"]) or "none"))
        if inp["mode"] == "equation":
            for item in sec["singularities"]:
                for route, v in item["stokes"].items():
                    lines.append(f"  C[{route}] at {_pair_str(item['omega'])} = {_pair_str(v['C'])}"
                                 f"  (ln x: {_pair_str(v['C_log'])})")
                if item["route_delta"] is not None:
                    lines.append(f"  route delta {item['route_delta']}")
            continue
        if sec["connection"]:
            for blk in sec["connection"]["blocks"]:
                for e in blk["entries"]:
                    lines.append(f"  K[{e['row']},{e['col']}] = {_pair_str(e['value'])}")
        for route, entries in sec["stokes"].items():
            for e in entries:
                lines.append(f"  C[{route}][{e['row']},{e['col']}] = {_pair_str(e['value'])}")
        if sec["route_delta"] is not None:
            lines.append(f"  route delta {sec['route_delta']}")
        for b in sec["bridge"]:
            lines.append(f"  {b}")
    return "\n".join(lines) + "\n"


def _pair_str(v) -> str:
    if isinstance(v, list):
        re, im = v
        if im in ("0", "0.0"):
            return re
        sign = "-" if im.startswith("-") else "+"
        mag = im.lstrip("-")
        if "/" in mag:
            mag = f"({mag})"
        return f"{re} {sign} {mag}i"
    return str(v)
