"""Input schema and report serialization.

Complex numbers are ``[re, im]`` pairs of decimal strings (integers are
accepted; floats are rejected because they lose precision).  Stokes override
values may also use exact ``p/q`` fractions.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import mpmath
import numpy as np
import sympy
from sympy.polys.domains import QQ_I

from ..formal_solution import ScalarEquation
from ..system_model import JordanBlockSpec, LevelOneSystem, SystemSpecError, validate_prepared

SCHEMA_VERSION = 1
REPORT_DIGITS = 30


class InputError(ValueError):
    """Schema or validation failure, located by a field path or line."""

    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}")
        self.where = where
        self.message = message


@dataclass
class StokesOverride:
    name: str
    row: int            # 1-based
    col: int            # 1-based
    value: tuple | None  # (Fraction, Fraction) or None for a symbol


@dataclass
class ParsedInput:
    """Result of :func:`parse_input`."""

    mode: str                      # "system" or "equation"
    name: str
    system: LevelOneSystem | None = None
    equation: ScalarEquation | None = None
    block_ids: list = field(default_factory=list)
    lattice_basis: list | None = None
    overrides: list = field(default_factory=list)
    override_direction: mpmath.mpf | None = None   # degrees


# ---------------------------------------------------------------- scalars

def _real(v, where: str):
    if isinstance(v, bool) or isinstance(v, float):
        raise InputError(where, "numbers must be decimal strings or integers, not floats")
    if isinstance(v, int):
        return mpmath.mpf(v)
    if not isinstance(v, str):
        raise InputError(where, f"expected a decimal string, got {type(v).__name__}")
    s = v.strip()
    try:
        if "/" in s:
            f = Fraction(s)
            return mpmath.mpf(f.numerator) / f.denominator
        return mpmath.mpf(s)
    except (ValueError, ZeroDivisionError):
        raise InputError(where, f"not a number: {v!r}") from None


def _exact(v, where: str) -> Fraction:
    if isinstance(v, bool) or isinstance(v, float):
        raise InputError(where, "numbers must be decimal strings or integers, not floats")
    try:
        return Fraction(v.strip() if isinstance(v, str) else v)
    except (ValueError, ZeroDivisionError, TypeError):
        raise InputError(where, f"not an exact number: {v!r}") from None


def _pair(v, where: str):
    if not isinstance(v, list) or len(v) != 2:
        raise InputError(where, "expected a [re, im] pair")
    return v


def complex_value(v, where: str) -> mpmath.mpc:
    re, im = _pair(v, where)
    return mpmath.mpc(_real(re, f"{where}[0]"), _real(im, f"{where}[1]"))


def _int(v, where: str, low: int | None = None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise InputError(where, "expected an integer")
    if low is not None and v < low:
        raise InputError(where, f"must be at least {low}")
    return v


def _get(obj: dict, key: str, where: str, kind=None):
    if key not in obj:
        raise InputError(f"{where}.{key}" if where else key, "missing required field")
    v = obj[key]
    if kind is not None and not isinstance(v, kind):
        raise InputError(f"{where}.{key}" if where else key, f"expected {kind.__name__}")
    return v


# ---------------------------------------------------------------- parse

def load_json(source) -> dict:
    """Read a JSON object from a path or a string, reporting line/column on
    syntax errors."""
    if isinstance(source, dict):
        return source
    text = Path(source).read_text() if not str(source).lstrip().startswith("{") else str(source)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise InputError(f"line {err.lineno}, column {err.colno}", err.msg) from None
    if not isinstance(data, dict):
        raise InputError("<root>", "top level must be an object")
    return data


def _parse_blocks(data: dict):
    blocks_raw = _get(data, "blocks", "", list)
    if not blocks_raw:
        raise InputError("blocks", "at least one block is required")
    blocks, ids = [], []
    for idx, b in enumerate(blocks_raw):
        where = f"blocks[{idx}]"
        if not isinstance(b, dict):
            raise InputError(where, "expected an object")
        bid = str(b.get("id", idx + 1))
        if bid in ids:
            raise InputError(f"{where}.id", f"duplicate block id {bid!r}")
        ids.append(bid)
        a = complex_value(_get(b, "a", where), f"{where}.a")
        lam = complex_value(_get(b, "lambda", where), f"{where}.lambda")
        size = _int(_get(b, "size", where), f"{where}.size", 1)
        label = b.get("lambda_label")
        if label is not None and not isinstance(label, str):
            raise InputError(f"{where}.lambda_label", "expected a string")
        blocks.append(JordanBlockSpec(a, lam, size, bid, label))
    return blocks, ids


def _parse_B(data: dict, n: int) -> tuple:
    B = _get(data, "B", "", dict)
    order = _int(_get(B, "order", "B"), "B.order", 0)
    coeffs = _get(B, "coeffs", "B", list)
    if len(coeffs) != order:
        raise InputError("B.coeffs", f"expected {order} coefficient matrices, got {len(coeffs)}")
    mats = []
    for s, M in enumerate(coeffs):
        where = f"B.coeffs[{s}]"
        if not isinstance(M, list) or len(M) != n:
            raise InputError(where, f"expected {n} rows")
        out = np.empty((n, n), dtype=object)
        for i, row in enumerate(M):
            if not isinstance(row, list) or len(row) != n:
                raise InputError(f"{where}[{i}]", f"expected {n} entries")
            for j, v in enumerate(row):
                out[i, j] = complex_value(v, f"{where}[{i}][{j}]")
        mats.append(out)
    return tuple(mats)


def _parse_overrides(data: dict, n: int):
    ov = data.get("stokes_overrides")
    if ov is None:
        return [], None
    if not isinstance(ov, dict):
        raise InputError("stokes_overrides", "expected an object")
    direction = _real(ov.get("direction", "0"), "stokes_overrides.direction")
    entries = _get(ov, "entries", "stokes_overrides", list)
    out, names, cells = [], set(), set()
    for idx, e in enumerate(entries):
        where = f"stokes_overrides.entries[{idx}]"
        if not isinstance(e, dict):
            raise InputError(where, "expected an object")
        name = _get(e, "name", where, str)
        if name in names:
            raise InputError(f"{where}.name", f"duplicate name {name!r}")
        try:
            sympy.Symbol(name)
            ok = name.isidentifier()
        except (TypeError, ValueError):
            ok = False
        if not ok:
            raise InputError(f"{where}.name", "must be an identifier")
        names.add(name)
        row = _int(_get(e, "row", where), f"{where}.row", 1)
        col = _int(_get(e, "col", where), f"{where}.col", 1)
        if row > n or col > n:
            raise InputError(where, f"row/col outside 1..{n}")
        if (row, col) in cells:
            raise InputError(where, f"entry ({row},{col}) given twice")
        cells.add((row, col))
        value = None
        if e.get("value") is not None:
            re, im = _pair(e["value"], f"{where}.value")
            value = (_exact(re, f"{where}.value[0]"), _exact(im, f"{where}.value[1]"))
        out.append(StokesOverride(name, row, col, value))
    return out, direction


def _parse_equation(data: dict, name: str) -> ParsedInput:
    op = _get(data, "operator", "", list)
    if not op:
        raise InputError("operator", "at least one coefficient row is required")
    rows = []
    for i, row in enumerate(op):
        if not isinstance(row, list):
            raise InputError(f"operator[{i}]", "expected a list of [re, im] pairs")
        rows.append(tuple(complex_value(v, f"operator[{i}][{k}]") for k, v in enumerate(row)))
    rhs = data.get("rhs", [])
    if not isinstance(rhs, list):
        raise InputError("rhs", "expected a list of [re, im] pairs")
    g = tuple(complex_value(v, f"rhs[{m}]") for m, v in enumerate(rhs))
    if not rows[0] or rows[0][0] == 0:
        raise InputError("operator[0][0]", "the coefficient of y must be nonzero")
    if len(rows[0]) < 2 or rows[0][1] == 0:
        raise InputError("operator[0][1]", "the coefficient of x^2 y' must be nonzero (level one)")
    return ParsedInput("equation", name, equation=ScalarEquation(tuple(rows), g, name))


def parse_input(source) -> ParsedInput:
    """Parse and validate a system description (path, JSON text or dict).

    Raises
    ------
    InputError
        With the offending field path (or line and column for JSON syntax
        errors) and, for systems, the prepared-form violations.
    """
    data = load_json(source)
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise InputError("schema_version", f"unsupported version {version!r}")
    name = str(data.get("name", "")) if data.get("name") is not None else ""
    mode = data.get("mode", "system")
    if mode == "equation":
        return _parse_equation(data, name)
    if mode != "system":
        raise InputError("mode", "must be 'system' or 'equation'")
    blocks, ids = _parse_blocks(data)
    n = sum(b.size for b in blocks)
    if "dimension" in data and _int(data["dimension"], "dimension", 1) != n:
        raise InputError("dimension", f"block sizes add up to {n}, not {data['dimension']}")
    structural = "B" not in data
    B = () if structural else _parse_B(data, n)
    try:
        sys = LevelOneSystem(tuple(blocks), B, structural=structural, name=name)
    except SystemSpecError as err:
        raise InputError("blocks", str(err)) from None
    diag = validate_prepared(sys)
    if not diag.ok:
        v = diag.violations[0]
        raise InputError(f"prepared form ({v.code})", "; ".join(x.message for x in diag.violations))
    basis = None
    if data.get("lattice_basis") is not None:
        raw = data["lattice_basis"]
        if not isinstance(raw, list) or not raw:
            raise InputError("lattice_basis", "expected a non-empty list of [re, im] pairs")
        basis = [complex_value(v, f"lattice_basis[{i}]") for i, v in enumerate(raw)]
    overrides, direction = _parse_overrides(data, n)
    return ParsedInput("system", name, system=sys, block_ids=ids, lattice_basis=basis,
                       overrides=overrides, override_direction=direction)


def override_matrix(parsed: ParsedInput) -> np.ndarray:
    """Stokes matrix ``C`` from the overrides: exact ``QQ_I`` entries when
    every value is given, sympy expressions (symbols for missing values)
    otherwise."""
    n = parsed.system.n
    exact = all(o.value is not None for o in parsed.overrides)
    if exact:
        C = np.full((n, n), QQ_I(0), dtype=object)
        for o in parsed.overrides:
            re, im = o.value
            C[o.row - 1, o.col - 1] = QQ_I(sympy.Rational(re.numerator, re.denominator),
                                           sympy.Rational(im.numerator, im.denominator))
        return C
    C = np.full((n, n), sympy.Integer(0), dtype=object)
    for o in parsed.overrides:
        if o.value is None:
            C[o.row - 1, o.col - 1] = sympy.Symbol(o.name)
        else:
            re, im = o.value
            C[o.row - 1, o.col - 1] = sympy.Rational(re.numerator, re.denominator) + \
                sympy.I * sympy.Rational(im.numerator, im.denominator)
    return C


# ---------------------------------------------------------------- emit

def fmt_real(v, digits: int = REPORT_DIGITS) -> str:
    v = mpmath.mpf(v)
    if v == 0:
        return "0"
    return mpmath.nstr(v, digits, min_fixed=-4, max_fixed=digits)


def fmt_value(v, digits: int = REPORT_DIGITS):
    """JSON form of a scalar: ``[re, im]`` strings for numbers, a string for
    symbolic entries."""
    if isinstance(v, sympy.Basic):
        e = sympy.expand(v)
        if e.is_number:
            re, im = e.as_real_imag()
            return [str(re), str(im)]
        return str(e)
    if isinstance(v, QQ_I.dtype):
        return [str(sympy.Rational(v.x)), str(sympy.Rational(v.y))]
    if isinstance(v, (int, Fraction)):
        return [str(v), "0"]
    z = mpmath.mpc(v)
    return [fmt_real(z.real, digits), fmt_real(z.imag, digits)]


def _is_zero_entry(v) -> bool:
    if isinstance(v, sympy.Basic):
        return sympy.expand(v) == 0
    if isinstance(v, (mpmath.mpc, mpmath.mpf, int, float, complex)):
        return v == 0
    return not v


def sparse_matrix(m, digits: int = REPORT_DIGITS) -> list:
    """Nonzero entries as ``{"row", "col", "value"}`` with 1-based indices."""
    out = []
    m = np.asarray(m, dtype=object)
    for i in range(m.shape[0]):
        for j in range(m.shape[1]):
            v = m[i, j]
            if not _is_zero_entry(v):
                out.append({"row": i + 1, "col": j + 1, "value": fmt_value(v, digits)})
    return out


def emit_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, ensure_ascii=True) + "\n"


def load_report(text: str) -> dict:
    return json.loads(text)
