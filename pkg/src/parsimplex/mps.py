"""MPS reader (fixed and free format) and conversion to computational form."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import InconsistentBounds
from .lp import CompLp

SENSES = {"N": "objective", "L": "<=", "G": ">=", "E": "="}
BOUND_TYPES = {"LO", "UP", "FX", "FR", "MI", "PL", "BV", "LI", "UI", "SC"}


class ParseError(ValueError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class UnsupportedFeature(UserWarning):
    pass


@dataclass
class RawLp:
    name: str = ""
    objective_row: str | None = None
    rows: dict[str, str] = field(default_factory=dict)  # name -> sense, insertion ordered
    columns: list[str] = field(default_factory=list)
    entries: list[tuple[str, str, float]] = field(default_factory=list)  # (col, row, value)
    rhs: dict[str, float] = field(default_factory=dict)
    ranges: dict[str, float] = field(default_factory=dict)
    bounds: list[tuple[str, str, float]] = field(default_factory=list)  # (type, col, value)
    maximize: bool = False
    integer_columns: set[str] = field(default_factory=set)

    @property
    def constraint_rows(self) -> list[str]:
        return [r for r, s in self.rows.items() if s != "objective"]

    @property
    def num_nonzeros(self) -> int:
        return sum(1 for _, r, _ in self.entries if r != self.objective_row)


def _fixed_fields(line: str) -> list[str]:
    # columns 2-3, 5-12, 15-22, 25-36, 40-47, 50-61 (1-based)
    spans = [(1, 3), (4, 12), (14, 22), (24, 36), (39, 47), (49, 61)]
    out = [line[a:b].strip() for a, b in spans]
    while out and out[-1] == "":
        out.pop()
    return out


def parse_mps(text, fixed: bool = False) -> RawLp:
    """Parse MPS text (``str`` or ``bytes``) into a :class:`RawLp`.

    Free format (whitespace separated) is the default; ``fixed=True`` reads
    the classic column positions, which allows blanks inside names.
    """
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("latin-1")
    raw = RawLp()
    section = None
    seen_entries: set[tuple[str, str]] = set()
    col_set: set[str] = set()
    in_integer = False
    saw_end = False
    saw_rows = saw_columns = False

    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("*"):
            continue
        if not line[0].isspace():
            tokens = line.split()
            head = tokens[0].upper()
            if head == "NAME":
                raw.name = " ".join(tokens[1:])
                section = "NAME"
            elif head in ("ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS"):
                section = head
                saw_rows |= head == "ROWS"
                saw_columns |= head == "COLUMNS"
            elif head == "OBJSENSE":
                section = "OBJSENSE"
                if len(tokens) > 1:
                    raw.maximize = tokens[1].upper() in ("MAX", "MAXIMIZE")
            elif head == "ENDATA":
                saw_end = True
                break
            else:
                raise ParseError(lineno, f"unknown section {tokens[0]!r}")
            continue

        if fixed and section != "OBJSENSE":
            fields = _fixed_fields(line)
            if section in ("COLUMNS", "RHS", "RANGES") and fields:
                fields = fields[1:]  # field 1 is unused in these sections
        else:
            fields = line.split()
        if section == "OBJSENSE":
            raw.maximize = fields[0].upper() in ("MAX", "MAXIMIZE")
        elif section == "ROWS":
            if len(fields) != 2 or fields[0].upper() not in SENSES:
                raise ParseError(lineno, "ROWS entry must be '<N|L|G|E> name'")
            sense, name = SENSES[fields[0].upper()], fields[1]
            if name in raw.rows:
                raise ParseError(lineno, f"duplicate row {name!r}")
            if sense == "objective":
                if raw.objective_row is not None:
                    # extra free rows are ignored, as most readers do
                    warnings.warn(f"ignoring extra objective row {name!r}", UnsupportedFeature)
                    raw.rows[name] = "ignored"
                    continue
                raw.objective_row = name
            raw.rows[name] = sense
        elif section == "COLUMNS":
            if len(fields) >= 3 and fields[1].strip("'").upper() == "MARKER":
                kind = fields[2].strip("'").upper()
                if kind == "INTORG":
                    in_integer = True
                    warnings.warn("integer markers ignored; solving the LP relaxation", UnsupportedFeature)
                elif kind == "INTEND":
                    in_integer = False
                else:
                    raise ParseError(lineno, f"unknown marker {kind!r}")
                continue
            if len(fields) not in (3, 5):
                raise ParseError(lineno, "COLUMNS entry must be 'col row value [row value]'")
            col = fields[0]
            if col not in col_set:
                col_set.add(col)
                raw.columns.append(col)
            if in_integer:
                raw.integer_columns.add(col)
            for row, val in zip(fields[1::2], fields[2::2]):
                if row not in raw.rows:
                    raise ParseError(lineno, f"undeclared row {row!r}")
                if raw.rows[row] == "ignored":
                    continue
                if (row, col) in seen_entries:
                    raise ParseError(lineno, f"duplicate entry ({row!r}, {col!r})")
                seen_entries.add((row, col))
                raw.entries.append((col, row, _number(val, lineno)))
        elif section in ("RHS", "RANGES"):
            pairs = fields[1:] if len(fields) % 2 == 1 else fields
            if len(pairs) not in (2, 4):
                raise ParseError(lineno, f"malformed {section} entry")
            target = raw.rhs if section == "RHS" else raw.ranges
            for row, val in zip(pairs[0::2], pairs[1::2]):
                if row not in raw.rows:
                    raise ParseError(lineno, f"undeclared row {row!r}")
                if section == "RANGES" and raw.rows[row] == "objective":
                    raise ParseError(lineno, "RANGES on the objective row")
                target[row] = _number(val, lineno)
        elif section == "BOUNDS":
            if not fields or fields[0].upper() not in BOUND_TYPES:
                raise ParseError(lineno, "unknown bound type")
            btype = fields[0].upper()
            needs_value = btype not in ("FR", "MI", "PL", "BV")
            rest = fields[1:]
            # bound-set name is optional
            if needs_value:
                if len(rest) == 3:
                    rest = rest[1:]
                if len(rest) != 2:
                    raise ParseError(lineno, "malformed BOUNDS entry")
                col, value = rest[0], _number(rest[1], lineno)
            else:
                if len(rest) in (2, 3) and rest[-1] not in col_set and rest[-2] in col_set:
                    rest = rest[:-1]
                if len(rest) == 2:
                    rest = rest[1:]
                if len(rest) != 1:
                    raise ParseError(lineno, "malformed BOUNDS entry")
                col, value = rest[0], 0.0
            if col not in col_set:
                raise ParseError(lineno, f"bound on undeclared column {col!r}")
            if btype == "BV":
                raise ParseError(lineno, "binary bound type BV is not supported")
            if btype == "SC":
                raise ParseError(lineno, "semi-continuous bound type SC is not supported")
            if btype in ("LI", "UI"):
                warnings.warn("integer bound treated as continuous", UnsupportedFeature)
                btype = btype.replace("I", "O") if btype == "LI" else "UP"
            raw.bounds.append((btype, col, value))
        elif section is None or section == "NAME":
            raise ParseError(lineno, "data line outside a section")

    if not saw_end:
        raise ParseError(lineno if text else 0, "missing ENDATA")
    if not saw_rows or not saw_columns:
        raise ParseError(lineno, "ROWS and COLUMNS sections are required")
    if raw.objective_row is None:
        raise ParseError(lineno, "no objective (N) row")
    raw.rows = {r: s for r, s in raw.rows.items() if s != "ignored"}
    return raw


def _number(token: str, lineno: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise ParseError(lineno, f"bad number {token!r}") from None


def read_mps(path, fixed: bool = False) -> CompLp:
    path = Path(path)
    raw = parse_mps(path.read_bytes(), fixed=fixed)
    if not raw.name:
        raw.name = path.stem
    return to_computational_form(raw)


def row_bounds(raw: RawLp) -> tuple[np.ndarray, np.ndarray]:
    rows = raw.constraint_rows
    lo = np.empty(len(rows))
    up = np.empty(len(rows))
    for i, r in enumerate(rows):
        b = raw.rhs.get(r, 0.0)
        sense = raw.rows[r]
        lo[i], up[i] = {"<=": (-math.inf, b), ">=": (b, math.inf), "=": (b, b)}[sense]
        if r in raw.ranges:
            rng = raw.ranges[r]
            if sense == "<=":
                lo[i] = b - abs(rng)
            elif sense == ">=":
                up[i] = b + abs(rng)
            elif rng > 0:
                up[i] = b + rng
            else:
                lo[i] = b + rng
    return lo, up


def column_bounds(raw: RawLp) -> tuple[np.ndarray, np.ndarray]:
    index = {c: k for k, c in enumerate(raw.columns)}
    lo = np.zeros(len(raw.columns))
    up = np.full(len(raw.columns), math.inf)
    for btype, col, value in raw.bounds:
        k = index[col]
        if btype == "LO":
            lo[k] = value
        elif btype == "UP":
            up[k] = value
            if value < 0 and lo[k] == 0:
                warnings.warn(f"negative UP bound on {col!r}: lower bound set to -inf", UnsupportedFeature)
                lo[k] = -math.inf
        elif btype == "FX":
            lo[k] = up[k] = value
        elif btype == "FR":
            lo[k], up[k] = -math.inf, math.inf
        elif btype == "MI":
            lo[k] = -math.inf
        elif btype == "PL":
            up[k] = math.inf
    return lo, up


def to_computational_form(raw: RawLp) -> CompLp:
    """Append one logical per constraint row: ``a_i^T x + s_i = 0`` with ``s_i`` in
    the negated row bounds. Maximization is turned into minimization."""
    rows = raw.constraint_rows
    row_index = {r: i for i, r in enumerate(rows)}
    col_index = {c: k for k, c in enumerate(raw.columns)}
    m, ns = len(rows), len(raw.columns)
    cost = np.zeros(ns)
    ri, ci, vals = [], [], []
    for col, row, val in raw.entries:
        if row == raw.objective_row:
            cost[col_index[col]] = val
        else:
            ri.append(row_index[row])
            ci.append(col_index[col])
            vals.append(val)
    a_rows = sp.csc_matrix((vals, (ri, ci)), shape=(m, ns))
    rlo, rup = row_bounds(raw)
    clo, cup = column_bounds(raw)
    if np.any(clo > cup) or np.any(rlo > rup):
        raise InconsistentBounds("lower bound exceeds upper bound after BOUNDS/RANGES")
    offset = -raw.rhs.get(raw.objective_row, 0.0)
    if raw.maximize:
        cost = -cost
        offset = -offset
    if m == 0:
        raise ValueError("model has no constraint rows")
    return CompLp.from_rows(
        a_rows, rlo, rup, cost, clo, cup,
        name=raw.name,
        col_names=list(raw.columns) + [f"_s_{r}" for r in rows],
        row_names=rows,
        objective_offset=offset,
        maximize=raw.maximize,
    )


def reported_objective(lp: CompLp, f: float) -> float:
    """Objective of the original model from the internal minimization value."""
    val = f + lp.objective_offset
    return -val if lp.maximize else val
