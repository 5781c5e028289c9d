import math
import warnings

import numpy as np
import pytest

from parsimplex.errors import InconsistentBounds
from parsimplex.generate import random_lp
from parsimplex.mps import ParseError, parse_mps, read_mps, reported_objective, to_computational_form

MINIMAL = """NAME TINY
ROWS
 N obj
 L c1
COLUMNS
 x obj 1 c1 2
RHS
 rhs c1 3
ENDATA
"""


def test_minimal_file():
    raw = parse_mps(MINIMAL)
    assert raw.constraint_rows == ["c1"] and raw.columns == ["x"]
    assert raw.num_nonzeros == 1


def test_missing_endata():
    with pytest.raises(ParseError):
        parse_mps(MINIMAL.replace("ENDATA\n", ""))


@pytest.mark.parametrize("bad", [
    MINIMAL.replace(" L c1", " Q c1"),
    MINIMAL.replace(" x obj 1 c1 2", " x nope 1"),
    MINIMAL.replace(" x obj 1 c1 2", " x obj one"),
    MINIMAL.replace("RHS\n", "BOUNDS\n BV b x\nRHS\n"),
])
def test_malformed_inputs(bad):
    with pytest.raises(ParseError):
        parse_mps(bad)


def write_mps(lp, name):
    """Plain free-format writer for a generated model."""
    ns, m = lp.num_structural, lp.num_rows
    lines = [f"NAME {name}", "ROWS", " N obj"] + [f" E r{i}" for i in range(m)] + ["COLUMNS"]
    a = lp.matrix
    for j in range(ns):
        if lp.cost[j]:
            lines.append(f" x{j} obj {float(lp.cost[j])!r}")
        for i, v in zip(*lp.column(j)):
            lines.append(f" x{j} r{i} {float(v)!r}")
    lines += ["RHS", "BOUNDS"]
    for j in range(ns):
        lines.append(f" LO b x{j} {float(lp.lower[j])!r}")
        lines.append(f" UP b x{j} {float(lp.upper[j])!r}")
    return "\n".join(lines + ["ENDATA"]) + "\n", a.nnz - m


def test_afiro_sized_nonzero_count():
    lp = random_lp(27, 32, seed=11)
    text, _ = write_mps(lp, "AFIROLIKE")
    # independent scan: count COLUMNS pairs that do not hit the objective row
    count, section = 0, None
    for line in text.splitlines():
        if not line.startswith(" "):
            section = line.split()[0]
        elif section == "COLUMNS":
            f = line.split()
            count += sum(1 for r in f[1::2] if r != "obj")
    raw = parse_mps(text)
    assert len(raw.constraint_rows) == 27 and len(raw.columns) == 32
    assert raw.num_nonzeros == count


def test_row_logical_convention():
    text = """NAME T
ROWS
 N obj
 L lim
COLUMNS
 x1 lim 1
 x2 lim 1
RHS
 rhs lim 3
ENDATA
"""
    lp = to_computational_form(parse_mps(text))
    assert lp.matrix.toarray().tolist() == [[1, 1, 1]]
    assert lp.lower[2] == -3 and lp.upper[2] == math.inf
    # substitution check: x1 + x2 <= 3 iff s = -(x1 + x2) >= -3
    for x in ([1, 1], [2, 2], [3, 0]):
        s = -sum(x)
        assert (sum(x) <= 3) == (lp.lower[2] <= s <= lp.upper[2])


def test_maximize_negates_costs_and_reports(data_dir):
    lp = read_mps(data_dir / "wyndor.mps")
    assert lp.maximize
    assert np.all(lp.cost[: lp.num_structural] <= 0)
    assert reported_objective(lp, -36.0) == 36.0


def test_ranges_and_bound_types(data_dir):
    lp = read_mps(data_dir / "features.mps")
    assert lp.num_rows >= 1
    assert np.any(np.isinf(lp.lower)) and np.any(lp.lower == lp.upper)
    assert lp.objective_offset != 0.0


def test_inconsistent_bounds():
    text = MINIMAL.replace("RHS\n", "BOUNDS\n LO b x 5\n UP b x 4\nRHS\n")
    with pytest.raises(InconsistentBounds):
        to_computational_form(parse_mps(text))


def test_fixed_format_names_with_blanks():
    def card(f1="", f2="", f3="", f4="", f5="", f6=""):
        return f" {f1:<2} {f2:<8}  {f3:<8}  {f4:<12}   {f5:<8}  {f6:<12}".rstrip()

    text = "\n".join(["NAME          FIX", "ROWS", card("N", "COST"), card("L", "MY ROW"), "COLUMNS",
                      card("", "X ONE", "COST", "1.0", "MY ROW", "2.0"), "RHS",
                      card("", "RHS", "MY ROW", "4.0"), "BOUNDS", card("UP", "BND", "X ONE", "9"),
                      "ENDATA"]) + "\n"
    raw = parse_mps(text, fixed=True)
    assert raw.columns == ["X ONE"] and raw.constraint_rows == ["MY ROW"]
    assert raw.rhs["MY ROW"] == 4.0
    assert raw.bounds == [("UP", "X ONE", 9.0)]


def test_negative_upper_bound_warns():
    text = MINIMAL.replace("RHS\n", "BOUNDS\n UP b x -1\nRHS\n")
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        lp = to_computational_form(parse_mps(text))
    assert w and lp.lower[0] == -math.inf
