import csv
import io
import json
import math

import pytest

from parsimplex.bench import (CSV_FIELDS, geometric_mean_speedup, hyper_sparsity_measure, is_hyper_sparse,
                              performance_profile, profile_csv)
from parsimplex.cli import main
from parsimplex.dual import COMPONENTS
from parsimplex.errors import MismatchedSets


# ---------------------------------------------------------------- hyper-sparsity

def test_hyper_sparsity_measure_counts():
    assert hyper_sparsity_measure({"ftran": [0, 0], "btran": [10, 0]}) == (0.0, 0.0)
    assert hyper_sparsity_measure({"ftran": [4, 1], "btran": [10, 10]}) == (25.0, 100.0)


@pytest.mark.parametrize("f, b, expected", [(0, 0, False), (100, 100, True), (61, 10, True),
                                            (10, 61, True), (60, 60, False)])
def test_hyper_sparse_or_rule(f, b, expected):
    assert is_hyper_sparse(f, b) is expected


# ---------------------------------------------------------------- profiles and speedups

def test_profile_single_engine():
    assert performance_profile({"m1": {"A": 3.0}, "m2": {"A": 1.0}}) == {"A": [(1.0, 1.0)]}


def test_profile_two_engines_one_model():
    curves = performance_profile({"m": {"A": 1.0, "B": 2.0}})
    assert curves == {"A": [(1.0, 1.0), (2.0, 1.0)], "B": [(1.0, 0.0), (2.0, 1.0)]}


def test_profile_three_engines_five_models():
    inf = math.inf
    times = {"m1": {"A": 1, "B": 2, "C": 4}, "m2": {"A": 3, "B": 3, "C": 1.5},
             "m3": {"A": 2, "B": 1, "C": inf}, "m4": {"A": 5, "B": 10, "C": 5},
             "m5": {"A": inf, "B": 4, "C": 2}}
    # ratios: A 1,2,2,1,inf  B 2,2,1,2,2  C 4,1,inf,1,1
    curves = performance_profile(times)
    assert curves["A"] == [(1.0, 0.4), (2.0, 0.8), (4.0, 0.8)]
    assert curves["B"] == [(1.0, 0.2), (2.0, 1.0), (4.0, 1.0)]
    assert curves["C"] == [(1.0, 0.6), (4.0, 0.8)]
    for pts in curves.values():
        fr = [f for _, f in pts]
        assert fr == sorted(fr)
    text = profile_csv(curves)
    assert text.splitlines()[0] == "engine,rho,fraction" and len(text.splitlines()) == 9


@pytest.mark.parametrize("base, test, expected", [
    ({"a": 1.0, "b": 3.0}, {"a": 1.0, "b": 3.0}, 1.0),
    ({"a": 2.0, "b": 4.0}, {"a": 1.0, "b": 2.0}, 2.0),
    ({"a": 1.0, "b": 4.0}, {"a": 1.0, "b": 1.0}, 2.0)])
def test_geometric_mean(base, test, expected):
    assert geometric_mean_speedup(base, test) == pytest.approx(expected, rel=1e-15)


def test_geometric_mean_mismatch():
    with pytest.raises(MismatchedSets):
        geometric_mean_speedup({"a": 1.0}, {"b": 1.0})


# ---------------------------------------------------------------- CLI

def test_text_report(data_dir, capsys):
    assert main(["--mps", str(data_dir / "wyndor.mps")]) == 0
    out = capsys.readouterr().out
    assert "objective   36" in out and "status      optimal" in out
    for name in COMPONENTS:
        assert name in out


def test_csv_one_row_per_model(data_dir, capsys):
    code = main(["--dir", str(data_dir), "--engine", "pami", "--workers", "8", "--report", "csv"])
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == len(list(data_dir.glob("*.mps")))
    assert list(rows[0]) == CSV_FIELDS and len(CSV_FIELDS) == 7 + 14 + 2
    assert code == 3  # the directory holds an infeasible model


def test_json_report(data_dir, capsys):
    assert main(["--mps", str(data_dir / "diet.mps"), "--report", "json", "--engine", "serial,sip"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert [r["engine"] for r in rows] == ["serial", "sip"]
    assert all(r["objective"] == pytest.approx(92.5) for r in rows)


@pytest.mark.parametrize("name, code", [("infeasible", 3), ("unbounded", 4)])
def test_exit_codes(data_dir, name, code, capsys):
    assert main(["--mps", str(data_dir / f"{name}.mps")]) == code


def test_limits_and_errors(tmp_path, data_dir, capsys):
    assert main(["--mps", str(data_dir / "trnsport.mps"), "--iter-limit", "1"]) == 5
    bad = tmp_path / "bad.mps"
    bad.write_text("NAME X\nROWS\n N obj\n")
    assert main(["--mps", str(bad)]) == 7
    assert main(["--mps", str(tmp_path / "missing.mps")]) == 7


def test_usage_errors(capsys):
    assert main([]) == 2
    assert main(["--mps", "x.mps", "--engine", "simplex"]) == 2
    assert main(["--mps", "x.mps", "--workers", "0"]) == 2
    assert "parsimplex" in capsys.readouterr().err


def test_pivot_logs_identical_across_workers(tmp_path, capsys):
    logs = []
    for w in ("1", "8"):
        path = tmp_path / f"log{w}.txt"
        assert main(["--random", "4", "--engine", "pami", "--workers", w, "--pivot-log", str(path),
                     "--report", "csv"]) == 0
        logs.append(path.read_bytes())
    assert logs[0] == logs[1] and logs[0]


def test_compare_engines_writes_profile(tmp_path, capsys):
    prof = tmp_path / "profile.csv"
    assert main(["--random", "3", "--engine", "serial,pami,sip", "--profile", str(prof)]) == 0
    out = capsys.readouterr().out
    assert "geometric-mean speedup relative to serial" in out
    assert prof.read_text().startswith("engine,rho,fraction")
