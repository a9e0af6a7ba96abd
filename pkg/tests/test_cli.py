#!/usr/bin/env python3
"""
End-to-end tests of the command-line front end.
"""

import csv
import io
import json
import math
import os

import pytest

from src.cli import main
from src.reports import INFINITY, format_value, norm_row, to_csv

DATA = os.path.join(os.path.dirname(__file__), "data")


def data(name):
    return os.path.join(DATA, name)


def csv_rows(text):
    body = "\n".join(line for line in text.splitlines() if not line.startswith("#"))
    return list(csv.DictReader(io.StringIO(body)))


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_validate_exit_codes(capsys):
    code, out, _ = run(capsys, "validate", "--tree", data("finite_valid.json"))
    assert code == 0
    assert json.loads(out)["violations"] == []

    code, out, _ = run(capsys, "validate", "--tree", data("finite_cycle.json"))
    assert code == 1
    assert json.loads(out)["violations"][0]["axiom"] == "circuit"

    code, out, _ = run(capsys, "validate", "--tree", data("finite_indegree.json"))
    assert code == 1

    code, _, err = run(capsys, "validate", "--tree", data("malformed.json"))
    assert code == 2
    assert "JSONDecodeError" in err

    code, _, _ = run(capsys, "validate", "--tree", data("does_not_exist.json"))
    assert code == 2


def test_norms_table(capsys):
    code, out, _ = run(capsys, "norms", "--tree", data("binary_small.json"), "--p", "2")
    assert code == 0
    rows = {row["quantity"]: row for row in csv_rows(out)}
    shift = rows["shift_norm(p=2)"]
    assert float(shift["closed_form"]) == pytest.approx(math.sqrt(2))
    assert shift["tag"] == "exact"
    assert float(shift["delta"]) < 1e-3
    assert float(rows["backward_bound_M(q=2)"]["closed_form"]) == pytest.approx(2.0)


def test_norms_of_weighted_lines(capsys):
    code, out, _ = run(
        capsys, "norms", "--tree", data("unary_line.json"), "--weights", data("geometric_half.json"), "--p", "1"
    )
    assert code == 0
    rows = {row["quantity"]: row for row in csv_rows(out)}
    assert float(rows["shift_norm(p=1)"]["closed_form"]) == pytest.approx(0.5)
    # p = 1 has no finite conjugate, so no B rows
    assert set(rows) == {"shift_norm(p=1)"}

    code, out, _ = run(capsys, "norms", "--tree", data("bilateral_line.json"), "--p", "3", "--format", "json")
    assert code == 0
    assert json.loads(out)[0]["closed_form"] == pytest.approx(1.0)


def test_decide(capsys):
    code, out, _ = run(capsys, "decide", "--tree", data("binary_rooted.json"), "--q", "2")
    assert code == 0
    verdict = json.loads(out)
    assert (verdict["status"], verdict["reason"]) == ("HC", "NoFreeEndUnweighted")

    code, out, _ = run(capsys, "decide", "--tree", data("grafted.json"), "--q", "2")
    assert json.loads(out)["witness"] == "1"

    code, out, _ = run(capsys, "decide", "--tree", data("bilateral_line.json"), "--operator", "forward")
    assert json.loads(out)["status"] == "ReducesToSalas"

    code, out, _ = run(
        capsys, "decide", "--tree", data("leaf_line.json"), "--weights", data("unit.json"), "--operator", "adjoint"
    )
    assert code == 0
    verdict = json.loads(out)
    assert (verdict["operator"], verdict["reason"], verdict["witness"]) == ("adjoint", "Leaf", "@")

    code, out, _ = run(
        capsys, "decide", "--tree", data("binary_unrooted.json"), "--weights", data("example_weights.json"),
        "--q", "2", "--format", "csv",
    )
    assert code == 0
    assert "status=HC reason=SufficientConditionMet" in out


def test_decay_report_and_window_exhaustion(capsys):
    code, out, _ = run(capsys, "decay", "--tree", data("binary_rooted.json"), "--probes", "@,0", "--nmax", "6")
    assert code == 0
    assert out.splitlines()[0] == "# quantity=Omega q=2.0"
    assert out.splitlines()[2] == "# shared_n=4 5 6"
    rows = csv_rows(out)
    assert len(rows) == 12
    assert float(rows[2]["value"]) == pytest.approx(1 / 8)

    code, _, err = run(capsys, "decay", "--tree", data("binary_small.json"), "--nmax", "10")
    assert code == 3
    assert "WindowExhaustedError" in err


def test_input_errors(capsys):
    code, _, _ = run(capsys, "decay", "--tree", data("binary_rooted.json"), "--p", "0.5")
    assert code == 2
    code, _, _ = run(capsys, "decay", "--tree", data("binary_rooted.json"), "--probes", "7.7")
    assert code == 2
    code, _, _ = run(capsys, "decay", "--tree", data("binary_rooted.json"), "--p", "1")
    assert code == 2


def test_shadow(capsys):
    code, out, _ = run(
        capsys, "shadow", "--tree", data("binary_rooted.json"), "--m", "4", "--eps", "1e-3", "--format", "csv"
    )
    assert code == 0
    rows = csv_rows(out)
    assert [int(row["k"]) for row in rows] == [1, 2, 3, 4]
    assert all(float(row["error"]) < 1e-3 for row in rows)

    code, out, _ = run(capsys, "shadow", "--tree", data("binary_rooted.json"), "--targets", data("targets.json"))
    assert code == 0
    document = json.loads(out)
    assert document["plan"]["schedule"][0] == 1
    assert max(row["error"] for row in document["errors"]["rows"]) < 1e-3

    code, _, err = run(capsys, "shadow", "--tree", data("unary_line.json"))
    assert code == 1
    assert "ShadowingError" in err


def test_equiv(capsys):
    code, out, _ = run(
        capsys, "equiv", "--tree", data("random_recursive.json"), "--weights", data("geometric_half.json"),
        "--q", "1.5", "--samples", "100", "--format", "json",
    )
    assert code == 0
    summary = json.loads(out)
    assert summary["samples"] == 100
    assert summary["max_residual"] < 1e-12


def test_output_is_deterministic(tmp_path):
    paths = [tmp_path / "first.csv", tmp_path / "second.csv"]
    for path in paths:
        code = main(["decay", "--tree", data("binary_unrooted.json"), "--weights", data("example_weights.json"),
                     "--quantity", "theta", "--out", str(path)])
        assert code == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_help_without_command(capsys):
    assert main([]) == 0
    assert "validate" in capsys.readouterr().out


def test_report_rendering():
    assert format_value(math.inf) == INFINITY
    assert format_value(1 + 2j) == {"re": 1.0, "im": 2.0}
    row = norm_row("shift_norm(p=2)", math.inf, "exact", 3.0)
    assert row["delta"] is None
    text = to_csv([{"quantity": row["quantity"], "closed_form": row["closed_form"]}], ["quantity", "closed_form"], ["note"])
    assert text.splitlines() == ["# note", "quantity,closed_form", f"shift_norm(p=2),{INFINITY}"]
