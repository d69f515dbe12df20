import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from pwbarycenter import PointConfiguration, cost_cp
from pwbarycenter.cli import load_problem, main

FIX = Path(__file__).parent / "fixtures"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    lines = out.strip().splitlines()
    return code, (json.loads(lines[-1]) if lines else None), err


def test_point(capsys):
    code, summary, _ = run(capsys, "point", "--p", "2", "--weights", "0.5,0.5", "--points", "0;1")
    assert code == 0 and summary["z"] == 0.5


def test_point_validation_exit_code(capsys):
    code, summary, err = run(capsys, "point", "--p", "2", "--weights", "0.5", "--points", "0;1")
    assert code == 1 and summary is None and "weights" in err
    code, _, _ = run(capsys, "point", "--p", "0.5", "--points", "0;1")
    assert code == 1
    code, _, _ = run(capsys, "point", "--points", "0;1", "--tol", "bogus=1")
    assert code == 1


def test_solve_dirac_fixture(capsys, tmp_path):
    code, summary, _ = run(capsys, "solve", "--problem", str(FIX / "dirac" / "problem.json"),
                           "--out", str(tmp_path))
    assert code == 0
    plan = json.loads((tmp_path / "plan.json").read_text())
    assert len(plan["entries"]) == 1
    expected = cost_cp(PointConfiguration(np.array([[0.0], [2.0], [6.0]]), [0.2, 0.3, 0.5], 3.0))
    assert summary["cost"] == pytest.approx(expected)
    assert plan["cost"] == pytest.approx(expected)


def test_solve_is_deterministic(capsys, tmp_path):
    for k in (1, 2):
        assert main(["solve", "--problem", str(FIX / "crossing" / "problem.json"),
                     "--out", str(tmp_path / str(k))]) == 0
    for name in ("plan.json", "barycenter.json"):
        assert (tmp_path / "1" / name).read_bytes() == (tmp_path / "2" / name).read_bytes()


def test_verify_corrupted_plan(capsys, tmp_path):
    code, summary, _ = run(capsys, "verify", "--problem", str(FIX / "crossing" / "problem.json"),
                           "--plan", str(FIX / "crossing" / "plan.json"), "--out", str(tmp_path))
    assert code == 0
    assert summary["violations"] > 0 and summary["max_deficit"] == 0.5
    report = json.loads((tmp_path / "verify.json").read_text())
    assert report["monotonicity"]["violations"][0]["deficit"] == 0.5


def test_missing_marginal_is_validation_error(capsys):
    code, _, err = run(capsys, "solve", "--problem", str(FIX / "crossing" / "bad_problem.json"))
    assert code == 1 and "missing.csv" in err


def test_coupled_and_dual(capsys, tmp_path):
    prob = FIX / "crossing" / "problem.json"
    code, summary, _ = run(capsys, "coupled", "--problem", str(prob))
    assert code == 0 and abs(summary["gap"]) < 1e-12
    cand = tmp_path / "cand.csv"
    cand.write_text("5,1\n")
    code, summary, _ = run(capsys, "coupled", "--problem", str(prob), "--candidate", str(cand))
    assert code == 0 and summary["gap"] > 1
    code, summary, _ = run(capsys, "dual", "--problem", str(prob), "--out", str(tmp_path))
    assert code == 0 and abs(summary["gap"]) < 1e-12
    assert (tmp_path / "potentials.json").exists()


def test_figure_files_identical(capsys, tmp_path):
    for k in (1, 2):
        assert main(["figure", "--figure", "1", "--n", "40", "--quantile-resolution", "30",
                     "--out", str(tmp_path / str(k))]) == 0
    for name in ("figure1_quantiles.csv", "figure1_histograms.csv"):
        assert (tmp_path / "1" / name).read_bytes() == (tmp_path / "2" / name).read_bytes()


def test_problem_round_trip():
    prob = load_problem(FIX / "dirac" / "problem.json", p_override="2.5")
    assert prob.p == 2.5 and prob.N == 3


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "pwbarycenter.cli", "point", "--points", "1;3"],
                         capture_output=True, text=True, check=True)
    assert json.loads(out.stdout)["z"] == 2.0
