import csv

import pytest

from mpse.cli import (EXIT_NONCONVERGENCE, EXIT_OK, EXIT_PARSE, EXIT_VALIDATION, main)
from mpse.game import dump_spec


def _report(path):
    return dict(line.split(": ", 1) for line in path.read_text().splitlines())


def test_validate_bundled():
    assert main(["validate", "--spec", "builtin:security"]) == EXIT_OK


def test_validate_parse_error(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("states: [oops\n")
    assert main(["validate", "--spec", str(bad)]) == EXIT_PARSE
    assert "parse error" in capsys.readouterr().err


def test_validate_missing_file(tmp_path):
    assert main(["validate", "--spec", str(tmp_path / "none.yaml")]) == EXIT_PARSE


def test_validate_validation_error(tmp_path, security, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text(dump_spec(security).replace("discount: 0.6", "discount: 1.0"))
    assert main(["validate", "--spec", str(bad)]) == EXIT_VALIDATION
    assert "discount must be < 1" in capsys.readouterr().err


def test_bad_resolution(tmp_path):
    assert main(["validate", "--spec", "builtin:security", "--grid", "-1"]) == EXIT_VALIDATION


def test_solve_finite_needs_horizon(tmp_path):
    assert main(["solve-finite", "--spec", "builtin:security", "--out", str(tmp_path)]) \
        == EXIT_VALIDATION


def test_solve_then_oracle_check(tmp_path):
    out = tmp_path / "run"
    assert main(["solve-finite", "--spec", "builtin:security", "--horizon", "1", "--grid", "10",
                 "--out", str(out)]) == EXIT_OK
    assert main(["oracle-check", "--tables", str(out / "tables.npz"), "--out", str(out)]) == EXIT_OK
    rep = _report(out / "oracle_report.txt")
    assert float(rep["max_discrepancy"]) <= 2e-3 and rep["pass"] == "True"


def test_oracle_check_fresh(tmp_path):
    assert main(["oracle-check", "--spec", "builtin:security", "--grid", "4",
                 "--out", str(tmp_path)]) == EXIT_OK
    assert float(_report(tmp_path / "oracle_report.txt")["max_discrepancy"]) <= 2e-3


def test_simulate_is_byte_deterministic(tmp_path):
    args = ["simulate", "--spec", "builtin:security", "--horizon", "3", "--grid", "10",
            "--leader-res", "20", "--episodes", "5", "--mc", "200", "--seed", "9"]
    assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "b")]) == EXIT_OK
    for name in ("trace.csv", "mc.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_out_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("MPSE_OUT_DIR", str(tmp_path / "env"))
    assert main(["solve-finite", "--spec", "builtin:security", "--horizon", "1",
                 "--grid", "4", "--leader-res", "10"]) == EXIT_OK
    assert (tmp_path / "env" / "values.csv").exists()


def test_solve_infinite_non_convergence(tmp_path):
    code = main(["solve-infinite", "--spec", "builtin:security", "--grid", "5",
                 "--leader-res", "10", "--max-sweeps", "2", "--out", str(tmp_path)])
    assert code == EXIT_NONCONVERGENCE
    assert _report(tmp_path / "report.txt")["converged"] == "False"


def test_example_security_columns(tmp_path):
    assert main(["example-security", "--grid", "10", "--leader-res", "20",
                 "--out", str(tmp_path)]) == EXIT_OK
    with open(tmp_path / "curves.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["pi_f_high", "p_l", "p_f_low", "p_f_high", "V_f_low", "V_f_high", "V_l"]
    assert len(rows) == 12
    assert float(rows[-1][6]) == pytest.approx(7.5, abs=0.05)
    assert "pure_fraction" in _report(tmp_path / "summary.txt")
