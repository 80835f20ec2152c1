import csv
import io
import json

import numpy as np
import pytest

from symtest.cli import main
from symtest.ensembles import SeededSource, haar_unitary
from symtest.fileio import read_cmat
from symtest.performance import omega_monte_carlo


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_omega_writes_cmat(tmp_path, capsys):
    path = tmp_path / "d3.cmat"
    code, _, err = run(capsys, "omega", "--ensemble", "diagonal", "--m", "3", "--output", str(path))
    assert code == 0
    a, header = read_cmat(path)
    assert abs(np.trace(a).real - 8) < 1e-12
    assert header["omega"]["m"] == 3 and header["hermitian"] is True
    assert "trace 8" in err and "rank 4" in err


def test_omega_monte_carlo_matches_quadrature(tmp_path, capsys):
    q, mc = tmp_path / "q.cmat", tmp_path / "mc.cmat"
    assert run(capsys, "omega", "--ensemble", "unitary", "--m", "2", "-o", str(q))[0] == 0
    code, _, _ = run(capsys, "--seed", "7", "omega", "--ensemble", "unitary", "--m", "2",
                     "--method", "monte-carlo", "--samples", "100000", "-o", str(mc))
    assert code == 0
    a, _ = read_cmat(q)
    b, header = read_cmat(mc)
    assert header["omega"]["samples"] == 100000 and header["omega"]["seed"] == 7
    assert header["provenance"]["seed"] == 7
    est = omega_monte_carlo(haar_unitary(), 2, 100000, SeededSource(7))
    assert np.abs(b - (est.mean + est.mean.conj().T) / 2).max() == 0
    assert est.within(a).all()


def test_omega_memory_guard(capsys):
    code, _, err = run(capsys, "omega", "--ensemble", "unitary", "--m", "7")
    assert code == 2
    assert "exceeds" in err


def test_omega_bad_ensemble(capsys):
    assert run(capsys, "omega", "--ensemble", "cliff", "--m", "2")[0] == 2


def test_reproduce_tables(tmp_path, capsys):
    path = tmp_path / "t.csv"
    code, _, err = run(capsys, "reproduce-tables", "--output", str(path))
    assert code == 0 and "8/8" in err
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    rows = list(csv.DictReader(io.StringIO("\n".join(lines))))
    assert list(rows[0]) == ["symmetry", "m", "beta_computed", "beta_expected", "abs_err", "pass"]
    assert [r["beta_expected"] for r in rows] == ["1/3", "1/6", "1/10", "1/2", "1/4", "1/6", "1/9", "1/12"]
    assert all(r["pass"] == "true" for r in rows)


def test_reproduce_tables_tight_tolerance(capsys):
    code, out, _ = run(capsys, "reproduce-tables", "--tolerance", "1e-17")
    assert code == 1
    assert "false" in out


def test_reproduce_tables_monte_carlo(capsys):
    code, out, _ = run(capsys, "reproduce-tables", "--method", "monte-carlo", "--samples", "1000", "--json")
    assert code == 0
    obj = json.loads(out)
    assert obj["provenance"]["samples"] == 1000 and obj["provenance"]["seed"] == 0xC0FFEE
    assert all(r["passed"] for r in obj["rows"])


def test_bounds_command(capsys):
    code, out, _ = run(capsys, "bounds", "--symmetry", "Z", "--m", "4", "--epsilon", "0.5")
    assert code == 0
    cert = json.loads(out)
    assert cert["status"] == "OPTIMAL"
    assert abs(cert["beta_low"] - 1 / 18) < 1e-9 and abs(cert["beta_up"] - 1 / 18) < 1e-9
    code, out, _ = run(capsys, "bounds", "--symmetry", "T", "--m", "5")
    cert = json.loads(out)
    assert code == 0 and cert["effective_m"] == 4 and abs(cert["beta_up"] - 1 / 6) < 1e-9


def test_bounds_six_queries(capsys):
    code, out, _ = run(capsys, "bounds", "--symmetry", "T", "--m", "6")
    cert = json.loads(out)
    assert code == 0 and cert["status"] == "OPTIMAL" and abs(cert["beta_up"] - 0.1) < 1e-9
    assert abs(cert["dmax_bits"] - 3.321928) < 1e-5


def test_bounds_rejects_large_m(capsys):
    assert run(capsys, "bounds", "--symmetry", "T", "--m", "7")[0] == 2


def test_protocol_eval(capsys):
    code, out, _ = run(capsys, "protocol-eval", "--symmetry", "T", "--m", "4", "--json")
    obj = json.loads(out)
    assert code == 0
    assert obj["expected"] == "1/6" and abs(obj["beta"] - 1 / 6) < 1e-9 and obj["alpha"] < 1e-9
    code, out, _ = run(capsys, "protocol-eval", "--symmetry", "Z", "--parts", "2,2")
    assert abs(json.loads(out)["beta"] - 11 / 80) < 1e-9
    code, out, _ = run(capsys, "protocol-eval", "--symmetry", "T", "--m", "2", "--epsilon", "0.1")
    assert abs(json.loads(out)["beta"] - 0.3) < 1e-12
    assert run(capsys, "protocol-eval", "--symmetry", "T", "--m", "3")[0] == 2
    assert run(capsys, "protocol-eval", "--symmetry", "T")[0] == 2


def test_decay_scan(capsys):
    code, out, _ = run(capsys, "decay-scan", "--symmetry", "Z", "--m-max", "5", "--json")
    obj = json.loads(out)
    assert code == 0 and len(obj["rows"]) == 5
    assert -2.0 <= obj["slope_opt"] <= -1.5
    assert abs(obj["slope_naive"] + 1) < 0.1
    code, out, _ = run(capsys, "decay-scan", "--symmetry", "T", "--json")
    obj = json.loads(out)
    assert [r["beta_opt"] for r in obj["rows"]] == ["1/3", "1/6", "1/10"]
    assert [r["beta_naive"] for r in obj["rows"]] == ["1/3", "1/5", "1/7"]
    code, out, _ = run(capsys, "decay-scan", "--symmetry", "Z", "--m-max", "1", "--json")
    obj = json.loads(out)
    assert len(obj["rows"]) == 1 and obj["slope_opt"] is None


def test_simulate(capsys):
    code, out, _ = run(capsys, "simulate", "--symmetry", "T", "--m", "2", "--shots", "20000", "--truth", "symmetric")
    obj = json.loads(out)
    assert code == 0 and obj["count"] == 0 and obj["empirical"] == 0.0
    code, out, _ = run(capsys, "simulate", "--symmetry", "Z", "--m", "3", "--shots", "20000")
    obj = json.loads(out)
    assert obj["within_3sigma"] and obj["wilson95"][0] < obj["empirical"] < obj["wilson95"][1]
    assert obj["provenance"]["seed"] == 0xC0FFEE


def test_simulate_zero_shots(capsys):
    assert run(capsys, "simulate", "--symmetry", "T", "--m", "2", "--shots", "0")[0] == 2


def test_deterministic_reports(capsys):
    a = run(capsys, "simulate", "--symmetry", "Z", "--m", "2", "--shots", "5000", "--seed", "42")[1]
    b = run(capsys, "simulate", "--symmetry", "Z", "--m", "2", "--shots", "5000", "--seed", "42")[1]
    assert a == b


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["bounds"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["--seed", "abc", "reproduce-tables"])
    assert exc.value.code == 2
