import json
import os

import pytest

from borelsum import cli


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_all_on_euler(spec_path, tmp_path, capsys):
    out = tmp_path / "r.json"
    code, _, err = run(["--spec", spec_path("euler"), "--cmd", "all", "--x", "8,12", "--out", str(out)], capsys)
    assert code == 0, err
    rep = json.loads(out.read_text())
    assert "S_1" in rep["stokes"]
    names = [v["name"] for v in rep["verification"]]
    assert "jump_residual" in names
    assert all("tol" in v for v in rep["verification"])


def test_n4_violation_exit_2(spec_path, tmp_path, capsys):
    d = json.load(open(spec_path("linear")))
    d["beta"] = [[0.5, 0.0]]
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(d))
    code, _, err = run(["--spec", str(p)], capsys)
    assert code == 2 and "n4 violated" in err


def test_parse_error_has_line(tmp_path, capsys):
    p = tmp_path / "broken.json"
    p.write_text('{"n": 1,\n "lambda": [[1, 0]]\n "beta": []}')
    code, _, err = run(["--spec", str(p)], capsys)
    assert code == 2 and "broken.json:3:" in err


def test_smallness_guard_exit_2(spec_path, capsys):
    code, _, err = run(["--spec", spec_path("nonlinear"), "--cmd", "sum", "--C", "50", "--x", "3"], capsys)
    assert code == 2 and "k = (1,)" in err and "x = 3" in err


def test_deterministic_json(spec_path, tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert run(["--spec", spec_path("linear"), "--cmd", "sum", "--x", "10,12", "--out", str(p)], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_threads_do_not_change_bytes(spec_path, tmp_path, capsys, monkeypatch):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(["--spec", spec_path("linear"), "--cmd", "sum", "--x", "9,10,11", "--out", str(a)], capsys)
    monkeypatch.setenv("BORELSUM_THREADS", "3")
    run(["--spec", spec_path("linear"), "--cmd", "sum", "--x", "9,10,11", "--out", str(b)], capsys)
    assert a.read_bytes() == b.read_bytes()


def test_empty_verification_is_valid_json(spec_path, capsys):
    code, out, _ = run(["--spec", spec_path("linear"), "--cmd", "borel"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["verification"] == [] and rep["sums"] == []


def test_csv_tables(spec_path, tmp_path, capsys):
    d = tmp_path / "csv"
    code, _, _ = run(["--spec", spec_path("two_eigen"), "--cmd", "borel", "--N", "40",
                      "--format", "csv", "--out", str(d)], capsys)
    assert code == 0
    rep = json.loads((d / "report.json").read_text())
    rows = (d / "germs.csv").read_text().splitlines()
    assert len(rows) == 1 + len(rep["germs"]) and len(rep["germs"]) >= 2


def test_germ_rows_match_table():
    rep = {"germs": [{"location": [float(i), 0.0], "exponent": [0.0, 0.0], "log_flag": False, "deriv_order": 1,
                      "fitted_exponent": 0.0, "S_j": None} for i in (1, 2, 3)],
           "stokes": {}, "sums": [], "verification": [], "hierarchy": None}
    assert len(cli.csv_tables(rep)["germs"]) == 4


def test_config_file_and_flag_override(spec_path, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"spec": spec_path("linear"), "N": 30, "x": [8.0], "cmd": "sum"}))
    c = cli.make_config(["--config", str(cfg), "--N", "44"])
    assert c.N == 44 and c.x == [8.0] and c.cmd == "sum"


def test_bad_config_key(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(cli.InputError):
        cli.make_config(["--config", str(cfg)])


def test_named_check(spec_path, capsys):
    code, out, _ = run(["--spec", spec_path("euler"), "--cmd", "verify", "--check", "algebra"], capsys)
    rep = json.loads(out)
    assert code == 0 and any(v["name"] == "check_algebra" and v["passed"] for v in rep["verification"])


def test_tol_scale_reaches_entries(spec_path, capsys):
    code, out, _ = run(["--spec", spec_path("euler"), "--cmd", "gen", "--tol-scale", "10"], capsys)
    rep = json.loads(out)
    assert rep["verification"][0]["tol"] == pytest.approx(1e-9)
