import csv
import io
import json
import shutil
import subprocess
import sys

import pytest

from alphapc import cli

from conftest import DATA

EX3 = str(DATA / "examples" / "ex3.txt")
ATT48 = str(DATA / "tsplib" / "att48.tsp")


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_solve_csv(capsys):
    code, out, _ = run(capsys, "solve", EX3, "--alpha", "2", "--setting", "2HVSL")
    assert code == 0
    r = rows(out)
    assert r[0] == ["name", "|N|", "p", "alpha", "UB", "LB", "t", "nBC"]
    assert r[1][:6] == ["ex3", "3", "2", "2", "2", "2"]


def test_solve_text(capsys):
    code, out, _ = run(capsys, "solve", EX3, "--alpha", "2", "--output", "text")
    assert code == 0 and "status    Optimal" in out and "open      2 3" in out


def test_json_round_trip(capsys, tmp_path):
    sol = tmp_path / "sol.json"
    code, _, _ = run(capsys, "solve", ATT48, "-p", "40", "--alpha", "2", "--output", "json",
                     "--out", str(sol))
    assert code == 0
    d = json.loads(sol.read_text())
    assert d["instance"] == "att48" and len(d["open"]) == 40 and min(d["open"]) >= 1
    assert round(d["objective"], 2) == 485.06
    code, out, _ = run(capsys, "validate", ATT48, str(sol))
    assert code == 0 and out.startswith("ok")


def test_validate_wrong_cardinality(capsys, tmp_path):
    sol = tmp_path / "bad.json"
    sol.write_text(json.dumps({"instance": "ex3", "p": 2, "alpha": 2, "open": [2],
                               "objective": 2.0}))
    code, out, _ = run(capsys, "validate", EX3, str(sol))
    assert code == 1 and "cardinality" in out


def test_validate_objective_mismatch(capsys, tmp_path):
    sol = tmp_path / "off.json"
    sol.write_text(json.dumps({"alpha": 2, "open": [2, 3], "objective": 3.0}))
    code, out, _ = run(capsys, "validate", EX3, str(sol))
    assert code == 1 and "objective mismatch" in out


def test_bounds_example3(capsys):
    code, out, _ = run(capsys, "bounds", EX3, "--alpha", "2")
    d = json.loads(out)
    assert code == 0
    assert d["LBsharp"] == 2 and d["SemiRelax"] == 2 and d["CoverRadius"] == 2


def test_heur(capsys):
    code, out, _ = run(capsys, "heur", ATT48, "-p", "10", "--alpha", "2", "--seed", "4")
    d = json.loads(out)
    assert code == 0 and len(d["open"]) == 10 and d["objective"] >= 1592.11


@pytest.mark.parametrize("argv, msg", [
    (["solve", ATT48, "--alpha", "2"], "-p is required"),
    (["solve", ATT48, "-p", "2", "--alpha", "3"], "exceeds"),
    (["solve", ATT48, "-p", "2", "--alpha", "1", "--format", "foo"], "invalid choice"),
    (["solve", EX3, "-p", "2", "--alpha", "1"], "not accepted"),
    (["solve", str(DATA / "nope.tsp"), "-p", "2", "--alpha", "1"], "No such file"),
    (["solve", EX3], "--alpha"),
])
def test_usage_errors(capsys, argv, msg):
    with pytest.raises(SystemExit) as e:
        code = cli.main(argv)
        raise SystemExit(code)
    assert e.value.code == 1
    assert msg in capsys.readouterr().err


def test_parse_error_exit_code(capsys, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("3 2 1\n1 2 x\n2 3 1\n")
    code, _, err = run(capsys, "solve", str(bad), "--alpha", "1")
    assert code == 1 and "line 2" in err


def test_internal_error_exit_code(capsys, monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("kaput")
    monkeypatch.setattr(cli, "solve", boom)
    code, _, err = run(capsys, "solve", EX3, "--alpha", "2")
    assert code == 2 and "kaput" in err


def test_time_limit_is_success(capsys):
    code, out, _ = run(capsys, "solve", ATT48, "-p", "30", "--alpha", "2", "--time-limit", "0.2")
    assert code == 0 and rows(out)[1][6] == "TL"


def test_stdin(capsys, monkeypatch):
    monkeypatch.setattr(sys, "stdin", io.StringIO(open(EX3).read()))
    code, out, _ = run(capsys, "solve", "-", "--alpha", "2")
    assert code == 0 and rows(out)[1][0] == "stdin"


def test_pmed_uses_smaller_seed():
    cfg = cli.make_config("2HVSL", "pmed", 5.0, 0)
    assert cfg.num_init_apc2 == 10 and cfg.time_limit == 5.0
    assert cli.make_config("2HVSL", "tsplib", None, 0).num_init_apc2 == 100


def _manifest(tmp_path):
    shutil.copy(ATT48, tmp_path / "att48.tsp")
    shutil.copy(EX3, tmp_path / "ex3.txt")
    (tmp_path / "grid.ini").write_text(
        "[att48]\nfile = att48.tsp\nformat = tsplib\np = 40, 20  ; two sizes\nalpha = 2\n"
        "settings = 2HVSL 2HV\n\n[ex3]\nfile = ex3.txt\nalpha = 1, 2\n")
    return tmp_path / "grid.ini"


def test_bench_manifest(capsys, tmp_path):
    code, out, _ = run(capsys, "bench", str(_manifest(tmp_path)))
    assert code == 0
    r = rows(out)
    assert r[0][-1] == "setting"
    keys = [(x[0], x[2], x[3], x[-1]) for x in r[1:]]
    assert keys == [("att48", "40", "2", "2HVSL"), ("att48", "40", "2", "2HV"),
                    ("att48", "20", "2", "2HVSL"), ("att48", "20", "2", "2HV"),
                    ("ex3", "2", "1", "2HVSL"), ("ex3", "2", "2", "2HVSL")]
    assert [x[4] for x in r[1:5]] == ["485.06", "485.06", "1061.69", "1061.69"]


def test_bench_workers_same_rows(capsys, tmp_path):
    m = _manifest(tmp_path)
    _, one, _ = run(capsys, "bench", str(m))
    _, two, _ = run(capsys, "bench", str(m), "--workers", "2")
    strip = lambda t: [x[:6] + x[7:] for x in rows(t)]  # noqa: E731
    assert strip(one) == strip(two)


def test_bench_directory(capsys, tmp_path):
    shutil.copy(EX3, tmp_path / "b.txt")
    shutil.copy(EX3, tmp_path / "a.txt")
    code, out, _ = run(capsys, "bench", str(tmp_path), "--alpha-grid", "1,2",
                       "--settings", "2HVSL,1HSVL")
    r = rows(out)
    assert code == 0 and len(r) == 1 + 2 * 2 * 2
    assert [x[0] for x in r[1:]] == ["a"] * 4 + ["b"] * 4


def test_bench_bad_manifest(capsys, tmp_path):
    (tmp_path / "m.ini").write_text("[x]\nformat = tsplib\n")
    code, _, err = run(capsys, "bench", str(tmp_path / "m.ini"))
    assert code == 1 and "needs" in err


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "alphapc", "bounds", EX3, "--alpha", "2"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and json.loads(res.stdout)["CoverRadius"] == 2


def test_shipped_manifests_parse():
    jobs = cli.read_manifest(str(DATA / "bench" / "acceptance.ini"))
    assert len(jobs) == 4 * 2 + 2
    assert {(j.p, j.alpha) for j in jobs if "eil101" in j.path} == {(50, 2), (100, 2)}
