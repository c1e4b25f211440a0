import csv
import io
import json
import shutil
import subprocess
import sys

import pytest

from kgspec.cli import EXIT_INVALID, EXIT_IO, EXIT_OK, EXIT_VERIFY, main, parse_config, path_from_spec
from kgspec.graphfile import bundled_path


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv, "--format", "json")
    return code, json.loads(out)


@pytest.mark.parametrize("name", ["o2", "flip23", "trivial11", "twovertex", "skew2v"])
def test_validate_ok(capsys, name):
    code, doc = run_json(capsys, "validate", str(bundled_path(name)))
    assert code == EXIT_OK
    assert doc["result"]["valid"] is True
    assert doc["schema"] == 1 and doc["command"] == "validate" and doc["graph"] == name


def test_validate_broken(capsys):
    code, doc = run_json(capsys, "validate", "broken-square")
    assert code == EXIT_INVALID
    assert doc["result"]["error"] == "NonBijectiveSquare"


def test_bundled_name_with_suffix(capsys):
    code, _, _ = run(capsys, "validate", "o2.kg")
    assert code == EXIT_OK


def test_parse_error_exit(tmp_path, capsys):
    bad = tmp_path / "bad.kg"
    bad.write_text("[vertices]\nv\n[edges]\ne one v v\n")
    code, _, err = run(capsys, "validate", str(bad))
    assert code == EXIT_IO
    assert "line 4" in err


def test_missing_file_exit(capsys):
    code, _, err = run(capsys, "info", "/nonexistent/graph.kg")
    assert code == EXIT_IO and "not found" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["frobnicate", "o2"],
        ["dirac", "o2", "--level", "0"],
        ["dirac", "flip23", "--J", "0,1"],
        ["commutators", "o2", "--pair", "e"],
        ["dirac", "o2", "--alpha", "1,2", "--alpha-list", "1,2,3"],
        ["dirac", "o2", "--alpha", "0,1"],
    ],
)
def test_usage_errors(capsys, argv):
    code, _, _ = run(capsys, *argv)
    assert code == EXIT_IO


def test_not_strongly_connected(tmp_path, capsys):
    p = tmp_path / "oneway.kg"
    p.write_text("[vertices]\nv\nw\n[edges]\nl 1 v v\nm 1 w w\nx 1 v w\n")
    assert run(capsys, "validate", str(p))[0] == EXIT_OK
    code, _, err = run(capsys, "info", str(p))
    assert code == EXIT_INVALID and "NotStronglyConnected" in err


def test_info_examples(capsys):
    code, doc = run_json(capsys, "info", "o2", "--level", "3")
    r = doc["result"]
    assert code == EXIT_OK
    assert r["rho"] == pytest.approx([2.0]) and r["kappa"] == {"v": pytest.approx(1.0)}
    assert r["dim_R"]["3"] == 8
    code, doc = run_json(capsys, "info", "flip23", "--level", "2")
    assert doc["result"]["rho"] == pytest.approx([2.0, 3.0], abs=1e-10)
    assert doc["result"]["dim_R"]["2"] == 36
    code, doc = run_json(capsys, "info", "twovertex")
    assert doc["result"]["kappa"] == {"u": pytest.approx(0.5), "w": pytest.approx(0.5)}
    assert doc["result"]["cuntz_krieger"]["passed"]


def test_dirac_examples(capsys):
    code, doc = run_json(capsys, "dirac", "o2", "--level", "3")
    assert code == EXIT_OK and doc["result"]["multiplicities"] == [1, 1, 2, 4]
    code, doc = run_json(capsys, "dirac", "flip23", "--level", "2")
    assert code == EXIT_OK and doc["result"]["multiplicities"] == [1, 5, 30]
    code, doc = run_json(capsys, "dirac", "trivial11", "--level", "2")
    assert code == EXIT_OK and doc["result"]["spectrum"] == [{"eigenvalue": 0.0, "multiplicity": 1}]


def test_dirac_explicit_alpha(capsys):
    code, doc = run_json(capsys, "dirac", "o2", "--level", "2", "--alpha-list", "1,2,5")
    assert code == EXIT_OK
    assert [s["eigenvalue"] for s in doc["result"]["spectrum"]] == [0.0, 2.0, 5.0]


def test_dirac_j_variant(capsys):
    code, doc = run_json(capsys, "dirac", "flip23", "--level", "1", "--J", "2,1")
    assert code == EXIT_OK
    assert doc["result"]["multiplicities"] == [1, 11]


def test_commutator_examples(capsys):
    code, doc = run_json(capsys, "commutators", "o2", "--level", "4", "--pair", "e:f", "--pair", "v:v")
    assert code == EXIT_OK
    ef, vv = doc["result"]["pairs"]
    assert all(row["norm"] <= 1e-12 for row in vv["tables"]["per_q"])
    assert all(row["passed"] for row in ef["tables"]["per_q"])
    code, doc = run_json(capsys, "commutators", "flip23", "--level", "3", "--pair", "b1:v")
    assert code == EXIT_OK


def test_commutator_pair_errors(capsys):
    assert run(capsys, "commutators", "twovertex", "--level", "5", "--pair", "uu:uw")[0] == EXIT_INVALID
    assert run(capsys, "commutators", "o2", "--level", "2", "--pair", "e:f")[0] == EXIT_IO
    assert run(capsys, "commutators", "o2", "--level", "4", "--pair", "e:zz")[0] == EXIT_IO


def test_default_pairs(capsys):
    code, doc = run_json(capsys, "commutators", "twovertex", "--level", "4")
    assert code == EXIT_OK
    assert len(doc["result"]["pairs"]) >= 5


def test_wavelets_and_decompose(capsys):
    code, doc = run_json(capsys, "wavelets", "flip23", "--level", "2")
    assert code == EXIT_OK
    assert [s["rank"] for s in doc["result"]["scales"]] == [5, 30]
    code, doc = run_json(capsys, "decompose", "o2", "--level", "3")
    assert code == EXIT_OK
    assert doc["result"]["decomposition"]["tables"]["dimensions"] == {"V0": 1, "W0": 1, "W1": 2, "W2": 4}


def test_tight_tolerance_fails_verification(capsys):
    code, doc = run_json(capsys, "decompose", "skew2v", "--level", "2", "--tol", "1e-30")
    assert code == EXIT_VERIFY and doc["passed"] is False


def test_text_and_csv(capsys):
    code, out, _ = run(capsys, "dirac", "o2", "--level", "2")
    assert code == EXIT_OK and out.startswith("kgspec dirac o2") and "PASS" in out
    code, out, _ = run(capsys, "decompose", "flip23", "--level", "2", "--format", "csv")
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["report", "check", "value", "tol", "passed"]
    assert all(r[4] == "True" for r in rows[1:])


def test_out_and_export(tmp_path, capsys):
    out = tmp_path / "r" / "dirac.json"
    code, stdout, _ = run(capsys, "dirac", "o2", "--level", "2", "--format", "json",
                          "--out", str(out), "--export", str(tmp_path / "ex"))
    assert code == EXIT_OK and stdout == ""
    assert json.loads(out.read_text())["command"] == "dirac"
    lines = (tmp_path / "ex" / "dirac_T2.coo").read_text().splitlines()
    assert lines and all(len(line.split()) == 3 for line in lines)
    code, _, _ = run(capsys, "wavelets", "o2", "--level", "2", "--export", str(tmp_path / "w"))
    assert (tmp_path / "w" / "W1.coo").exists()
    code, _, _ = run(capsys, "info", "o2", "--level", "1", "--export", str(tmp_path / "s"))
    assert (tmp_path / "s" / "S_e_level1.coo").exists()


def test_path_from_spec(flip23):
    g, _ = flip23
    assert path_from_spec(g, "r1,b2").edges == ("b2", "r1")
    assert path_from_spec(g, "v").is_vertex


def test_default_levels():
    assert parse_config(["commutators", "o2"]).level == 4
    assert parse_config(["dirac", "o2"]).level == 3


def test_json_is_deterministic(capsys):
    a = run(capsys, "dirac", "skew2v", "--level", "2", "--format", "json")[1]
    b = run(capsys, "dirac", "skew2v", "--level", "2", "--format", "json")[1]
    assert a == b


@pytest.mark.skipif(shutil.which("kgspec") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["kgspec", "validate", "o2"], capture_output=True, text=True)
    assert proc.returncode == 0


def test_module_entry():
    proc = subprocess.run([sys.executable, "-m", "kgspec", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "kgspec" in proc.stdout
