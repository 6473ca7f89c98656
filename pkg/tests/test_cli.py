import json
import subprocess
import sys

from rigidrec.cli import main, run_subcommand


def test_concentration_exhaustive(capsys):
    assert main(["concentration-audit", "--k", "2", "--r", "4", "--exhaustive", "--workers", "1"]) == 0
    assert "violations 0" in capsys.readouterr().out


def test_sets_density_prints_rational(capsys):
    assert main(["sets", "density", "--periodic", "2:0"]) == 0
    assert capsys.readouterr().out.strip() == "1/2"


def test_malformed_json_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["measures", "fourier", "--measure", str(bad)]) == 2
    assert main(["systems", "correlation", "--system", str(bad)]) == 2
    assert main(["measures", "fourier", "--measure", str(tmp_path / "missing.json")]) == 2


def test_invalid_measure_exit_2(tmp_path):
    f = tmp_path / "m.json"
    f.write_text(json.dumps({"atoms": [{"x": "1/2", "w": "1/3"}]}))
    assert main(["measures", "fourier", "--measure", str(f)]) == 2


def test_unknown_subcommand_exit_2(capsys):
    assert main(["frobnicate"]) == 2
    assert "usage" in capsys.readouterr().err


def test_bad_periodic_spec_exit_2():
    assert main(["sets", "density", "--periodic", "x"]) == 2


def test_measures_rigidity_writes_csv(tmp_path):
    f = tmp_path / "m.json"
    f.write_text(json.dumps({"atoms": [{"x": "0", "w": "1/2"}, {"x": "1/2", "w": "1/2"}]}))
    code, rep = run_subcommand(["measures", "rigidity", "--measure", str(f), "--S", "1,2", "--out", str(tmp_path / "o")])
    assert code == 0
    assert (tmp_path / "o" / "residuals.csv").read_text().splitlines()[0] == "index,n,residual"
    assert rep.data["continuity_defect"] == "1/2"


def test_popdiff_audit_violation_exit_1(capsys):
    # A = Z/5 makes every difference popular, so B = Z/5 sits inside P_c(A)
    assert main(["popdiff", "audit", "--N", "5", "--members", "0,1,2,3,4", "--c", "1/5"]) == 1
    assert "VIOLATION" in capsys.readouterr().err
    assert main(["popdiff", "audit", "--N", "5", "--members", "0,1", "--c", "2/5"]) == 0


def test_popdiff_guard_exit_2():
    assert main(["popdiff", "audit", "--N", "100", "--members", "0"]) == 2


def test_kronecker_certify():
    code, rep = run_subcommand(["kronecker", "certify", "--b", "16", "--r", "8", "--targets", "20"])
    assert code == 0 and rep.properties["certified_sup_bound"]["passed"]


def test_family_and_pipeline_roundtrip(tmp_path):
    out = tmp_path / "fam"
    assert main(["kronecker", "family", "--b", "4", "--r", "2", "--M", "1", "--out", str(out)]) == 0
    assert main(["systems", "battery", "--out", str(out)]) == 0
    args = ["pipeline", "run", "--family", str(out / "family.json"), "--battery", str(out / "battery.json"),
            "--window", "2000", "--stages", "2"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "report.json").read_bytes()
    assert a == (tmp_path / "b" / "report.json").read_bytes()
    rep = json.loads(a)
    assert rep["schema"] == "rigidrec.audit/1" and rep["passed"]
    assert (tmp_path / "a" / "rigidity.csv").exists()
    assert "total" in json.loads((tmp_path / "a" / "timings.json").read_text())


def test_classify_evens(capsys):
    assert main(["classify", "--periodic", "2:0", "--window", "200", "--cyclic", "2"]) == 0
    out = capsys.readouterr().out
    assert "R1: False" in out and "R4: False" in out


def test_systems_correlation(tmp_path, capsys):
    f = tmp_path / "s.json"
    f.write_text(json.dumps({"size": 4, "perm": [1, 2, 3, 0], "D": [0, 1]}))
    assert main(["systems", "correlation", "--system", str(f), "--n", "1"]) == 0
    assert capsys.readouterr().out.strip() == "1\t1/4"


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "rigidrec", "sets", "diff", "--periodic", "5:0,1"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == "5:0,1,4"
