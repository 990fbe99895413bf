import json
import subprocess
import sys

import pytest

from naesat_rsb.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def json_out(text):
    return json.loads(text)


def csv_rows(text):
    lines = text.strip().splitlines()
    assert lines[0].startswith("# provenance: ")
    return lines[1].split(","), [l.split(",") for l in lines[2:]]


def test_gen_and_solve(tmp_path, capsys):
    f = tmp_path / "inst.json"
    code, _, _ = run(capsys, "gen", "--k", "3", "--d", "6", "--n", "12", "--seed", "1", "--out", str(f))
    assert code == 0 and f.exists()
    code, out, _ = run(capsys, "solve", "--in", str(f), "--no-timestamp")
    obj = json_out(out)
    assert code == 0
    assert (obj["E_min"], obj["n_minimizers"]) == (2, 16)
    assert obj["provenance"]["command"] == "solve"
    code, _, _ = run(capsys, "solve", "--in", str(f), "--cap", "10")
    assert code == 4


def test_gen_requires_out(capsys):
    code, _, err = run(capsys, "gen", "--k", "3", "--d", "3", "--n", "6")
    assert code == 2 and "--out" in err


def test_mc_deterministic_across_threads(capsys):
    args = ("mc", "--k", "3", "--d", "3", "--n", "9", "--trials", "20", "--seed", "4", "--no-timestamp")
    _, a, _ = run(capsys, *args, "--threads", "1")
    _, b, _ = run(capsys, *args, "--threads", "3")
    assert a == b


def test_tree_check(capsys):
    code, out, _ = run(capsys, "tree-check", "--trials", "20", "--seed", "2", "--no-timestamp")
    assert code == 0
    obj = json_out(out)
    assert obj["trees"] == 20 and obj["mismatches"] == 0


def test_sp_and_invalid_input(capsys):
    code, out, _ = run(capsys, "sp", "--k", "10", "--alpha", "709.8", "--y", "1.3862700062218676",
                       "--no-timestamp")
    assert code == 0
    assert json_out(out)["x"] == pytest.approx(0.0017989839142139312, rel=1e-10)
    code, _, _ = run(capsys, "sp", "--k", "3", "--alpha", "1.5", "--y", "-1.0")
    assert code == 2


def test_energy_curve_rows(capsys, tmp_path):
    f = tmp_path / "curve.csv"
    code, _, _ = run(capsys, "energy-curve", "--k", "10", "--c-grid", "2:20:20", "--csv", str(f),
                     "--no-timestamp")
    assert code == 0
    header, rows = csv_rows(f.read_text())
    assert len(rows) == 20 and "e_onersb" in header


def test_bounds_gap_positive(capsys):
    code, out, _ = run(capsys, "bounds", "--k", "10", "--alpha", "1774.45678223346", "--json",
                       "--no-timestamp")
    assert code == 0
    assert json_out(out)["gap"] > 0


def test_gardner_scan_crosses_one(capsys):
    grid = ("gardner", "--k", "8", "--alpha-grid", "150:500:8", "--no-timestamp")
    code, out, _ = run(capsys, *grid, "--json")
    assert code == 0
    bl = [r["branch_lambda"] for r in json_out(out)["rows"] if r["branch_lambda"] is not None]
    assert min(bl) < 1 < max(bl)
    code, out, _ = run(capsys, *grid, "--find-threshold")
    assert code == 0
    assert json_out(out)["alpha_ga"] == pytest.approx(275.19, rel=1e-3)


def test_perturb_direct(capsys):
    code, out, _ = run(capsys, "perturb", "--k", "3", "--d", "8", "--y", "2", "--zeta", "0.05",
                       "--direct", "--no-timestamp")
    assert code == 0
    obj = json_out(out)
    for key in ("phi_base", "phi_perturbed", "expansion", "residual", "branch_lambda"):
        assert key in obj
    assert abs(obj["residual"]) < abs(obj["expansion"])


def test_instability_table(capsys):
    code, out, _ = run(capsys, "instability", "--k", "8", "--alpha-grid", "150:500:6", "--json",
                       "--no-timestamp")
    assert code == 0
    row = json_out(out)["rows"][0]
    assert row["rel_diff"] < 1e-4


def test_byte_identical_outputs(capsys):
    args = ("bounds", "--k", "10", "--alpha", "3500", "--no-timestamp")
    _, a, _ = run(capsys, *args)
    _, b, _ = run(capsys, *args, "--threads", "4")
    assert a == b


def test_verify_clean_and_filtered(capsys):
    code, out, _ = run(capsys, "verify", "--filter", "gardner")
    assert code == 0
    assert "sp_core" not in out and "gardner" in out


def test_verify_reports_injected_fault(capsys):
    code, out, _ = run(capsys, "verify", "--filter", "sp_core", "--inject-fault", "S_ell")
    assert code != 0
    assert "A_l Q_l = G_l S_l" in out


def test_module_entry_point_exit_codes():
    def code(*argv):
        return subprocess.run([sys.executable, "-m", "naesat_rsb", *argv], capture_output=True).returncode
    assert code("sp", "--k", "3", "--alpha", "1.5", "--y", "-1") == 2
    # no root of Sigma anywhere on this grid, so no threshold
    assert code("gardner", "--k", "3", "--alpha-grid", "0.5:0.6:2", "--find-threshold") == 3
