import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from odeworkbench.cli import main
from odeworkbench.mmio import read_matrix_market, write_matrix_market
from odeworkbench.taylor_system import SolverParams, build_L

SCHEMA = {"command", "config", "results", "verdicts", "versions", "outputs"}


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def load(out_dir, command):
    with open(os.path.join(out_dir, f"{command}.json")) as fh:
        return json.load(fh)


def write(path, text):
    path.write_text(text)
    return str(path)


class TestSpectra:
    def test_twisted_d20(self, capsys):
        code, out, _ = run(["spectra", "twisted:20"], capsys)
        doc = json.loads(out)
        assert code == 0 and set(doc) == SCHEMA
        res = doc["results"][0]
        assert res["mu"] == pytest.approx(-0.05, abs=1e-15)
        assert res["diagonalizability"] == "diagonalizable"

    def test_zero_matrix_file(self, tmp_path, capsys):
        p = tmp_path / "z.mtx"
        write_matrix_market(p, np.zeros((3, 3)))
        code, out, _ = run(["spectra", str(p)], capsys)
        res = json.loads(out)["results"][0]
        assert code == 0
        assert res["alpha"] == res["mu"] == res["rho"] == 0.0
        assert res["c_of_a"] == 1.0

    def test_hermitian_negdef_kappa_one(self, tmp_path, capsys, rng):
        X = rng.standard_normal((5, 5))
        p = tmp_path / "h.mtx"
        write_matrix_market(p, -(X @ X.T) - np.eye(5))
        _, out, _ = run(["spectra", str(p)], capsys)
        assert json.loads(out)["results"][0]["kappa_V"] == pytest.approx(1.0, abs=1e-8)

    def test_parse_error_exit_2(self, tmp_path, capsys):
        p = write(tmp_path / "bad.mtx", "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 q 3\n")
        code, _, err = run(["spectra", p], capsys)
        assert code == 2 and "line 3, column 3" in err

    def test_capacity_exit_3(self, capsys):
        code, _, err = run(["spectra", "zero:5000"], capsys)
        assert code == 3 and "capacity" in err


class TestExpnorm:
    def test_fig1_csv(self, tmp_path, capsys):
        out = str(tmp_path / "o")
        code, _, _ = run(["expnorm", "--out", out, "--samples", "101", "--svg"], capsys)
        assert code == 0
        with open(os.path.join(out, "expnorm.csv")) as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0]) == ["t", "norm_A", "norm_B", "mu_bound_A", "mu_bound_B"]
        nA = np.array([float(r["norm_A"]) for r in rows])
        nB = np.array([float(r["norm_B"]) for r in rows])
        assert nA[1:20].max() > 1
        assert np.all(nB <= 1 + 1e-15) and np.all(np.diff(nB) <= 1e-15)
        doc = load(out, "expnorm")
        for p in doc["outputs"]:
            assert os.path.exists(p)
        assert open(os.path.join(out, "expnorm.svg")).read().startswith("<svg")

    def test_same_matrix_identical_columns(self, tmp_path, capsys):
        out = str(tmp_path / "o")
        run(["expnorm", "fig1:A", "fig1:A", "--out", out, "--samples", "21"], capsys)
        with open(os.path.join(out, "expnorm.csv")) as fh:
            for r in csv.DictReader(fh):
                assert r["norm_A"] == r["norm_B"] and r["mu_bound_A"] == r["mu_bound_B"]


class TestFig2:
    def test_small_auto_sweep(self, tmp_path, capsys):
        out = str(tmp_path / "o")
        code, _, _ = run(["fig2", "--d-min", "10", "--d-max", "14", "--step", "2", "--params", "auto", "--out", out], capsys)
        assert code == 0
        with open(os.path.join(out, "fig2.csv")) as fh:
            rows = list(csv.DictReader(fh))
        assert [int(r["d"]) for r in rows] == [10, 12, 14]
        assert float(rows[0]["kappa_V"]) == pytest.approx(17.5352873756155, rel=1e-3)
        assert float(rows[0]["ref_kappa_V"]) == pytest.approx(17.5352873756155)
        assert all(float(r["kappa_L"]) <= float(r["kappa_C"]) for r in rows)
        doc = load(out, "fig2")
        assert "parameter policy" in doc["results"][0]["policy"]["note"]


LINEAR_ZERO = "A = zero:2\nx0 = [1, 2]\nT = 1\n"
SCALAR = "F0 = [0.05]\nF1 = [-1]\nF2 = [0.2]\nu_in = [0.5]\nT = 5\neps = 1e-4\n"


class TestEmulateCommand:
    def test_zero_matrix_p_meas(self, tmp_path, capsys):
        cfg = write(tmp_path / "z.cfg", LINEAR_ZERO)
        code, out, _ = run(["emulate", cfg], capsys)
        doc = json.loads(out)
        res = doc["results"][0]
        P = res["params"]
        assert code == 0
        assert res["p_meas"] == pytest.approx(P["p"] / (P["m"] + P["p"]))
        assert all(v["verdict"] in ("pass", "n/a") for v in doc["verdicts"])

    def test_export_roundtrip(self, tmp_path, capsys):
        cfg = write(tmp_path / "l.cfg", "A = [-1, 2; 0, -3]\nx0 = [1, 1]\nT = 1.5\nm = 2\np = 2\nk = 6\n")
        out = str(tmp_path / "o")
        code, _, _ = run(["emulate", cfg, "--out", out, "--export-L", "--solver", "sparse"], capsys)
        assert code == 0
        path = os.path.join(out, "L.mtx")
        L = read_matrix_market(path)
        ref = build_L(np.array([[-1.0, 2.0], [0.0, -3.0]]), SolverParams(h=0.75, m=2, p=2, k=6)).L
        assert abs(L - ref).max() == 0
        from odeworkbench.mmio import format_matrix_market

        assert format_matrix_market(L, "truncated-Taylor system L") == open(path).read()

    def test_exit_code_tracks_verdicts(self, tmp_path, capsys):
        # too-low order: the theorem checks go n/a, exit code must still follow the verdicts
        cfg = write(tmp_path / "f.cfg", "A = [-1, 2; 0, -3]\nx0 = [1, 1]\nT = 1.5\nm = 1\nk = 1\n")
        code, out, _ = run(["emulate", cfg], capsys)
        doc = json.loads(out)
        failed = [v for v in doc["verdicts"] if v["verdict"] == "fail"]
        assert code == (1 if failed else 0)
        assert any(v["verdict"] == "n/a" for v in doc["verdicts"])

    def test_failed_check_exit_1(self, tmp_path, capsys, monkeypatch):
        import odeworkbench.cli as cli
        from odeworkbench.emulator import _check

        real = cli.verify_truncation_lemmas
        monkeypatch.setattr(cli, "verify_truncation_lemmas", lambda *a, **k: real(*a, **k) + [_check("forced", 0.0, 1.0)])
        cfg = write(tmp_path / "z.cfg", LINEAR_ZERO)
        code, out, _ = run(["emulate", cfg], capsys)
        assert code == 1
        assert [v["name"] for v in json.loads(out)["verdicts"] if v["verdict"] == "fail"] == ["forced"]

    def test_unknown_key_exit_2(self, tmp_path, capsys):
        cfg = write(tmp_path / "u.cfg", LINEAR_ZERO + "colour = 3\n")
        code, _, err = run(["emulate", cfg], capsys)
        assert code == 2 and "line 4" in err

    def test_deterministic(self, tmp_path, capsys):
        cfg = write(tmp_path / "d.cfg", "A = [-1, 0.5; 0, -2]\nb = [0.1, 0]\nx0 = [1, 1]\nT = 2\neps = 1e-3\n")
        docs = []
        for name in ("a", "b"):
            out = str(tmp_path / name)
            run(["emulate", cfg, "--out", out], capsys)
            docs.append(open(os.path.join(out, "emulate.json")).read().replace(out, "OUT"))
        assert docs[0] == docs[1]


class TestCarlemanCommand:
    def test_scalar(self, tmp_path, capsys):
        cfg = write(tmp_path / "s.cfg", SCALAR)
        code, out, _ = run(["carleman", cfg], capsys)
        doc = json.loads(out)
        v = {c["name"]: c for c in doc["verdicts"]}
        assert code == 0
        assert v["truncation_eta1"]["verdict"] == "pass"
        assert v["normalized_output"]["actual"] <= 1e-4

    def test_refusal_exit_2(self, tmp_path, capsys):
        cfg = write(tmp_path / "r.cfg", "F0 = [0.5]\nF1 = [-1]\nF2 = [1]\nu_in = [1]\nT = 1\n")
        code, _, err = run(["carleman", cfg], capsys)
        assert code == 2 and "R =" in err


def test_verify_all_small(tmp_path, capsys):
    out = str(tmp_path / "v")
    code, _, _ = run(["verify-all", "--trials", "3", "--out", out], capsys)
    doc = load(out, "verify-all")
    assert code == 0
    groups = {v["group"] for v in doc["verdicts"]}
    assert groups == {"linear", "kreiss", "fig1", "carleman"}
    assert doc["results"][0]["cost_model"]["query_factor"] == 1000.0


def test_console_script_entry():
    r = subprocess.run([sys.executable, "-m", "odeworkbench.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "odeworkbench" in r.stdout
