import json

import numpy as np
import pytest

import helpers
from choquard import jsonio
from choquard.cli import main
from choquard.grid import make_grid, read_profile_csv, write_profile_csv


@pytest.fixture(scope="module")
def solved(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    path = d / "gs.json"
    assert main(["solve", "--p", "2.0", "--out", str(path)]) == 0
    return path


class TestSolve:
    def test_writes_state(self, solved):
        doc = json.loads(solved.read_text())
        for key in ("p", "mass", "lambda", "energy", "grid", "method", "iterations", "eq_residual", "q"):
            assert key in doc
        assert doc["lambda"] == pytest.approx(helpers.state(2.0).lam, rel=1e-12)

    def test_desk_grid_flags(self, tmp_path, capsys):
        out = tmp_path / "gs.json"
        code = main(["solve", "--p", "2.1", "--mass", "1.0", "--grid-n", "2000", "--r-max", "40",
                     "--method", "flow", "--out", str(out)])
        assert code == 0 and out.exists()
        doc = json.loads(out.read_text())
        assert doc["grid"]["n"] == 2000 and doc["grid"]["r_max"] == pytest.approx(40.0)
        assert "has not decayed" in capsys.readouterr().err

    def test_out_of_range(self, tmp_path, capsys):
        assert main(["solve", "--p", "2.5", "--out", str(tmp_path / "x.json")]) == 1
        assert "p out of range [2, 7/3)" in capsys.readouterr().err

    def test_methods_agree(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert main(["solve", "--p", "2.0", "--method", "fixpoint", "--out", str(a)]) == 0
        assert main(["solve", "--p", "2.0", "--method", "flow", "--out", str(b)]) == 0
        la, lb = (json.loads(x.read_text())["lambda"] for x in (a, b))
        assert la == pytest.approx(lb, rel=1e-5)

    def test_fixpoint_command(self, tmp_path):
        out = tmp_path / "f.json"
        assert main(["fixpoint-solve", "--p", "2.0", "--out", str(out)]) == 0
        assert json.loads(out.read_text())["method"] == "fixpoint"

    def test_missing_required(self, capsys):
        assert main(["solve", "--p", "2.0"]) == 1

    def test_config_file_and_override(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"solver": {"n": 3000}}))
        out = tmp_path / "gs.json"
        assert main(["solve", "--p", "2.0", "--config", str(cfg), "--out", str(out)]) == 0
        assert json.loads(out.read_text())["grid"]["n"] == 3000
        assert main(["solve", "--p", "2.0", "--config", str(cfg), "--grid-n", "2500", "--out", str(out)]) == 0
        assert json.loads(out.read_text())["grid"]["n"] == 2500

    def test_bad_config(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"solver": {"bogus": 1}}))
        assert main(["solve", "--p", "2.0", "--config", str(cfg), "--out", str(tmp_path / "o.json")]) == 1
        cfg.write_text("{not json")
        assert main(["solve", "--p", "2.0", "--config", str(cfg), "--out", str(tmp_path / "o.json")]) == 1

    def test_timestamp_optional(self, tmp_path):
        out = tmp_path / "t.json"
        assert main(["solve", "--p", "2.0", "--grid-n", "2000", "--timestamp", "--out", str(out)]) == 0
        assert "timestamp" in json.loads(out.read_text())

    def test_numerical_failure_exit(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"solver": {"max_iter": 2}}))
        assert main(["solve", "--p", "2.0", "--config", str(cfg), "--out", str(tmp_path / "o.json")]) == 2


class TestSpectrum:
    def test_files_and_verdict(self, solved, tmp_path, capsys):
        out = tmp_path / "spec"
        assert main(["spectrum", "--in", str(solved), "--ell", "0,1,2", "--k", "6", "--out", str(out)]) == 0
        for ell in (0, 1, 2):
            doc = json.loads((out / f"spectrum_ell{ell}.json").read_text())
            assert doc["ell"] == ell and len(doc["eigenvalues"]) == 6
        assert "cosine_to_Qprime" in json.loads((out / "spectrum_ell1.json").read_text())
        assert (out / "spectrum_lminus_ell0.json").exists()
        assert "NONDEGENERATE: true" in capsys.readouterr().out

    def test_missing_input(self, tmp_path):
        assert main(["spectrum", "--in", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == 1

    def test_sector_scope(self, solved, tmp_path, capsys):
        assert main(["spectrum", "--in", str(solved), "--ell", "5", "--out", str(tmp_path)]) == 1
        assert "sector out of verified scope" in capsys.readouterr().err


class TestSweepCommand:
    def test_single_step(self, tmp_path, capsys):
        out = tmp_path / "s.csv"
        assert main(["sweep", "--p-from", "2.0", "--p-to", "2.0", "--steps", "1", "--out", str(out)]) == 0
        assert len(out.read_text().splitlines()) == 2
        assert "LARGEST PASSING p: 2" in capsys.readouterr().out

    def test_beyond_guard(self, tmp_path):
        assert main(["sweep", "--p-from", "2.0", "--p-to", "2.4", "--out", str(tmp_path / "s.csv")]) == 1

    def test_partial_on_failure(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"solver": {"n": 2000, "max_iter": 40}}))
        out = tmp_path / "s.csv"
        code = main(["sweep", "--p-from", "2.0", "--p-to", "2.2", "--steps", "3", "--no-spectra",
                     "--no-multistart", "--config", str(cfg), "--out", str(out)])
        assert code == 2
        assert out.read_text().startswith("p,lambda,m,")


class TestVerify:
    def test_all_pass(self, solved, tmp_path, capsys):
        rep = tmp_path / "v.json"
        assert main(["verify", "--in", str(solved), "--out", str(rep)]) == 0
        assert "VERIFIED: true" in capsys.readouterr().out
        assert json.loads(rep.read_text())["passed"] is True

    def test_corrupted_lambda(self, solved, tmp_path, capsys):
        doc = json.loads(solved.read_text())
        doc["lambda"] *= 2
        bad = tmp_path / "bad.json"
        jsonio.dump(doc, bad)
        assert main(["verify", "--in", str(bad), "--checks", "pohozaev"]) == 3
        assert "FAIL pohozaev" in capsys.readouterr().out

    def test_selected_checks(self, solved, capsys):
        assert main(["verify", "--in", str(solved), "--checks", "pohozaev,decay"]) == 0
        out = capsys.readouterr().out
        assert "pohozaev_K" in out and "decay_r2" in out
        assert "euler_lagrange" not in out and "ift" not in out

    def test_unknown_check(self, solved):
        assert main(["verify", "--in", str(solved), "--checks", "magic"]) == 1

    def test_garbage_input(self, tmp_path):
        bad = tmp_path / "g.json"
        bad.write_text("[1, 2")
        assert main(["verify", "--in", str(bad)]) == 1


class TestRearrange:
    def test_csv(self, tmp_path, capsys):
        g = make_grid(500, 20.0)
        src = tmp_path / "u.csv"
        write_profile_csv(g.sample(lambda r: np.exp(-((r - 5) ** 2))), src)
        out = tmp_path / "us.csv"
        assert main(["rearrange", "--in", str(src), "--out", str(out)]) == 0
        us = read_profile_csv(out)
        assert np.all(np.diff(us.values) <= 0)
        text = capsys.readouterr().out
        assert "K_ok=True" in text and "D_ok=True" in text

    def test_negative_rejected(self, tmp_path):
        g = make_grid(100, 10.0)
        src = tmp_path / "u.csv"
        write_profile_csv(g.sample(lambda r: -np.exp(-r)), src)
        assert main(["rearrange", "--in", str(src), "--out", str(tmp_path / "o.csv")]) == 1

    def test_state_input(self, solved, tmp_path):
        assert main(["rearrange", "--in", str(solved), "--out", str(tmp_path / "o.csv")]) == 0


def test_no_command():
    assert main([]) == 1
