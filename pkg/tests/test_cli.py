import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from ermrer.cli import main, parse_grid

import oracles


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def write_config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def run_json(capsys, argv):
    code = main(argv)
    return code, json.loads(capsys.readouterr().out)


class TestGrid:
    def test_parse(self):
        g = parse_grid("0.01:10:200")
        assert g.size == 200 and g[0] == pytest.approx(0.01) and g[-1] == pytest.approx(10)

    def test_bad_grid_exit_code(self, tmp_path):
        assert main(["figure-example1", "--lambda-grid", "1:0:5", "--out", str(tmp_path)]) == 2
        assert main(["figure-example1", "--lambda-grid", "oops", "--out", str(tmp_path)]) == 2


class TestFigureExample1:
    def test_default_files_match_closed_forms(self, tmp_path):
        assert main(["figure-example1", "--out", str(tmp_path)]) == 0
        for q in (0.75, 0.5, 0.25):
            head, data = read_csv(tmp_path / f"example1_q{q:g}.csv")
            assert head == ["lambda", "k1", "k2", "k3"]
            assert data.shape == (200, 4)
            for lam, k1, k2, k3 in data:
                assert abs(k1 - oracles.ex1_k1(q, lam)) <= 1e-10
                assert abs(k2 - oracles.ex1_k2(q, lam)) <= 1e-10
                assert abs(k3 - oracles.ex1_k3(q, lam)) <= 1e-10

    def test_variance_peak_for_quarter(self, tmp_path):
        peak = oracles.ex1_k2_peak_lambda(0.25)
        assert main(["figure-example1", "--q", "0.25", "--lambda-grid", f"{peak}:{peak}:1",
                     "--out", str(tmp_path)]) == 0
        _, data = read_csv(tmp_path / "example1_q0.25.csv")
        assert data[0, 2] == pytest.approx(0.25, abs=1e-15)
        assert data[0, 0] == pytest.approx(0.910239, abs=1e-6)

    def test_shapes(self, tmp_path):
        assert main(["figure-example1", "--q", "0.5,0.25", "--out", str(tmp_path)]) == 0
        _, half = read_csv(tmp_path / "example1_q0.5.csv")
        # grid ascends in lambda, so k2 decreasing as lambda decreases means increasing here
        assert np.all(np.diff(half[:, 2]) > 0)
        _, quarter = read_csv(tmp_path / "example1_q0.25.csv")
        j = int(np.argmax(quarter[:, 2]))
        assert 0 < j < quarter.shape[0] - 1
        assert np.all(np.diff(quarter[: j + 1, 2]) > 0)
        assert np.all(np.diff(quarter[j:, 2]) < 0)

    def test_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["figure-example1", "--out", str(a)]) == 0
        assert main(["figure-example1", "--out", str(b)]) == 0
        for q in (0.75, 0.5, 0.25):
            name = f"example1_q{q:g}.csv"
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_invalid_q(self, tmp_path):
        assert main(["figure-example1", "--q", "1.5", "--out", str(tmp_path)]) == 2


class TestSolve:
    def test_defaults(self, capsys):
        code, doc = run_json(capsys, ["solve"])
        assert code == 0
        assert doc["posterior"]["probs"] == pytest.approx([0.731059, 0.268941], abs=1e-6)
        assert doc["optimality"]["coherent"] is True

    def test_point_mass_risk(self, capsys, tmp_path):
        cfg = write_config(tmp_path, {"measure": {"kind": "counting", "m": 3},
                                      "risk": {"values": [None, 0.2, None]}, "lambda": 0.5})
        code, doc = run_json(capsys, ["solve", "--config", cfg])
        assert code == 0 and doc["posterior"]["probs"] == [0.0, 1.0, 0.0]

    def test_samples_and_delta_epsilon(self, capsys, tmp_path):
        cfg = write_config(tmp_path, {"measure": {"kind": "probability", "weights": [0.5, 0.5]},
                                      "risk": {"values": [0.0, 1.0]}, "lambda": 1.0,
                                      "delta": 0.5, "epsilon": 0.1})
        code, doc = run_json(capsys, ["solve", "--config", cfg, "--samples", "20", "--seed", "3"])
        assert code == 0
        assert len(doc["samples"]) == 20
        assert doc["delta_epsilon"]["lam"] < 1 / math.log(9)

    def test_dataset_risk(self, capsys, tmp_path):
        (tmp_path / "data.csv").write_text("x0,y\n1,2\n2,4\n")
        cfg = write_config(tmp_path, {"measure": {"kind": "counting", "m": 2},
                                      "risk": {"dataset": "data.csv", "coords": [[2.0], [1.0]]},
                                      "lambda": 1.0})
        code, doc = run_json(capsys, ["solve", "--config", cfg])
        assert code == 0
        assert doc["optimality"]["erm_solutions"] == [0]

    def test_malformed_config(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["solve", "--config", str(bad)]) == 2
        assert main(["solve", "--config", write_config(tmp_path, {"risk": {"values": [0]}})]) == 2

    def test_infeasible(self, tmp_path):
        assert main(["solve", "--lambda", "-1"]) == 3


class TestSweep:
    def test_cumulants(self, capsys):
        assert main(["sweep", "--lambda-grid", "0.1:1:3"]) == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert lines[0] == "lambda,k0,k1,k2,k3" and len(lines) == 4

    def test_profile(self, capsys):
        assert main(["sweep", "--lambda-grid", "0.1:1:3", "--profile"]) == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert lines[0] == "lambda,k1,k2,k3,n_size,p_n,p_lstar"
        assert float(lines[1].split(",")[0]) == pytest.approx(1.0)


class TestGenError:
    MIRROR = {"measure": {"kind": "probability", "weights": [0.5, 0.5]},
              "prior": {"risks": [[0.0, 1.0], [1.0, 0.0]], "probs": [0.5, 0.5]},
              "lambda": 1.0}

    def test_mirror(self, capsys, tmp_path):
        code, doc = run_json(capsys, ["gen-error", "--config", write_config(tmp_path, self.MIRROR)])
        assert code == 0
        assert abs(doc["difference"]) <= 1e-12
        assert doc["expected_sensitivity"] == pytest.approx(doc["gen_error"], abs=1e-15)

    def test_point_mass(self, capsys, tmp_path):
        cfg = dict(self.MIRROR, prior={"risks": [[0.0, 1.0]]})
        code, doc = run_json(capsys, ["gen-error", "--config", write_config(tmp_path, cfg)])
        assert code == 0
        assert doc["gen_error"] == 0 and doc["mutual_info"] == 0 and doc["lautum_info"] == 0

    def test_missing_prior(self, tmp_path):
        cfg = {k: v for k, v in self.MIRROR.items() if k != "prior"}
        assert main(["gen-error", "--config", write_config(tmp_path, cfg)]) == 2
        assert main(["gen-error"]) == 2

    def test_infeasible_is_a_valid_outcome(self, capsys, tmp_path):
        cfg = write_config(tmp_path, self.MIRROR)
        code, doc = run_json(capsys, ["gen-error", "--config", cfg, "--lambda", "-1"])
        assert code == 0 and doc["gen_error"] == math.inf


class TestVerify:
    def test_empty_selection(self, capsys):
        assert main(["verify", "--only", ""]) == 0
        assert "no checks selected" in capsys.readouterr().out

    def test_selected_checks_pass(self, capsys):
        assert main(["verify", "--only", "agadir,jeffrey,type2"]) == 0

    def test_injected_fault(self, capsys):
        assert main(["verify", "--only", "jeffrey", "--inject-fault", "jeffrey-sign"]) == 1
        assert "FAIL" in capsys.readouterr().out

    def test_unknown_check(self):
        assert main(["verify", "--only", "nope"]) == 2

    def test_module_entry_point(self):
        out = subprocess.run([sys.executable, "-m", "ermrer", "solve"], capture_output=True,
                             text=True, check=True)
        assert json.loads(out.stdout)["posterior"]["lambda"] == 1.0
