import json
import math
import subprocess
import sys

import pytest

from gnslab.cli import EXIT_ERROR, EXIT_FAIL, EXIT_OK, build_parser, run


def call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestParams:
    def test_json(self, capsys):
        code, out, _ = call(capsys, "params", "--format", "json")
        assert code == EXIT_OK
        data = json.loads(out)
        assert data["two_t"] == 4.0 and data["theta"] == pytest.approx(1 / 3)
        assert data["lemma22"]["delta_1"] == pytest.approx(math.pi / 3)
        assert data["corollary"]["cor_power"] == pytest.approx(0.5)
        assert data["moment_range"] == [1.0, 2.0]

    def test_text(self, capsys):
        code, out, _ = call(capsys, "params", "--n", "3", "--t", "2")
        assert code == EXIT_OK and "n_s = 5" in out

    def test_out_of_range(self, capsys):
        code, _, err = call(capsys, "params", "--n", "3", "--t", "3")
        assert code == EXIT_ERROR
        assert "1 < t < (2n+1)/(2n-3)" in err

    def test_output_file(self, capsys, tmp_path):
        path = tmp_path / "p.json"
        assert run(["params", "--format", "json", "--output", str(path)]) == EXIT_OK
        assert json.loads(path.read_text())["n"] == 2


class TestUsage:
    @pytest.mark.parametrize("argv", [[], ["bogus"], ["params", "--n", "two"], ["report", "--rel-tol", "-1"],
                                      ["scan", "--eps-grid", "a,b"], ["report", "--family", "{bad"],
                                      ["report", "--family", '{"kind": "nope"}'], ["params", "--format", "xml"]])
    def test_usage_errors(self, capsys, argv):
        assert run(argv) == EXIT_ERROR

    def test_small_budget(self, capsys):
        code, _, err = call(capsys, "params", "--budget", "3")
        assert code == EXIT_ERROR and "budget" in err

    def test_help(self, capsys):
        assert run(["--help"]) == EXIT_OK

    def test_eps_grid_forms(self):
        parser = build_parser()
        assert parser.parse_args(["scan", "--eps-grid", "0.01,0.1"]).eps_grid == [0.01, 0.1]
        grid = parser.parse_args(["scan", "--eps-grid", "logspace:1e-3,1e-1,3"]).eps_grid
        assert grid == pytest.approx([1e-3, 1e-2, 1e-1])
        assert len(parser.parse_args(["scan", "--eps-grid", "default"]).eps_grid) == 9


class TestCommands:
    def test_report_json(self, capsys):
        code, out, _ = call(capsys, "report", "--eps", "0.05", "--format", "json")
        assert code == EXIT_OK
        data = json.loads(out)
        assert data["delta_hat"] > 0 and data["thm11_dist"] > 0
        assert set(data["lq_norms"]) == {"4", "6"}

    def test_report_csv(self, capsys):
        code, out, _ = call(capsys, "report", "--eps", "0.05", "--format", "csv",
                            "--family", '{"kind": "tail_tilt", "params": {"k": 3}}')
        assert code == EXIT_OK
        header, row = out.strip().split("\r\n")
        assert "delta_hat" in header.split(",") and len(header.split(",")) == len(row.split(","))

    def test_verify_identity(self, capsys):
        code, out, _ = call(capsys, "verify-identity", "--n", "3", "--t", "2", "--format", "json")
        assert code == EXIT_OK and json.loads(out)["passed"] is True

    def test_verify_identity_signed(self, capsys):
        code, _, err = call(capsys, "verify-identity", "--family", '{"kind": "mass_shift"}')
        assert code == EXIT_ERROR and "positive" in err

    def test_scan_writes_files(self, capsys, tmp_path):
        code, out, err = call(capsys, "scan", "--eps-grid", "0.01,0.03,0.1", "--output", str(tmp_path),
                              "--timestamp", "T0")
        assert code == EXIT_OK
        assert "slope[delta_hat]" in out and "V1: PASS" in out
        assert sorted(p.name for p in tmp_path.iterdir()) == ["multiplicative_bump_2_3_T0.csv", "multiplicative_bump_2_3_T0.json"]

    def test_scan_failure_exit_code(self, capsys):
        code, out, _ = call(capsys, "scan", "--eps-grid", "0.01,0.03,0.1", "--budget", "100", "--format", "json")
        assert code == EXIT_FAIL
        assert all(p["error"] for p in json.loads(out)["points"])

    def test_be_scan_csv(self, capsys):
        code, out, _ = call(capsys, "be-scan", "--eps-grid", "0.01,0.1", "--format", "csv")
        assert code == EXIT_OK
        assert out.count("\r\n") == 3 and "grad_dist" in out

    def test_selftest(self, capsys):
        code, out, _ = call(capsys, "selftest")
        assert code == EXIT_OK and "FAIL" not in out

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "gnslab", "params", "--format", "json"], capture_output=True, text=True)
        assert proc.returncode == 0 and json.loads(proc.stdout)["s"] == 1.0
