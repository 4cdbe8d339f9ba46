"""
Tests for cli.py - subcommands, output files and exit codes
"""

import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

import cli
from models import MaximizerReport
from schema_generator import load_schema
from services.maximizer_service import MaximizerService
from services.oracle_service import OracleService
from utils.output import read_csv_rows
from utils.responses import fail_response, pass_response


class TestUsage:
    def test_no_command(self):
        assert cli.run([]) == cli.EXIT_USAGE

    def test_help(self, capsys):
        assert cli.run(["--help"]) == cli.EXIT_OK
        assert "simulate" in capsys.readouterr().out

    def test_unknown_command(self):
        assert cli.run(["teleport"]) == cli.EXIT_USAGE

    def test_bad_range(self):
        assert cli.run(["fk", "--lambda", "1:0:0.1"]) == cli.EXIT_USAGE
        assert cli.run(["fk", "--lambda", "a:b:c"]) == cli.EXIT_USAGE

    def test_tiers_exclusive(self):
        assert cli.run(["verify", "--quick", "--full"]) == cli.EXIT_USAGE

    def test_bad_threads(self):
        assert cli.run(["--threads", "0", "fk0"]) == cli.EXIT_USAGE


class TestArgumentTypes:
    def test_parse_range(self):
        assert cli.parse_range("0.5") == [0.5]
        assert cli.parse_range("-1:1:0.5") == [-1.0, -0.5, 0.0, 0.5, 1.0]

    def test_parse_lists(self):
        assert cli.parse_int_list("2,3,4") == [2, 3, 4]
        assert cli.parse_name_list(" x2, d1 ,") == ["x2", "d1"]


class TestAnalyticCommands:
    def test_fk0_text(self, capsys):
        assert cli.run(["fk0", "--k", "2", "--ell0", "75", "--digits", "20"]) == cli.EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 2
        config = json.loads(lines[0][len("# config: "):])
        assert config["subcommand"] == "fk0"
        assert config["params"]["ell0"] == 75
        value, bound = lines[1].split(",")
        assert value.startswith("1.83047032142276")
        assert 0 < float(bound) < 1e-17

    def test_fk0_text_one_line_per_k(self, capsys):
        assert cli.run(["fk0", "--k", "2,4,6"]) == cli.EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("# config: ")
        assert [len(line.split(",")) for line in lines[1:]] == [2, 2, 2]
        assert lines[2].startswith("3.51485131998097")

    def test_fk0_csv_has_config_header(self, tmp_path):
        out = tmp_path / "fk0.csv"
        assert cli.run(["fk0", "--k", "2,4", "--format", "csv", "--out", str(out)]) == cli.EXIT_OK
        text = out.read_text()
        assert text.startswith("# config: ")
        config = json.loads(text.splitlines()[0][len("# config: "):])
        assert config["subcommand"] == "fk0"
        assert config["params"]["k"] == [2, 4]
        header, rows = read_csv_rows(str(out))
        assert header[:2] == ["k", "value"]
        assert [r[0] for r in rows] == ["2", "4"]

    def test_wright_table(self, tmp_path):
        out = tmp_path / "wright.csv"
        assert cli.run(["wright", "--max-ell", "5", "--digits", "20", "--out", str(out)]) == cli.EXIT_OK
        header, rows = read_csv_rows(str(out))
        assert header == ["ell", "w_ell"]
        assert len(rows) == 6
        # w_1 = M_1 = sqrt(pi / 8)
        assert float(rows[1][1]) == pytest.approx(0.6266570686577501, rel=1e-12)
        for _, w in rows:
            mantissa, exponent = w.split("e")
            assert len(mantissa.replace(".", "").lstrip("-")) == 20
            int(exponent)

    def test_wright_diagnostic_columns(self, tmp_path):
        out = tmp_path / "wright.csv"
        assert cli.run(["wright", "--max-ell", "3", "--diagnostics", "--out", str(out)]) == cli.EXIT_OK
        header, rows = read_csv_rows(str(out))
        assert header == ["ell", "w_ell", "M", "bound_ratio"]
        assert rows[0][3] == ""
        assert 0 < float(rows[2][3]) < 1

    def test_fk_identity_at_zero(self, tmp_path):
        out = tmp_path / "fk.csv"
        assert cli.run(["fk", "--k", "2,3", "--lambda", "0", "--out", str(out)]) == cli.EXIT_OK
        header, rows = read_csv_rows(str(out))
        assert header == ["lambda", "f_2", "f_3", "rel_error"]
        assert float(rows[0][2]) == pytest.approx(2.0, rel=1e-14)

    def test_maximize_json(self, tmp_path, mocker):
        report = MaximizerReport(
            lambda_star=0.98, g_star=1.01, bracket=(0.9, 1.1), unimodal_observed=True,
            grid_step=0.05, grid_argmax=1.0, window=(-2.0, 4.0), tol=1e-6,
        )
        mocker.patch.object(MaximizerService, "find_maximizer", return_value=report)
        out = tmp_path / "max.json"
        assert cli.run(["maximize", "--out", str(out)]) == cli.EXIT_OK
        document = json.loads(out.read_text())
        assert document["config"]["subcommand"] == "maximize"
        assert document["lambda_star"] == 0.98
        assert document["g_star"] == 1.01
        assert document["report"]["bracket"] == [0.9, 1.1]


class TestSimulate:
    def test_json_document(self, tmp_path):
        out = tmp_path / "sim.json"
        code = cli.run(["simulate", "--n", "2000", "--reps", "5", "--seed", "1", "--out", str(out)])
        assert code == cli.EXIT_OK
        document = json.loads(out.read_text())
        assert document["config"]["seed"] == 1
        assert document["params"]["lambda"] == 0.0
        assert document["params"]["p"] == pytest.approx(1 / 2000)
        assert [e["name"] for e in document["estimates"]] == ["x2", "dlogchi", "d1", "d2", "twolarge"]

    def test_csv_output(self, tmp_path):
        out = tmp_path / "sim.csv"
        code = cli.run([
            "--threads", "2", "simulate", "--n", "1000", "--reps", "4",
            "--estimands", "x2,c1", "--format", "csv", "--out", str(out),
        ])
        assert code == cli.EXIT_OK
        header, rows = read_csv_rows(str(out))
        assert header == ["estimand", "mean", "stderr", "ci95_lo", "ci95_hi"]
        assert [r[0] for r in rows] == ["x2", "c1"]

    def test_unknown_estimand_fails(self):
        assert cli.run(["simulate", "--n", "100", "--reps", "2", "--estimands", "x9"]) == cli.EXIT_FAILURE

    def test_p_outside_unit_interval_fails(self):
        assert cli.run(["simulate", "--n", "10", "--lambda", "-100", "--reps", "2"]) == cli.EXIT_FAILURE


class TestCycle:
    def test_needs_p_or_scan(self):
        assert cli.run(["cycle", "--n", "10"]) == cli.EXIT_USAGE

    def test_rows(self, tmp_path):
        out = tmp_path / "cycle.csv"
        assert cli.run(["cycle", "--n", "10", "--p", "0.5", "--out", str(out)]) == cli.EXIT_OK
        header, rows = read_csv_rows(str(out))
        assert header == ["p", "chi", "dchi_dp", "logder"]
        assert len(rows) == 1

    def test_scan_json(self, tmp_path):
        out = tmp_path / "scan.json"
        assert cli.run(["cycle", "--n", "100", "--scan", "--format", "json", "--out", str(out)]) == cli.EXIT_OK
        document = json.loads(out.read_text())
        assert document["n"] == 100
        assert 0.0 < document["p_star"] < 1.0

    def test_small_cycle_fails(self):
        assert cli.run(["cycle", "--n", "2", "--p", "0.5"]) == cli.EXIT_FAILURE


class TestVerifyAndSchema:
    def test_verify_exit_codes(self, mocker, capsys):
        mocker.patch.object(OracleService, "verify_suite", return_value=[pass_response("ok", check="a")])
        assert cli.run(["verify", "--suite", "oracles"]) == cli.EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert json.loads(lines[0][len("# config: "):])["params"]["suite"] == "oracles"
        assert lines[-1] == "# 1 checks, 0 failed"

        mocker.patch.object(OracleService, "verify_suite", return_value=[fail_response("bad", check="a")])
        assert cli.run(["verify", "--suite", "oracles"]) == cli.EXIT_FAILURE

    def test_verify_oracles_quick(self, tmp_path):
        out = tmp_path / "verify.json"
        assert cli.run(["verify", "--suite", "oracles", "--quick", "--format", "json", "--out", str(out)]) == cli.EXIT_OK
        document = json.loads(out.read_text())
        assert document["tier"] == "quick"
        assert all(c["success"] for c in document["checks"])

    def test_schema_files(self, tmp_path):
        assert cli.run(["schema", "--out", str(tmp_path)]) == cli.EXIT_OK
        for name in ("simulate", "maximize"):
            schema = json.loads((tmp_path / f"{name}.schema.json").read_text())
            assert schema["$id"] == f"{name}.schema.json"
            assert "properties" in schema
            assert load_schema(name, str(tmp_path)) == schema
