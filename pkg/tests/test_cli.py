import json
import math
import subprocess
import sys

import pytest

from aoi_multicast.cli import CSV_SCHEMA, _parse_number, main
from aoi_multicast.renewal import BREAKDOWN_FIELDS

REF = ["--n", "10", "--k", "7", "--rate", "1/3", "--shift", "0.1",
       "--deadline", "3.0"]


def run_cli(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestNumberParsing:
    def test_forms(self):
        assert _parse_number("1/3") == pytest.approx(1 / 3, rel=1e-16)
        assert _parse_number("0.25") == 0.25
        assert _parse_number(" inf ") == math.inf
        assert _parse_number("Infinity") == math.inf

    def test_garbage_rejected(self):
        with pytest.raises(ValueError):
            _parse_number("three")


class TestAnalytic:
    def test_json_payload(self, capsys):
        code, out, _ = run_cli(["analytic", *REF], capsys)
        assert code == 0
        payload = json.loads(out)
        assert tuple(payload) == BREAKDOWN_FIELDS
        assert payload["avg_aoi"] == pytest.approx(4.554225, abs=1e-5)

    def test_infinite_deadline_serialized(self, capsys):
        code, out, _ = run_cli(
            ["analytic", "--n", "10", "--k", "7", "--rate", "1/3",
             "--shift", "0.1", "--deadline", "inf"], capsys)
        assert code == 0
        payload = json.loads(out)
        assert payload["deadline"] == "inf"
        # No deadline: every failure is a lost quorum race, never a timeout.
        assert payload["p_f2"] == 0.0

    def test_csv_schema_header(self, capsys):
        code, out, _ = run_cli(["analytic", *REF, "--format", "csv"], capsys)
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == f"# schema={CSV_SCHEMA}"
        assert lines[1].split(",") == list(BREAKDOWN_FIELDS)
        assert len(lines) == 3

    def test_invalid_quorum_exit_code(self, capsys):
        code, _, err = run_cli(
            ["analytic", "--n", "10", "--k", "11", "--rate", "1/3",
             "--shift", "0.1", "--deadline", "3.0"], capsys)
        assert code == 2
        assert "QuorumOutOfRange" in err

    def test_degenerate_point_exit_code(self, capsys):
        # Deadline barely above the shift with a full quorum: conditional
        # moments are numerically undefined.
        code, _, err = run_cli(
            ["analytic", "--n", "10", "--k", "10", "--rate", "0.1",
             "--shift", "0.1", "--deadline", "0.101"], capsys)
        assert code == 3
        assert "DegenerateConditioning" in err

    def test_missing_parameter(self, capsys):
        code, _, err = run_cli(
            ["analytic", "--n", "10", "--k", "7", "--rate", "1/3",
             "--shift", "0.1"], capsys)
        assert code == 2
        assert "--deadline" in err

    def test_output_file_and_manifest(self, tmp_path, capsys):
        out_file = tmp_path / "point.json"
        code, out, _ = run_cli(["analytic", *REF, "--output", str(out_file)], capsys)
        assert code == 0 and out == ""
        payload = json.loads(out_file.read_text())
        assert payload["n_devices"] == 10
        manifest = json.loads((tmp_path / "point.json.manifest.json").read_text())
        assert manifest["schema"] == "aoi-multicast-manifest-v1"
        assert manifest["command"] == "analytic"
        assert set(manifest["formula_variants"]) == {
            "quorum_time_second_moment", "deadline_tail_exponent",
            "service_cdf_tail_index", "deadline_first_probability",
        }

    def test_unwritable_output_exit_code(self, tmp_path, capsys):
        code, _, err = run_cli(
            ["analytic", *REF, "--output", str(tmp_path / "no" / "dir.json")],
            capsys)
        assert code == 4


class TestConfigFile:
    def test_config_supplies_params(self, tmp_path, capsys):
        cfg = tmp_path / "run.toml"
        cfg.write_text('n = 10\nk = 7\nrate = "1/3"\nshift = 0.1\ndeadline = 3.0\n')
        code, out, _ = run_cli(["analytic", "--config", str(cfg)], capsys)
        assert code == 0
        assert json.loads(out)["avg_aoi"] == pytest.approx(4.554225, abs=1e-5)

    def test_flag_overrides_config(self, tmp_path, capsys):
        cfg = tmp_path / "run.toml"
        cfg.write_text('n = 10\nk = 7\nrate = "1/3"\nshift = 0.1\ndeadline = 3.0\n')
        code, out, _ = run_cli(
            ["analytic", "--config", str(cfg), "--deadline", "inf"], capsys)
        assert code == 0
        assert json.loads(out)["deadline"] == "inf"

    def test_missing_config_file(self, tmp_path, capsys):
        code, _, err = run_cli(
            ["analytic", "--config", str(tmp_path / "none.toml")], capsys)
        assert code == 4

    def test_malformed_config_file(self, tmp_path, capsys):
        bad = tmp_path / "bad.toml"
        bad.write_text("n = [unclosed\n")
        code, _, _ = run_cli(["analytic", "--config", str(bad)], capsys)
        assert code == 2


class TestSimulate:
    SIM = ["--updates", "4000", "--trials", "2", "--seed", "11",
           "--warmup", "200", "--threads", "1"]

    def test_json_with_compare(self, capsys):
        code, out, _ = run_cli(["simulate", *REF, *self.SIM, "--compare"], capsys)
        assert code == 0
        payload = json.loads(out)
        assert set(payload) >= {"params", "simulated", "analytic", "within_ci"}
        assert payload["params"]["n"] == 10
        point, hw = payload["simulated"]["avg_aoi"]
        assert hw > 0
        assert set(payload["within_ci"]) == set(payload["simulated"])

    def test_seed_reproducibility(self, capsys):
        _, out1, _ = run_cli(["simulate", *REF, *self.SIM], capsys)
        _, out2, _ = run_cli(["simulate", *REF, *self.SIM], capsys)
        assert out1 == out2

    def test_csv_format(self, capsys):
        code, out, _ = run_cli(["simulate", *REF, *self.SIM, "--format", "csv"],
                               capsys)
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == f"# schema={CSV_SCHEMA}"
        header = lines[1].split(",")
        assert header[:5] == ["n", "k", "rate", "shift", "deadline"]
        assert "sim_avg_aoi" in header and "sim_avg_aoi_hw95" in header
        assert len(lines) == 3

    def test_trace_file(self, tmp_path, capsys):
        trace = tmp_path / "cycles.ndjson"
        code, _, _ = run_cli(
            ["simulate", *REF, *self.SIM, "--trace", str(trace)], capsys)
        assert code == 0
        records = [json.loads(line) for line in trace.read_text().splitlines()]
        assert records
        assert {"trial", "device", "w", "x_s", "t_hat"} <= set(records[0])

    def test_output_manifest_reproduces_run(self, tmp_path, capsys):
        out1 = tmp_path / "a.json"
        run_cli(["simulate", *REF, *self.SIM, "--output", str(out1)], capsys)
        manifest = json.loads((tmp_path / "a.json.manifest.json").read_text())
        r = manifest["resolved"]
        out2 = tmp_path / "b.json"
        code, _, _ = run_cli(
            ["simulate", "--n", str(r["n"]), "--k", str(r["k"]),
             "--rate", repr(r["rate"]), "--shift", repr(r["shift"]),
             "--deadline", repr(r["deadline"]),
             "--updates", str(r["updates"]), "--trials", str(r["trials"]),
             "--seed", str(r["seed"]), "--warmup", str(r["warmup"]),
             "--threads", "1", "--output", str(out2)], capsys)
        assert code == 0
        assert out1.read_text() == out2.read_text()

    def test_bad_sim_config_exit_code(self, capsys):
        code, _, _ = run_cli(
            ["simulate", *REF, "--updates", "100", "--warmup", "100"], capsys)
        assert code == 2


class TestSweep:
    def test_deadline_sweep_csv(self, capsys):
        code, out, _ = run_cli(
            ["sweep", "--var", "deadline", "--n", "10", "--k", "7",
             "--rate", "1/3", "--shift", "0.1",
             "--lo", "0.5", "--hi", "2.0", "--step", "0.5"], capsys)
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == f"# schema={CSV_SCHEMA}"
        header = lines[1].split(",")
        assert header[:2] == ["sweep_var", "sweep_value"]
        assert header[-1] == "error"
        assert len(lines) == 2 + 4

    def test_quorum_sweep(self, capsys):
        code, out, _ = run_cli(
            ["sweep", "--var", "quorum", "--n", "5", "--rate", "0.5",
             "--shift", "0.1", "--deadline", "3.0"], capsys)
        assert code == 0
        rows = out.splitlines()[2:]
        assert len(rows) == 5
        assert [r.split(",")[1] for r in rows] == ["1.0", "2.0", "3.0", "4.0", "5.0"]

    def test_missing_range_flags(self, capsys):
        code, _, err = run_cli(
            ["sweep", "--var", "deadline", "--n", "10", "--k", "7",
             "--rate", "1/3", "--shift", "0.1"], capsys)
        assert code == 2
        assert "--lo" in err

    def test_with_sim_deterministic(self, tmp_path, capsys):
        argv = ["sweep", "--var", "quorum", "--n", "3", "--rate", "0.5",
                "--shift", "0.1", "--deadline", "2.0", "--with-sim",
                "--updates", "2000", "--trials", "2", "--seed", "3",
                "--warmup", "100"]
        _, out1, _ = run_cli(argv, capsys)
        _, out2, _ = run_cli(argv, capsys)
        assert out1 == out2
        assert "sim_avg_aoi" in out1.splitlines()[1]


class TestOptimize:
    def test_deadline_optimum(self, capsys):
        code, out, _ = run_cli(
            ["optimize", "--var", "deadline", "--n", "10", "--k", "7",
             "--rate", "1/3", "--shift", "0.1", "--lo", "0.2", "--hi", "10"],
            capsys)
        assert code == 0
        payload = json.loads(out)
        assert 0.7 < payload["t_d_star"] < 1.1
        assert not payload["boundary_minimum"]

    def test_quorum_optimum(self, capsys):
        code, out, _ = run_cli(
            ["optimize", "--var", "quorum", "--n", "10", "--rate", "0.5",
             "--shift", "0.1", "--deadline", "3.0"], capsys)
        assert code == 0
        payload = json.loads(out)
        assert 1 <= payload["k_star"] <= 10

    def test_bad_bracket_exit_code(self, capsys):
        code, _, _ = run_cli(
            ["optimize", "--var", "deadline", "--n", "10", "--k", "7",
             "--rate", "1/3", "--shift", "0.1", "--lo", "0.05", "--hi", "10"],
            capsys)
        assert code == 2


class TestEntryPoint:
    def test_module_invocation(self):
        proc = subprocess.run(
            [sys.executable, "-m", "aoi_multicast.cli", "analytic", *REF],
            capture_output=True, text=True)
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["n_devices"] == 10

    def test_threads_env_default(self):
        proc = subprocess.run(
            [sys.executable, "-c",
             "from aoi_multicast.cli import _default_threads; print(_default_threads())"],
            capture_output=True, text=True,
            env={"PATH": "/usr/bin:/bin", "AOI_MULTICAST_THREADS": "3"})
        assert proc.stdout.strip() == "3"
