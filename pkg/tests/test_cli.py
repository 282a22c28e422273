"""CLI subcommands: plumbing, exit codes, byte-identical outputs."""

import json
import os

import pytest

from crowdsel.cli import main


def run_cli(*argv):
    return main(list(argv))


class TestGenerate:
    def test_writes_worker_csv(self, tmp_path, capsys):
        out = tmp_path / "workers.csv"
        assert run_cli("generate", "--n", "100", "--dimension", "2",
                       "--seed", "7", "--out", str(out)) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 101  # header + rows
        assert lines[0] == "id,cost,capacity,mu,ctx_0,ctx_1"
        assert "wrote" in capsys.readouterr().out

    def test_generate_is_deterministic(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_cli("generate", "--n", "50", "--seed", "3", "--out", str(a))
        run_cli("generate", "--n", "50", "--seed", "3", "--out", str(b))
        assert a.read_bytes() == b.read_bytes()


class TestRunAndSweep:
    def test_run_writes_one_summary_row(self, tmp_path):
        out = tmp_path / "summary.csv"
        assert run_cli("run", "--n", "30", "--policy", "caws",
                       "--budget", "15", "--seed", "1",
                       "--replications", "2", "--out", str(out)) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("# crowdsel=")
        assert lines[1].startswith("policy,B,N,M,alpha,replications,")
        assert len(lines) == 3
        assert lines[2].startswith("caws,15.0,30,")

    def test_rerun_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["run", "--n", "30", "--policy", "random", "--budget", "12",
                "--seed", "4", "--replications", "2"]
        run_cli(*args, "--out", str(a))
        run_cli(*args, "--out", str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_sweep_grid_row_count(self, tmp_path):
        out = tmp_path / "summary.csv"
        assert run_cli("sweep", "--n", "20", "40", "--budget", "8", "16",
                       "--policy", "oracle", "random", "--seed", "2",
                       "--replications", "2", "--out", str(out)) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 2 + 2 * 2 * 2  # comment + header + rows

    def test_step_log_written(self, tmp_path):
        out = tmp_path / "summary.csv"
        run_cli("run", "--n", "20", "--policy", "bkube", "--budget", "10",
                "--seed", "0", "--replications", "1", "--out", str(out),
                "--log-steps")
        steps = tmp_path / "summary_steps.csv"
        lines = steps.read_text().splitlines()
        assert lines[1] == "policy,seed,t,worker_id,cube,cost,reward"
        assert len(lines) > 2

    def test_config_file_with_flag_overrides(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "n_workers": [25], "budgets": [9.0], "policies": ["random"],
            "replications": 2, "capacity_range": [2, 4]}))
        out = tmp_path / "summary.csv"
        assert run_cli("run", "--config", str(cfg), "--policy", "oracle",
                       "--out", str(out)) == 0
        assert "oracle" in out.read_text()

    def test_bkube_step_log_matches_singleton_caws(self, tmp_path):
        outs = []
        for extra in (["--policy", "bkube"],
                      ["--policy", "caws", "--granularity", "singleton"]):
            out = tmp_path / f"{extra[1]}.csv"
            run_cli("run", "--n", "25", "--budget", "10", "--seed", "6",
                    "--replications", "2", "--out", str(out), "--log-steps",
                    *extra)
            steps = (tmp_path / f"{extra[1]}_steps.csv").read_text()
            body = [",".join(line.split(",")[1:])
                    for line in steps.splitlines()[2:]]
            outs.append(body)
        assert outs[0] == outs[1]


class TestBound:
    def test_worked_example(self, capsys):
        assert run_cli("bound", "--B", "16", "--dimension", "1",
                       "--alpha", "1", "--L", "1", "--c-min", "1",
                       "--c-max", "1", "--tau-max", "1",
                       "--delta-min", "1") == 0
        out = capsys.readouterr().out
        assert "bound = 252.945333070835" in out

    def test_undefined_separation(self, capsys):
        assert run_cli("bound", "--B", "16", "--dimension", "1",
                       "--alpha", "1", "--L", "1", "--c-min", "1",
                       "--c-max", "1", "--tau-max", "1") == 0
        out = capsys.readouterr().out
        assert "delta_min = undefined" in out
        assert "not finite" in out

    def test_missing_parameter_exits_2(self, capsys):
        assert run_cli("bound", "--B", "16") == 2
        assert "required" in capsys.readouterr().err

    def test_instance_mode(self, tmp_path, capsys):
        workers = tmp_path / "w.csv"
        run_cli("generate", "--n", "40", "--seed", "9", "--out", str(workers))
        assert run_cli("bound", "--instance", str(workers), "--B", "20",
                       "--dimension", "2") == 0
        out = capsys.readouterr().out
        assert "\nd = " in "\n" + out
        assert "bound" in out


class TestErrors:
    def test_missing_instance_file(self, tmp_path, capsys):
        assert run_cli("run", "--instance", str(tmp_path / "nope.csv"),
                       "--policy", "random", "--budget", "5",
                       "--out", str(tmp_path / "s.csv")) == 1
        assert "error:" in capsys.readouterr().err

    def test_bad_config_json(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("{not json")
        assert run_cli("run", "--config", str(cfg),
                       "--out", str(tmp_path / "s.csv")) == 1
        assert "error:" in capsys.readouterr().err


class TestSelftest:
    def test_selftest_green(self, capsys):
        assert run_cli("selftest") == 0
        out = capsys.readouterr().out
        assert "0 failed" in out
