import json
import os
import subprocess
import sys
from fractions import Fraction
from pathlib import Path

import pytest

import ckpsim as ck
from ckpsim.cli import main as cli_main
from ckpsim.harness import (SERIES_COLUMNS, ConfigError, RunConfig,
                            SweepGrid, run_sweep, run_trials, summarize,
                            thread_count, write_run)


def small_config(**over):
    base = dict(eps=0, p="1/5", k=5, init="simple", t_max=400, trials=12,
                seed=31)
    base.update(over)
    return RunConfig.make(**base)


def test_config_validation():
    with pytest.raises(ConfigError):
        small_config(init="bogus")
    with pytest.raises(ConfigError):
        small_config(t_max=0)
    with pytest.raises(ConfigError):
        small_config(trials=0)
    with pytest.raises(ValueError):
        small_config(p="3/2")


def test_config_exactness_and_manifest_round_trip():
    cfg = RunConfig.make(0.16, "1/3", "inf", "general", 100, 5, 7)
    assert cfg.eps == Fraction(4, 25)
    assert cfg.p == Fraction(1, 3)
    assert cfg.k is None
    doc = cfg.to_manifest()
    assert doc["eps"] == "4/25" and doc["k"] == "inf"
    assert RunConfig.from_manifest(doc) == cfg


def test_thread_count_sources(monkeypatch):
    assert thread_count(3) == 3
    monkeypatch.setenv("CKP_THREADS", "5")
    assert thread_count(None) == 5
    monkeypatch.delenv("CKP_THREADS")
    assert thread_count(None) >= 1


def test_run_artifacts(tmp_path):
    cfg = small_config()
    results = run_trials(cfg)
    summary = write_run(tmp_path, cfg, results)
    assert (tmp_path / "manifest.json").exists()
    assert (tmp_path / "events.jsonl").exists()
    lines = (tmp_path / "series.csv").read_text().splitlines()
    assert lines[0] == ",".join(SERIES_COLUMNS)
    assert len(lines) > 1
    doc = json.loads((tmp_path / "summary.json").read_text())
    assert doc["trials"] == 12
    assert doc == {k: summary[k] for k in doc}
    for line in (tmp_path / "events.jsonl").read_text().splitlines():
        ev = json.loads(line)
        assert ev["event"] == "extinct"


def test_series_rows_match_trial_records(tmp_path):
    cfg = small_config(trials=3, t_max=64)
    results = run_trials(cfg)
    write_run(tmp_path, cfg, results)
    lines = (tmp_path / "series.csv").read_text().splitlines()[1:]
    n_records = sum(len(r.records) for r in results)
    assert len(lines) == n_records
    first = lines[0].split(",")
    assert first[0] == "0" and first[1] == "1"  # trial 0, time 1


def test_byte_identical_across_thread_counts(tmp_path):
    outs = []
    for threads in (1, 4):
        d = tmp_path / f"t{threads}"
        cfg = small_config(threads=threads)
        write_run(d, cfg, run_trials(cfg))
        # the worker count is not part of the experiment identity: it
        # appears in neither artifact, so both must match byte for byte
        outs.append(((d / "series.csv").read_bytes(),
                     (d / "summary.json").read_bytes()))
    assert outs[0] == outs[1]


def test_sweep_writes_phase_csv(tmp_path):
    grid = SweepGrid.make([0], ["1/10", "9/10"], [2], "simple", 200, 6, 3)
    rows = run_sweep(grid, tmp_path)
    assert len(rows) == 2
    lines = (tmp_path / "phase.csv").read_text().splitlines()
    assert lines[0].startswith("eps,p,k,")
    assert len(lines) == 3
    regimes = {r["regime"] for r in rows}
    assert regimes <= {"surviving", "eliminating", "inconclusive"}


def test_sweep_rejects_empty_axis():
    with pytest.raises(ConfigError):
        SweepGrid.make([], ["1/2"], [2], "simple", 10, 2, 1)


class TestCLI:
    def test_simulate(self, tmp_path, capsys):
        rc = cli_main(["simulate", "--p", "1/5", "--k", "5",
                       "--t-max", "200", "--trials", "5", "--seed", "2",
                       "--out", str(tmp_path / "run")])
        assert rc == 0
        assert (tmp_path / "run" / "summary.json").exists()
        out = capsys.readouterr().out
        assert "survival_frequency" in out

    def test_config_error_exit_code(self, tmp_path, capsys):
        rc = cli_main(["simulate", "--p", "7/5", "--k", "5",
                       "--t-max", "200", "--out", str(tmp_path / "x")])
        assert rc == 2
        rc = cli_main(["simulate", "--p", "1/5", "--k", "5",
                       "--t-max", "0", "--out", str(tmp_path / "x")])
        assert rc == 2

    def test_missing_required_flag_exits_2(self, capsys):
        assert cli_main(["simulate", "--k", "2", "--t-max", "10",
                         "--out", "/tmp/nope"]) == 2

    def test_budget_refusal_exit_code(self, capsys):
        rc = cli_main(["oracle-validate", "--epsilon", "1/3",
                       "--p", "1/2", "--k", "2", "--horizon", "6",
                       "--samples", "10", "--budget", "100"])
        assert rc == 3
        assert "refused" in capsys.readouterr().err

    def test_oracle_validate(self, capsys):
        rc = cli_main(["oracle-validate", "--p", "1/2", "--k", "2",
                       "--horizon", "3", "--samples", "2000",
                       "--seed", "4"])
        assert rc == 0
        assert "TV=" in capsys.readouterr().out

    def test_drift(self, capsys):
        rc = cli_main(["drift", "--p", "6/7", "--k", "4",
                       "--potential", "exp", "--states", "20",
                       "--seed", "3"])
        assert rc == 0
        assert "satisfied 20/20" in capsys.readouterr().out

    def test_urn(self, capsys):
        rc = cli_main(["urn", "--t0", "10", "--t", "90",
                       "--trials", "3000", "--seed", "8"])
        assert rc == 0
        assert "exact 9.0000" in capsys.readouterr().out

    def test_sweep(self, tmp_path, capsys):
        rc = cli_main(["sweep", "--p", "1/10,9/10", "--k", "2",
                       "--t-max", "150", "--trials", "4", "--seed", "5",
                       "--out", str(tmp_path / "sw")])
        assert rc == 0
        assert (tmp_path / "sw" / "phase.csv").exists()


def test_installed_entry_point(tmp_path):
    env = dict(os.environ)
    res = subprocess.run(["ckp", "urn", "--t0", "4", "--t", "8",
                          "--trials", "500"], env=env,
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert "mean" in res.stdout
