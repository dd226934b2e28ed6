import os
import sys

import pandas as pd
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main


@pytest.fixture(autouse=True)
def workspace(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("OPENAI_API_KEY", raising=False)
    return tmp_path


def run(*args):
    return main(list(args) + ["--quiet"])


def test_run_with_mock_decider_writes_every_replication(workspace):
    assert run("run", "--config", "scenario1", "--decider", "mock", "--days", "3") == EXIT_OK

    scenario_dir = workspace / "runs" / "scenario1"
    assert sorted(p.name for p in scenario_dir.iterdir()) == ["run_0", "run_1", "run_2"]
    for run_dir in scenario_dir.iterdir():
        assert len((run_dir / "days.jsonl").read_text(encoding="utf-8").splitlines()) == 3


def test_llm_decider_without_key_is_a_config_error(workspace, capsys):
    assert run("run", "--config", "scenario1", "--days", "2") == EXIT_CONFIG
    assert "OPENAI_API_KEY" in capsys.readouterr().err
    assert not (workspace / "runs").exists()


def test_same_seed_gives_identical_logs(workspace):
    for out in ("a", "b"):
        assert run("run", "--config", "scenario3", "--decider", "mock", "--seed", "42", "--days", "20",
                   "--runs", "1", "--out", out) == EXIT_OK
    first = (workspace / "a" / "scenario3" / "run_0" / "days.jsonl").read_bytes()
    assert first == (workspace / "b" / "scenario3" / "run_0" / "days.jsonl").read_bytes()


def test_restart_discards_existing_days(workspace):
    base = ("run", "--config", "scenario1", "--decider", "prc", "--runs", "1")
    assert run(*base, "--days", "4") == EXIT_OK
    assert run(*base, "--days", "2", "--seed", "7") == EXIT_CONFIG
    assert run(*base, "--days", "2", "--seed", "7", "--restart") == EXIT_OK

    days_path = workspace / "runs" / "scenario1" / "run_0" / "days.jsonl"
    assert len(days_path.read_text(encoding="utf-8").splitlines()) == 2


def test_analyze_two_days_gives_one_transition(workspace):
    assert run("run", "--config", "scenario1", "--decider", "random", "--days", "2", "--runs", "1") == EXIT_OK
    assert run("analyze", "--config", "scenario1") == EXIT_OK

    dsr = pd.read_csv(workspace / "runs" / "scenario1" / "analysis" / "dsr.csv")
    assert len(dsr) == 1
    assert list(dsr["group"]) == ["run_0"]


def test_analyze_pools_replications(workspace):
    assert run("run", "--config", "scenario1", "--decider", "mnl", "--days", "5") == EXIT_OK
    assert run("analyze", "--config", "scenario1", "--due") == EXIT_OK

    analysis = workspace / "runs" / "scenario1" / "analysis"
    dsr = pd.read_csv(analysis / "dsr.csv")
    assert list(dsr["group"].unique()) == ["run_0", "run_1", "run_2", "pooled"]

    stats = pd.read_csv(analysis / "stats.csv")
    assert set(stats["due"]) == {22.0}
    for name in ("switching_rates", "travel_time", "choices", "avg_switching_by_cost", "dsr_windows", "due_switching"):
        assert (analysis / f"{name}.csv").exists()


def test_analyze_single_run_directory(workspace):
    assert run("run", "--config", "scenario2", "--decider", "random", "--days", "3", "--runs", "2") == EXIT_OK
    run_dir = workspace / "runs" / "scenario2" / "run_1"
    assert run("analyze", "--run-dir", str(run_dir)) == EXIT_OK
    assert (run_dir / "analysis" / "dsr.csv").exists()


def test_analyze_missing_directory_is_a_runtime_error(workspace):
    assert run("analyze", "--run-dir", "nowhere") == EXIT_RUNTIME


def test_due_prints_equilibrium(capsys):
    assert run("due", "--scenario", "4") == EXIT_OK
    out = capsys.readouterr().out
    assert "flows (10.80, 5.20)" in out
    assert "costs (55.20, 55.20)" in out
    assert "mean travel time  55.20" in out


def test_fit_reports_both_directions(workspace):
    assert run("run", "--config", "scenario1", "--decider", "mnl-0.1", "--days", "40") == EXIT_OK
    assert run("fit", "--config", "scenario1") == EXIT_OK

    fit = pd.read_csv(workspace / "runs" / "scenario1" / "analysis" / "fit.csv")
    assert list(fit["direction"]) == ["p12", "p21"]


def test_fit_on_degenerate_data_fails(workspace, capsys):
    """Cyclic travelers leaving route 1 always switch: one outcome class only"""
    assert run("run", "--config", "scenario1", "--decider", "mock-cyclic", "--days", "4", "--runs", "1") == EXIT_OK
    assert run("fit", "--config", "scenario1") == EXIT_RUNTIME
    assert "one outcome" in capsys.readouterr().err


def test_validate_config(capsys):
    assert run("validate-config", "--config", "ow") == EXIT_OK
    assert "85 agents" in capsys.readouterr().out


def test_invalid_config_file(workspace, capsys):
    path = workspace / "bad.yaml"
    path.write_text("name: bad\nnetwork: scenario1\ndemands: []\nspeed: 3\n", encoding="utf-8")
    assert run("validate-config", "--config", str(path)) == EXIT_CONFIG
    assert "speed" in capsys.readouterr().err


def test_unknown_decider_is_a_config_error():
    assert run("validate-config", "--config", "scenario1", "--decider", "oracle") == EXIT_CONFIG


def test_unknown_flag_exits_with_usage_error():
    with pytest.raises(SystemExit) as excinfo:
        main(["run", "--config", "scenario1", "--speed", "3"])
    assert excinfo.value.code == 2


def test_due_on_the_multi_od_network(capsys):
    assert run("due", "--scenario", "ow") == EXIT_OK
    out = capsys.readouterr().out
    assert "converged" in out
    assert "relative gap" in out
    assert "mean travel time" in out


def test_analyze_reports_corrupt_log_line(workspace, capsys):
    assert run("run", "--config", "scenario1", "--decider", "random", "--days", "3", "--runs", "1") == EXIT_OK
    days_path = workspace / "runs" / "scenario1" / "run_0" / "days.jsonl"
    lines = days_path.read_text(encoding="utf-8").splitlines()
    lines[1] = "{not json"
    days_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    assert run("analyze", "--config", "scenario1") == EXIT_RUNTIME
    assert "days.jsonl:2" in capsys.readouterr().err
