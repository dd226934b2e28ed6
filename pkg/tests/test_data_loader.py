import json
import os
import sys

import pandas as pd
import pytest

# 1. Get the directory of THIS file (tests/)
current_dir = os.path.dirname(os.path.abspath(__file__))
# 2. Get the parent directory (project root)
parent_dir = os.path.dirname(current_dir)
# 3. Add the parent directory to sys.path
sys.path.insert(0, parent_dir)

from src.data_loader import load_completed_days, load_data, load_runs, logs_to_frames
from src.errors import CorruptLogError
from src.sim.records import AgentRecord, DayLog

OD = ("O", "D")


def make_log(day, choices, times=(22.0, 22.0)):
    flows = [0, 0]
    for choice in choices:
        flows[choice] += 1
    return DayLog(
        day=day,
        records=tuple(AgentRecord(agent=i, od=OD, choice=c) for i, c in enumerate(choices)),
        route_flows={OD: tuple(flows)},
        route_times={OD: tuple(times)},
        link_flows={"r1": float(flows[0]), "r2": float(flows[1])},
    )


def write_days(path, logs):
    path.write_text("".join(json.dumps(log.to_dict(), sort_keys=True) + "\n" for log in logs), encoding="utf-8")


def write_run(run_dir, logs):
    run_dir.mkdir(parents=True)
    (run_dir / "config.snapshot").write_text("name: test\n", encoding="utf-8")
    write_days(run_dir / "days.jsonl", logs)


def test_load_data_file_not_found():
    """Loader should raise ValueError if file does not exist"""
    with pytest.raises(ValueError):
        load_data("non_existent_file.jsonl")


def test_load_data_returns_day_logs(tmp_path):
    """Loader should read one DayLog per line"""
    path = tmp_path / "days.jsonl"
    written = [make_log(1, [0, 1, 1]), make_log(2, [0, 0, 1], times=(24.5, 20.0))]
    write_days(path, written)

    logs = load_data(str(path))

    assert logs == written
    assert logs[1].route_flows[OD] == (2, 1)
    assert logs[1].route_times[OD] == (24.5, 20.0)


def test_load_data_names_the_corrupt_line(tmp_path):
    """A broken record raises CorruptLogError pointing at its line"""
    path = tmp_path / "days.jsonl"
    write_days(path, [make_log(1, [0, 1])])
    with open(path, "a", encoding="utf-8") as f:
        f.write('{"day": 2, "records": [\n')

    with pytest.raises(CorruptLogError, match=r"days.jsonl:2:") as excinfo:
        load_data(path)
    assert excinfo.value.lineno == 2


def test_load_data_rejects_gaps_in_days(tmp_path):
    """Days must be consecutive from 1"""
    path = tmp_path / "days.jsonl"
    write_days(path, [make_log(1, [0]), make_log(3, [0])])
    with pytest.raises(CorruptLogError, match="expected day 2"):
        load_data(path)


def test_load_completed_days_drops_torn_last_line(tmp_path):
    """An interrupted write leaves a partial line that resume ignores"""
    path = tmp_path / "days.jsonl"
    write_days(path, [make_log(1, [0, 1]), make_log(2, [1, 1])])
    with open(path, "a", encoding="utf-8") as f:
        f.write('{"day": 3, "rec')

    logs, truncated = load_completed_days(path)

    assert truncated
    assert [log.day for log in logs] == [1, 2]


def test_load_completed_days_missing_file_is_empty(tmp_path):
    assert load_completed_days(tmp_path / "days.jsonl") == ([], False)


def test_load_runs_orders_by_replication_index(tmp_path):
    """run_10 comes after run_2"""
    for index in (10, 2, 0):
        write_run(tmp_path / f"run_{index}", [make_log(1, [0])])

    runs = load_runs(tmp_path)

    assert [run.name for run in runs] == ["run_0", "run_2", "run_10"]
    assert runs[0].config == {"name": "test"}


def test_load_runs_accepts_a_single_run_directory(tmp_path):
    write_run(tmp_path / "run_0", [make_log(1, [0])])
    assert len(load_runs(tmp_path / "run_0")) == 1


def test_load_runs_without_runs_raises(tmp_path):
    with pytest.raises(ValueError, match="No run directories"):
        load_runs(tmp_path)


def test_logs_to_frames_uses_one_based_routes():
    """Frames report route numbers as travelers read them"""
    frames = logs_to_frames([make_log(1, [0, 1, 1])], run="run_0")

    choices = frames["choices"]
    routes = frames["routes"]
    assert isinstance(choices, pd.DataFrame)
    assert choices["route"].tolist() == [1, 2, 2]
    assert set(choices["run"]) == {"run_0"}
    assert routes["flow"].tolist() == [1, 2]
    assert routes["od"].tolist() == ["O->D", "O->D"]
