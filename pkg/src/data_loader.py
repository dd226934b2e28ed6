import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import pandas as pd
import yaml

from src.errors import CorruptLogError
from src.sim.records import DayLog

DAYS_FILE = "days.jsonl"
SNAPSHOT_FILE = "config.snapshot"


def od_label(od) -> str:
    return f"{od[0]}->{od[1]}"


def parse_day_lines(filepath, lines) -> List[DayLog]:
    """Parse days.jsonl lines; raises CorruptLogError naming the first bad line."""
    logs = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            logs.append(DayLog.from_dict(json.loads(line)))
        except (ValueError, KeyError, TypeError) as e:
            raise CorruptLogError(filepath, lineno, f"unreadable day record ({e})") from None
        if logs[-1].day != len(logs):
            raise CorruptLogError(filepath, lineno, f"expected day {len(logs)}, found day {logs[-1].day}")
    return logs


def load_data(filepath):
    """
    Loads one replication's day logs from its days.jsonl file.
    """
    # 1. Check the file exists
    if not os.path.exists(filepath):
        raise ValueError(f"File not found: {filepath}")

    # 2. Parse one DayLog per line
    with open(filepath, encoding="utf-8") as f:
        return parse_day_lines(filepath, f.read().splitlines())


def load_completed_days(filepath) -> Tuple[List[DayLog], bool]:
    """
    Read the days that were fully written before an interruption.
    Returns (logs, truncated); a torn final line is dropped, not an error.
    """
    if not os.path.exists(filepath):
        return [], False

    with open(filepath, encoding="utf-8") as f:
        text = f.read()
    lines = text.splitlines()
    truncated = bool(text) and not text.endswith("\n")
    if truncated:
        lines = lines[:-1]
    return parse_day_lines(filepath, lines), truncated


@dataclass(frozen=True)
class RunData:
    """One replication read back from disk."""

    name: str
    path: Path
    config: Dict[str, Any]
    days: List[DayLog]


def load_run(run_dir: Union[str, Path]) -> RunData:
    run_dir = Path(run_dir)
    snapshot = run_dir / SNAPSHOT_FILE
    if not snapshot.exists():
        raise ValueError(f"File not found: {snapshot}")
    config = yaml.safe_load(snapshot.read_text(encoding="utf-8")) or {}
    return RunData(name=run_dir.name, path=run_dir, config=config, days=load_data(run_dir / DAYS_FILE))


def _run_index(path: Path) -> int:
    suffix = path.name.rpartition("_")[2]
    return int(suffix) if suffix.isdigit() else -1


def load_runs(path: Union[str, Path]) -> List[RunData]:
    """
    Load a single run directory, or every `run_<r>` directory beneath `path`
    ordered by replication index.
    """
    path = Path(path)
    if not path.exists():
        raise ValueError(f"File not found: {path}")
    if (path / DAYS_FILE).exists():
        return [load_run(path)]

    run_dirs = sorted((p for p in path.glob("run_*") if p.is_dir()), key=_run_index)
    if not run_dirs:
        raise ValueError(f"No run directories found under {path}")
    return [load_run(p) for p in run_dirs]


def logs_to_frames(logs: List[DayLog], run: Optional[str] = None) -> Dict[str, pd.DataFrame]:
    """
    Tidy views of a run's logs. Route numbers are 1-based.
      choices  run, day, agent, od, route, weight, bonus, fallback
      routes   run, day, od, route, flow, time
    """
    # 1. Per-agent choices
    choices = pd.DataFrame(
        [
            {
                "run": run,
                "day": log.day,
                "agent": r.agent,
                "od": od_label(r.od),
                "route": r.choice + 1,
                "weight": r.weight,
                "bonus": r.bonus,
                "fallback": r.fallback,
            }
            for log in logs
            for r in log.records
        ],
        columns=["run", "day", "agent", "od", "route", "weight", "bonus", "fallback"],
    )

    # 2. Per-route flows and times
    routes = pd.DataFrame(
        [
            {
                "run": run,
                "day": log.day,
                "od": od_label(od),
                "route": index + 1,
                "flow": flow,
                "time": log.route_times[od][index],
            }
            for log in logs
            for od, flows in log.route_flows.items()
            for index, flow in enumerate(flows)
        ],
        columns=["run", "day", "od", "route", "flow", "time"],
    )
    return {"choices": choices, "routes": routes}
