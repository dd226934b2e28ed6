import os
from pathlib import Path
from typing import Dict, Optional, Tuple

import pandas as pd

from src.config import ScenarioConfig
from src.data_loader import load_runs, logs_to_frames, od_label
from src.logger import configure_logging, get_logger
from src.stats.equilibrium import scenario_due
from src.stats.metrics import (
    attach_cost_keys,
    average_by_cost,
    daily_travel_time,
    day_switching_rate,
    descriptive_stats,
    dsr_window_means,
    due_point_switching,
    switching_rates,
)

logger = get_logger(__name__)

POOLED = "pooled"


def _with_group(frame: pd.DataFrame, group: str) -> pd.DataFrame:
    frame = frame.copy()
    frame.insert(0, "group", group)
    return frame


def _pool_switching(tables: pd.DataFrame) -> pd.DataFrame:
    pooled = tables.groupby(["day", "od", "from_route", "to_route"], as_index=False)[["switchers", "occupants"]].sum()
    pooled["rate"] = pooled["switchers"] / pooled["occupants"]
    return pooled


def _pool_dsr(dsrs: pd.DataFrame) -> pd.DataFrame:
    pooled = dsrs.groupby("day", as_index=False)[["switchers", "travelers"]].sum()
    pooled["dsr"] = pooled["switchers"] / pooled["travelers"]
    return pooled


def analyze_runs(
    path,
    due: bool = False,
    window: Optional[Tuple[int, int]] = None,
    out_dir=None,
) -> Dict[str, pd.DataFrame]:
    """
    Compute every metric for the replications under `path`, one group per run
    plus a pooled group when there is more than one run, and save the CSVs.
    """
    # 1. Load runs and the optional DUE reference
    runs = load_runs(path)
    out_dir = Path(out_dir) if out_dir is not None else Path(path) / "analysis"
    os.makedirs(out_dir, exist_ok=True)

    due_costs = None
    if due:
        solution = scenario_due(ScenarioConfig.from_dict(runs[0].config))
        due_costs = dict(solution.route_costs)

    # 2. Per-run metrics
    parts = {name: [] for name in ("switching", "keyed", "dsr", "travel", "stats", "choices")}
    for run in runs:
        table = switching_rates(run.days)
        parts["switching"].append(_with_group(table, run.name))
        parts["keyed"].append(_with_group(attach_cost_keys(table, run.days), run.name))
        parts["dsr"].append(_with_group(day_switching_rate(run.days), run.name))
        parts["travel"].append(_with_group(daily_travel_time(run.days), run.name))
        parts["stats"].append(_with_group(descriptive_stats(run.days, due_costs, window), run.name))
        parts["choices"].append(logs_to_frames(run.days, run=run.name)["choices"])

    results = {
        "switching_rates": pd.concat(parts["switching"], ignore_index=True),
        "dsr": pd.concat(parts["dsr"], ignore_index=True),
        "travel_time": pd.concat(parts["travel"], ignore_index=True),
        "stats": pd.concat(parts["stats"], ignore_index=True),
        "choices": pd.concat(parts["choices"], ignore_index=True)[["run", "day", "agent", "od", "route"]],
    }
    keyed = pd.concat(parts["keyed"], ignore_index=True)
    averages = [_with_group(average_by_cost(k.drop(columns="group")), k["group"].iat[0]) for k in parts["keyed"]]

    # 3. Pooled group
    if len(runs) > 1:
        all_days = [log for run in runs for log in run.days]
        results["switching_rates"] = pd.concat(
            [results["switching_rates"], _with_group(_pool_switching(results["switching_rates"]), POOLED)],
            ignore_index=True,
        )
        results["dsr"] = pd.concat([results["dsr"], _with_group(_pool_dsr(results["dsr"]), POOLED)], ignore_index=True)
        results["travel_time"] = pd.concat(
            [results["travel_time"], _with_group(daily_travel_time(all_days), POOLED)], ignore_index=True
        )
        results["stats"] = pd.concat(
            [results["stats"], _with_group(descriptive_stats(all_days, due_costs, window), POOLED)],
            ignore_index=True,
        )
        averages.append(_with_group(average_by_cost(keyed.drop(columns="group")), POOLED))
    results["avg_switching_by_cost"] = pd.concat(averages, ignore_index=True)

    results["dsr_windows"] = pd.concat(
        [
            _with_group(dsr_window_means(frame.drop(columns="group")), group)
            for group, frame in results["dsr"].groupby("group", sort=False)
        ],
        ignore_index=True,
    )

    if due_costs is not None:
        by_od = {}
        for (od, index), cost in sorted(due_costs.items()):
            by_od.setdefault(od_label(od), []).append(cost)
        results["due_switching"] = pd.concat(
            [
                _with_group(due_point_switching(frame.drop(columns="group"), by_od), group)
                for group, frame in results["avg_switching_by_cost"].groupby("group", sort=False)
            ],
            ignore_index=True,
        )

    # 4. Save
    for name, frame in results.items():
        frame.to_csv(out_dir / f"{name}.csv", index=False)
    print(f"Saved {len(results)} tables for {len(runs)} run(s) to {out_dir}")

    # 5. Report
    print("\n=== Travel time statistics (std is population std) ===")
    print(results["stats"].to_string(index=False, float_format=lambda v: f"{v:.2f}"))
    print("\n=== Day switching rate windows ===")
    print(results["dsr_windows"].to_string(index=False, float_format=lambda v: f"{v:.3f}"))
    return results


def main():
    configure_logging()

    # 1. Setup Paths
    project_root = Path(__file__).resolve().parents[2]
    runs_root = project_root / "runs"
    reports_root = project_root / "reports" / "analysis"

    if not runs_root.exists():
        print("Error: no simulation output found. Run 'dvc repro simulate' first.")
        return

    # 2. Analyze every simulated scenario
    for scenario_dir in sorted(p for p in runs_root.iterdir() if p.is_dir()):
        print(f"\n--- {scenario_dir.name} ---")
        analyze_runs(scenario_dir, due=True, out_dir=reports_root / scenario_dir.name)


if __name__ == "__main__":
    main()
