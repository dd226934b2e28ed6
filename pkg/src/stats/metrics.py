"""
Observables of a simulated run: switching rates, their averages per cost
combination, the day switching rate (DSR) and travel-time statistics.

All functions take the ordered DayLogs of ONE replication; pooling across
replications happens in run_analysis. Route numbers in every frame are 1-based
and agents representing n travelers count n times.
"""

from typing import Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.data_loader import logs_to_frames, od_label
from src.network import RouteKey
from src.sim.records import DayLog

SWITCH_COLUMNS = ["day", "od", "from_route", "to_route", "switchers", "occupants", "rate"]


def cost_key(times: Sequence[float]) -> str:
    """Cost combination of one OD on one day, rounded to two decimals."""
    return "|".join(f"{t:.2f}" for t in times)


def _require_days(logs: Sequence[DayLog], minimum: int = 2) -> None:
    if len(logs) < minimum:
        raise ValueError(f"Need at least {minimum} days of logs, got {len(logs)}")


def _transitions(logs: Sequence[DayLog]) -> pd.DataFrame:
    """One row per agent and day t that has a day t+1: route at t and at t+1."""
    choices = logs_to_frames(list(logs))["choices"][["day", "agent", "od", "route", "weight"]]
    following = choices[["day", "agent", "route"]].rename(columns={"route": "next_route"})
    following["day"] = following["day"] - 1
    return choices.merge(following, on=["day", "agent"], how="inner")


# --------------------------------------------------------------------------
# SWITCHING RATES
# --------------------------------------------------------------------------

def switching_rates(logs: Sequence[DayLog]) -> pd.DataFrame:
    """
    p_ij^t for every day t with a successor, every occupied route i and every
    route j of the same OD (j == i is the stay share). Routes empty on day t
    get no rows.
    """
    _require_days(logs)
    pairs = _transitions(logs)

    occupied = (
        pairs.groupby(["day", "od", "route"], as_index=False)["weight"]
        .sum()
        .rename(columns={"route": "from_route", "weight": "occupants"})
    )
    destinations = pd.DataFrame(
        [
            {"od": od_label(od), "to_route": index + 1}
            for od, flows in logs[0].route_flows.items()
            for index in range(len(flows))
        ]
    )
    moved = (
        pairs.groupby(["day", "od", "route", "next_route"], as_index=False)["weight"]
        .sum()
        .rename(columns={"route": "from_route", "next_route": "to_route", "weight": "switchers"})
    )

    table = occupied.merge(destinations, on="od").merge(
        moved, on=["day", "od", "from_route", "to_route"], how="left"
    )
    table["switchers"] = table["switchers"].fillna(0).astype(int)
    table["rate"] = table["switchers"] / table["occupants"]
    return table.sort_values(["day", "od", "from_route", "to_route"]).reset_index(drop=True)[SWITCH_COLUMNS]


def attach_cost_keys(table: pd.DataFrame, logs: Sequence[DayLog]) -> pd.DataFrame:
    costs = pd.DataFrame(
        [
            {"day": log.day, "od": od_label(od), "cost_key": cost_key(times)}
            for log in logs
            for od, times in log.route_times.items()
        ]
    )
    return table.merge(costs, on=["day", "od"], how="left")


def average_by_cost(keyed: pd.DataFrame) -> pd.DataFrame:
    return keyed.groupby(["od", "cost_key", "from_route", "to_route"], as_index=False).agg(
        mean_rate=("rate", "mean"), days=("rate", "size")
    )


def average_switching_rate(table: pd.DataFrame, logs: Sequence[DayLog]) -> pd.DataFrame:
    """Mean p_ij^t over the days sharing the same cost combination; `days` is |T(c)|."""
    return average_by_cost(attach_cost_keys(table, logs))


def day_switching_rate(logs: Sequence[DayLog]) -> pd.DataFrame:
    """Share of all travelers on day t who are on a different route on day t+1."""
    _require_days(logs)
    pairs = _transitions(logs)
    pairs["switched"] = (pairs["route"] != pairs["next_route"]).astype(int) * pairs["weight"]
    dsr = pairs.groupby("day", as_index=False).agg(
        switchers=("switched", "sum"), travelers=("weight", "sum")
    )
    dsr["dsr"] = dsr["switchers"] / dsr["travelers"]
    return dsr


def dsr_window_means(dsr: pd.DataFrame, first: int = 20, last: int = 20) -> pd.DataFrame:
    """Mean DSR over the first `first` and the last `last` transitions."""
    ordered = dsr.sort_values("day")
    windows = [(f"first_{first}", ordered.head(first)), (f"last_{last}", ordered.tail(last))]
    return pd.DataFrame(
        [
            {"window": name, "transitions": len(part), "mean_dsr": float(part["dsr"].mean()) if len(part) else np.nan}
            for name, part in windows
        ]
    )


def due_point_switching(averages: pd.DataFrame, due_costs: Mapping[str, Tuple[float, ...]]) -> pd.DataFrame:
    """
    Off-diagonal average switching rates at the observed cost combination
    nearest (Euclidean) to each OD's DUE costs. `due_costs` is keyed by OD label.
    """
    rows = []
    for od, due in due_costs.items():
        subset = averages[(averages["od"] == od) & (averages["from_route"] != averages["to_route"])]
        if subset.empty:
            continue
        keys = subset["cost_key"].unique()
        distances = {
            key: float(np.linalg.norm(np.array([float(v) for v in key.split("|")]) - np.asarray(due)))
            for key in keys
        }
        nearest = min(keys, key=lambda key: (distances[key], key))
        picked = subset[subset["cost_key"] == nearest].copy()
        picked["distance"] = distances[nearest]
        rows.append(picked)

    columns = ["od", "cost_key", "from_route", "to_route", "mean_rate", "days", "distance"]
    if not rows:
        return pd.DataFrame(columns=columns)
    return pd.concat(rows, ignore_index=True)[columns]


# --------------------------------------------------------------------------
# TRAVEL TIMES
# --------------------------------------------------------------------------

def daily_travel_time(logs: Sequence[DayLog]) -> pd.DataFrame:
    """Demand-weighted mean travel time of all travelers per day."""
    routes = logs_to_frames(list(logs))["routes"]
    routes["weighted"] = routes["flow"] * routes["time"]
    daily = routes.groupby("day", as_index=False).agg(weighted=("weighted", "sum"), travelers=("flow", "sum"))
    daily["mean_travel_time"] = daily["weighted"] / daily["travelers"].where(daily["travelers"] > 0)
    return daily[["day", "travelers", "mean_travel_time"]]


def descriptive_stats(
    logs: Sequence[DayLog],
    due: Optional[Mapping[RouteKey, float]] = None,
    window: Optional[Tuple[int, int]] = None,
) -> pd.DataFrame:
    """
    Per route: DUE time, mean and population std (ddof=0) of the daily route
    time over `window` (inclusive day range), and the gap (mean - DUE) / DUE.
    """
    routes = logs_to_frames(list(logs))["routes"]
    if window is not None:
        start, end = window
        routes = routes[(routes["day"] >= start) & (routes["day"] <= end)]
    if routes.empty:
        raise ValueError(f"No days inside window {window}")

    stats = routes.groupby(["od", "route"], as_index=False).agg(
        mean=("time", "mean"), std=("time", lambda s: float(np.std(s, ddof=0)))
    )

    due_frame = pd.DataFrame(
        [{"od": od_label(od), "route": index + 1, "due": cost} for (od, index), cost in (due or {}).items()],
        columns=["od", "route", "due"],
    ).astype({"route": int, "due": float})
    stats = stats.merge(due_frame, on=["od", "route"], how="left")
    stats["gap"] = (stats["mean"] - stats["due"]) / stats["due"]
    return stats[["od", "route", "due", "mean", "gap", "std"]]
