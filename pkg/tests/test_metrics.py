import os
import sys

import numpy as np
import pandas as pd
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.agent import DeciderConfig
from src.config import Demand, ScenarioConfig
from src.sim.engine import run_replication
from src.sim.records import AgentRecord, DayLog
from src.stats.metrics import (
    average_switching_rate,
    cost_key,
    daily_travel_time,
    day_switching_rate,
    descriptive_stats,
    dsr_window_means,
    due_point_switching,
    switching_rates,
)

OD = ("O", "D")


def make_log(day, choices, times, weights=None):
    weights = weights or [1] * len(choices)
    flows = [0] * len(times)
    for choice, weight in zip(choices, weights):
        flows[choice] += weight
    records = tuple(
        AgentRecord(agent=i, od=OD, choice=c, weight=w) for i, (c, w) in enumerate(zip(choices, weights))
    )
    return DayLog(day=day, records=records, route_flows={OD: tuple(flows)}, route_times={OD: tuple(times)})


@pytest.fixture
def random_logs():
    config = ScenarioConfig(
        name="metrics", network="scenario5", demands=(Demand("O", "D", 16),),
        days=30, runs=1, seed=5, decider=DeciderConfig(kind="random"),
    )
    return list(run_replication(config, quiet=True).days)


def test_cost_key_rounds_to_two_decimals():
    assert cost_key((22.0, 21.999)) == "22.00|22.00"
    assert cost_key((6.125, 38.0)) == "6.12|38.00"


def test_switching_rate_one_of_three():
    """Three travelers on route 1, one moves to route 2 the next day"""
    logs = [make_log(1, [0, 0, 0, 1], (12.0, 9.0)), make_log(2, [0, 0, 1, 1], (10.0, 10.0))]
    table = switching_rates(logs)

    row = table[(table["from_route"] == 1) & (table["to_route"] == 2)].iloc[0]
    assert row["rate"] == pytest.approx(1 / 3)
    assert row["switchers"] == 1
    assert row["occupants"] == 3
    stay = table[(table["from_route"] == 2) & (table["to_route"] == 2)].iloc[0]
    assert stay["rate"] == 1.0


def test_switching_rates_are_row_stochastic(random_logs):
    table = switching_rates(random_logs)
    sums = table.groupby(["day", "od", "from_route"])["rate"].sum()
    assert np.allclose(sums, 1.0)
    assert table["day"].max() == 29


def test_empty_route_has_no_rows():
    logs = [make_log(1, [0, 0], (10.0, 6.0)), make_log(2, [1, 0], (8.0, 8.0))]
    table = switching_rates(logs)
    assert set(table["from_route"]) == {1}


def test_weighted_agents_count_as_travelers():
    logs = [make_log(1, [0, 0], (10.0, 6.0), weights=[20, 5]), make_log(2, [1, 0], (8.0, 8.0), weights=[20, 5])]
    table = switching_rates(logs)
    row = table[table["to_route"] == 2].iloc[0]
    assert row["rate"] == pytest.approx(20 / 25)


def test_dsr_equals_switchers_over_travelers(random_logs):
    """Day switching rate is the occupancy-weighted sum of off-diagonal rates"""
    table = switching_rates(random_logs)
    dsr = day_switching_rate(random_logs).set_index("day")

    off = table[table["from_route"] != table["to_route"]]
    from_table = off.groupby("day").apply(lambda g: (g["rate"] * g["occupants"]).sum()) / 16
    assert np.allclose(dsr.loc[from_table.index, "dsr"], from_table)
    assert len(dsr) == len(random_logs) - 1
    assert dsr["dsr"].between(0, 1).all()


def test_average_over_days_with_equal_costs():
    logs = [
        make_log(1, [0, 0, 1, 1], (22.0, 22.0)),
        make_log(2, [0, 1, 1, 1], (30.0, 14.0)),
        make_log(3, [0, 0, 1, 1], (22.0, 22.0)),
        make_log(4, [0, 1, 0, 1], (22.0, 22.0)),
    ]
    table = switching_rates(logs)
    averages = average_switching_rate(table, logs)

    row = averages[(averages["cost_key"] == "22.00|22.00") & (averages["from_route"] == 1)
                   & (averages["to_route"] == 2)].iloc[0]
    # day 1: 1 of 2 leaves route 1; day 3: 1 of 2 leaves
    assert row["mean_rate"] == pytest.approx(0.5)
    assert row["days"] == 2


def test_dsr_window_means():
    dsr = pd.DataFrame({"day": range(1, 51), "dsr": [0.5] * 20 + [0.3] * 10 + [0.1] * 20})
    windows = dsr_window_means(dsr).set_index("window")
    assert windows.loc["first_20", "mean_dsr"] == pytest.approx(0.5)
    assert windows.loc["last_20", "mean_dsr"] == pytest.approx(0.1)


def test_due_point_switching_picks_nearest_costs():
    averages = pd.DataFrame(
        {
            "od": ["O->D"] * 4,
            "cost_key": ["22.00|22.00", "22.00|22.00", "30.00|14.00", "30.00|14.00"],
            "from_route": [1, 2, 1, 2],
            "to_route": [2, 1, 2, 1],
            "mean_rate": [0.1, 0.2, 0.4, 0.05],
            "days": [3, 3, 1, 1],
        }
    )
    picked = due_point_switching(averages, {"O->D": (22.0, 22.0)})
    assert list(picked["mean_rate"]) == [0.1, 0.2]
    assert picked["distance"].iloc[0] == 0.0


def test_daily_travel_time_is_demand_weighted():
    logs = [make_log(1, [0, 0, 0, 1], (12.0, 8.0))]
    assert daily_travel_time(logs)["mean_travel_time"].iloc[0] == pytest.approx((3 * 12 + 8) / 4)


def test_descriptive_stats_mean_std_gap():
    logs = [make_log(1, [0, 1], (20.0, 20.0)), make_log(2, [0, 1], (24.0, 24.0))]
    stats = descriptive_stats(logs, due={(OD, 0): 22.0, (OD, 1): 20.0}).set_index("route")

    assert stats.loc[1, "mean"] == 22.0
    assert stats.loc[1, "std"] == 2.0
    assert stats.loc[1, "gap"] == 0.0
    assert stats.loc[2, "gap"] == pytest.approx(0.1)


def test_descriptive_stats_window():
    logs = [make_log(d, [0, 1], (float(d), 5.0)) for d in range(1, 11)]
    stats = descriptive_stats(logs, window=(6, 10)).set_index("route")
    assert stats.loc[1, "mean"] == 8.0
    assert np.isnan(stats.loc[1, "due"])
    with pytest.raises(ValueError):
        descriptive_stats(logs, window=(20, 30))


def test_metrics_need_two_days():
    with pytest.raises(ValueError):
        switching_rates([make_log(1, [0], (6.0, 6.0))])


def test_dsr_four_of_sixteen():
    """Two travelers leave each route: 4 of 16 switch"""
    logs = [
        make_log(1, [0] * 8 + [1] * 8, (22.0, 22.0)),
        make_log(2, [1, 1] + [0] * 6 + [0, 0] + [1] * 6, (22.0, 22.0)),
    ]
    assert day_switching_rate(logs)["dsr"].iloc[0] == pytest.approx(0.25)


def test_nobody_switching_gives_zero_off_diagonal_rates():
    logs = [make_log(d, [0, 0, 1, 1, 1], (18.0, 26.0)) for d in range(1, 6)]
    table = switching_rates(logs)

    assert (table.loc[table["from_route"] != table["to_route"], "rate"] == 0.0).all()
    assert (day_switching_rate(logs)["dsr"] == 0.0).all()


def test_constant_series_has_no_spread():
    logs = [make_log(d, [0, 1], (22.0, 22.0)) for d in range(1, 8)]
    stats = descriptive_stats(logs, due={(OD, 0): 22.0, (OD, 1): 22.0}).set_index("route")
    assert (stats["std"] == 0.0).all()
    assert (stats["gap"] == 0.0).all()
