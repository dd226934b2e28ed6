"""Per-day records written to days.jsonl and the in-memory result of one replication."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

import pandas as pd

from src.network import OD


@dataclass(frozen=True)
class AgentRecord:
    agent: int
    od: OD
    choice: int
    weight: int = 1
    bonus: float = 0.0
    reason: Optional[str] = None
    fallback: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "agent": self.agent,
            "od": list(self.od),
            "choice": self.choice,
            "weight": self.weight,
            "bonus": self.bonus,
            "reason": self.reason,
            "fallback": self.fallback,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "AgentRecord":
        origin, destination = data["od"]
        return cls(
            agent=int(data["agent"]),
            od=(str(origin), str(destination)),
            choice=int(data["choice"]),
            weight=int(data.get("weight", 1)),
            bonus=float(data.get("bonus", 0.0)),
            reason=data.get("reason"),
            fallback=bool(data.get("fallback", False)),
        )


@dataclass(frozen=True)
class DayLog:
    """
    Everything observed on one day. Route flows and times are indexed by OD,
    then by route index within that OD's route set.
    """

    day: int
    records: Tuple[AgentRecord, ...]
    route_flows: Mapping[OD, Tuple[float, ...]]
    route_times: Mapping[OD, Tuple[float, ...]]
    link_flows: Mapping[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "day": self.day,
            "records": [record.to_dict() for record in self.records],
            "route_flows": [{"od": list(od), "flows": list(flows)} for od, flows in self.route_flows.items()],
            "route_times": [{"od": list(od), "times": list(times)} for od, times in self.route_times.items()],
            "link_flows": dict(self.link_flows),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DayLog":
        def od_of(entry):
            origin, destination = entry["od"]
            return (str(origin), str(destination))

        return cls(
            day=int(data["day"]),
            records=tuple(AgentRecord.from_dict(r) for r in data["records"]),
            route_flows={od_of(e): tuple(e["flows"]) for e in data["route_flows"]},
            route_times={od_of(e): tuple(float(t) for t in e["times"]) for e in data["route_times"]},
            link_flows={str(k): float(v) for k, v in data.get("link_flows", {}).items()},
        )


@dataclass(frozen=True)
class RunResult:
    """One finished replication."""

    seed: int
    config: Dict[str, Any]
    days: Tuple[DayLog, ...]
    summary: pd.DataFrame
    run_dir: Optional[Path] = None
