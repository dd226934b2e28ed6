"""
Day-to-day simulation loop.

Each day runs three phases with a barrier between them:
  1. route choice: every agent decides from its own (yesterday's) state
  2. loading: chosen routes are aggregated and the network is loaded
  3. perception and re-planning: memories update from the day's route times
Replications are persisted one day at a time and can be resumed.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import yaml
from tqdm import tqdm

from src.agent import (
    AgentState,
    Decision,
    compute_bonus,
    mnl_choose,
    prc_choose,
    random_choose,
    update_memory,
)
from src.config import BonusConfig, ScenarioConfig, dump_config, snapshot_matches
from src.data_loader import DAYS_FILE, SNAPSHOT_FILE, load_completed_days, od_label
from src.errors import ConfigError
from src.llm.client import ChatClient
from src.llm.decider import llm_choose, mock_choose
from src.logger import get_logger
from src.network import OD, Network, load_network
from src.routesets import RouteSet
from src.sim.records import AgentRecord, DayLog, RunResult
from src.sim.scenarios import build_scenario
from src.stats.metrics import daily_travel_time, day_switching_rate

logger = get_logger(__name__)

Decider = Callable[[AgentState, np.random.Generator], Decision]

TRANSCRIPT_DIR = "llm"
SUMMARY_FILE = "summary.csv"
MEMORY_FILE = "memory.csv"


class FlowConservationError(RuntimeError):
    """Route flows of an OD no longer add up to its demand."""


def agent_rng(state: AgentState, day: int) -> np.random.Generator:
    """Independent stream per (agent, day); the same on a fresh run and on resume."""
    return np.random.default_rng([state.rng_seed, day])


def make_decider(config: ScenarioConfig, client: Optional[ChatClient] = None) -> Decider:
    """
    Decision function for the configured decider kind. On an agent's first
    day (no history yet) every kind picks uniformly at random.
    """
    decider = config.decider
    if decider.kind == "llm" and client is None:
        raise ConfigError("The llm decider needs a ChatClient")
    currency = config.bonus.currency if config.bonus.enabled else None

    def decide(state: AgentState, rng: np.random.Generator) -> Decision:
        if state.yesterday is None:
            return Decision(choice=random_choose(state, rng))
        if decider.kind == "prc":
            return Decision(choice=prc_choose(state))
        if decider.kind == "mnl":
            return Decision(choice=mnl_choose(state, decider.alpha, rng))
        if decider.kind == "random":
            return Decision(choice=random_choose(state, rng))
        if decider.kind == "mock":
            return Decision(choice=mock_choose(state, decider.mock_policy, rng, decider.epsilon))
        return llm_choose(state, client, rng, config.scenario_text, currency)

    return decide


def observed_times(times: Sequence[float], choice: int, feedback_mode: str) -> Dict[int, float]:
    if feedback_mode == "all":
        return dict(enumerate(times))
    return {choice: times[choice]}


@dataclass(frozen=True)
class DayOutcome:
    log: DayLog
    agents: Tuple[AgentState, ...]
    transcripts: Tuple[Dict[str, object], ...]


def _check_conservation(route_flows: Mapping[OD, List[int]], demands: Mapping[OD, int], day: int) -> None:
    for od, demand in demands.items():
        total = sum(route_flows.get(od, ()))
        if total != demand:
            raise FlowConservationError(
                f"Day {day}: route flows of OD {od_label(od)} sum to {total}, demand is {demand}"
            )


def run_day(
    day: int,
    agents: Sequence[AgentState],
    network: Network,
    route_sets: Mapping[OD, RouteSet],
    decider: Decider,
    demands: Mapping[OD, int],
    omega: float,
    feedback_mode: str = "all",
    bonus: BonusConfig = BonusConfig(),
    executor: Optional[ThreadPoolExecutor] = None,
) -> DayOutcome:
    if day < 1:
        raise ValueError(f"day must be >= 1, got {day}")

    # 1. Route choice against yesterday's snapshot
    rngs = [agent_rng(agent, day) for agent in agents]
    if executor is None:
        decisions = [decider(agent, rng) for agent, rng in zip(agents, rngs)]
    else:
        decisions = list(executor.map(decider, agents, rngs))

    # 2. Aggregate chosen routes and load the network
    flows: Dict[OD, List[int]] = {od: [0] * len(route_set) for od, route_set in route_sets.items()}
    for agent, decision in zip(agents, decisions):
        if not 0 <= decision.choice < agent.route_count:
            raise FlowConservationError(f"Day {day}: agent {agent.id} chose unknown route {decision.choice}")
        flows[agent.od][decision.choice] += agent.weight
    _check_conservation(flows, demands, day)

    loaded = load_network(
        network,
        {(od, index): flow for od, route_flows in flows.items() for index, flow in enumerate(route_flows)},
        route_sets,
    )
    times = {od: loaded.od_route_times(od, len(route_set)) for od, route_set in route_sets.items()}

    # 3. Perception and re-planning
    updated, records, transcripts = [], [], []
    for agent, decision in zip(agents, decisions):
        od_times = times[agent.od]
        earned = (
            compute_bonus(od_times[decision.choice], bonus.rate, bonus.reference_time) if bonus.enabled else 0.0
        )
        updated.append(
            update_memory(agent, decision.choice, observed_times(od_times, decision.choice, feedback_mode), earned, omega)
        )
        records.append(
            AgentRecord(
                agent=agent.id,
                od=agent.od,
                choice=decision.choice,
                weight=agent.weight,
                bonus=earned,
                reason=decision.reason,
                fallback=decision.fallback,
            )
        )
        transcripts.extend({"day": day, **entry} for entry in decision.transcript)

    log = DayLog(
        day=day,
        records=tuple(records),
        route_flows={od: tuple(route_flows) for od, route_flows in flows.items()},
        route_times=times,
        link_flows=dict(loaded.link_flows),
    )
    return DayOutcome(log=log, agents=tuple(updated), transcripts=tuple(transcripts))


def replay_day(log: DayLog, agents: Sequence[AgentState], omega: float, feedback_mode: str) -> List[AgentState]:
    """Rebuild agent memories from a logged day without deciding again."""
    by_agent = {record.agent: record for record in log.records}
    replayed = []
    for agent in agents:
        if agent.id not in by_agent:
            raise ConfigError(f"Day {log.day} has no record for agent {agent.id}; the run was built differently")
        record = by_agent[agent.id]
        observed = observed_times(log.route_times[agent.od], record.choice, feedback_mode)
        replayed.append(update_memory(agent, record.choice, observed, record.bonus, omega))
    return replayed


# --------------------------------------------------------------------------
# RUN DIRECTORY
# --------------------------------------------------------------------------

def summarize_days(logs: Sequence[DayLog]) -> pd.DataFrame:
    """Per day: mean travel time, switchers and DSR towards the next day (empty on the last day)."""
    summary = daily_travel_time(logs)
    if len(logs) >= 2:
        dsr = day_switching_rate(logs)[["day", "switchers", "dsr"]]
        summary = summary.merge(dsr, on="day", how="left")
    else:
        summary = summary.assign(switchers=np.nan, dsr=np.nan)
    return summary


def memory_frame(agents: Sequence[AgentState]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "agent": agent.id,
                "od": od_label(agent.od),
                "weight": agent.weight,
                "route": index + 1,
                "chosen_count": memory.chosen_count,
                "ewmatt": memory.ewmatt,
                "cumulative_bonus": round(agent.cumulative_bonus, 2),
            }
            for agent in agents
            for index, memory in enumerate(agent.memories)
        ]
    )


def _day_line(log: DayLog) -> str:
    return json.dumps(log.to_dict(), sort_keys=True, ensure_ascii=False) + "\n"


def _drop_transcripts_after(run_dir: Path, day: int) -> None:
    for transcript in (run_dir / TRANSCRIPT_DIR).glob("day_*.jsonl"):
        if int(transcript.stem.split("_")[1]) > day:
            transcript.unlink()


def _prepare_run_dir(run_dir: Path, snapshot: ScenarioConfig, resume: bool) -> List[DayLog]:
    """Create or reopen a run directory; returns the days already completed."""
    days_path = run_dir / DAYS_FILE
    snapshot_path = run_dir / SNAPSHOT_FILE

    if days_path.exists() and not resume:
        logger.info("Restarting %s, discarding %s", run_dir, days_path.name)
        days_path.unlink()
        _drop_transcripts_after(run_dir, 0)

    logs: List[DayLog] = []
    if days_path.exists():
        existing = yaml.safe_load(snapshot_path.read_text(encoding="utf-8")) if snapshot_path.exists() else None
        if existing is None or not snapshot_matches(existing, snapshot):
            raise ConfigError(f"{run_dir} holds a run with a different configuration; pass --restart to discard it")
        logs, truncated = load_completed_days(days_path)
        if truncated:
            logger.warning("%s: dropping a partially written last day", days_path)
        if len(logs) > snapshot.days:
            raise ConfigError(
                f"{run_dir} already holds {len(logs)} days, more than the {snapshot.days} requested; "
                "pass --restart to discard it or ask for at least as many days"
            )
        if truncated:
            days_path.write_text("".join(_day_line(log) for log in logs), encoding="utf-8")
            _drop_transcripts_after(run_dir, len(logs))
        if logs:
            logger.info("Resuming %s after day %d", run_dir, len(logs))

    run_dir.mkdir(parents=True, exist_ok=True)
    dump_config(snapshot, snapshot_path)
    return logs


def _append_day(run_dir: Path, outcome: DayOutcome) -> None:
    with open(run_dir / DAYS_FILE, "a", encoding="utf-8") as f:
        f.write(_day_line(outcome.log))
    if outcome.transcripts:
        transcript_dir = run_dir / TRANSCRIPT_DIR
        transcript_dir.mkdir(exist_ok=True)
        path = transcript_dir / f"day_{outcome.log.day:04d}.jsonl"
        with open(path, "w", encoding="utf-8") as f:
            for entry in outcome.transcripts:
                f.write(json.dumps(entry, ensure_ascii=False) + "\n")


# --------------------------------------------------------------------------
# REPLICATIONS
# --------------------------------------------------------------------------

def run_replication(
    config: ScenarioConfig,
    run_index: int = 0,
    out_dir: Optional[Path] = None,
    client: Optional[ChatClient] = None,
    resume: bool = True,
    quiet: bool = False,
    decider: Optional[Decider] = None,
) -> RunResult:
    """
    Simulate one replication with seed `config.seed + run_index`. With
    `out_dir`, every day is appended to out_dir/<name>/run_<index>/days.jsonl
    as soon as it completes.
    """
    seed = config.seed + run_index
    snapshot = replace(config, seed=seed, runs=1)
    scenario = build_scenario(config, seed)
    agents: List[AgentState] = list(scenario.agents)
    demands = scenario.demands
    decide = decider or make_decider(config, client)
    omega, feedback_mode = config.decider.omega, config.decider.feedback_mode

    run_dir = Path(out_dir) / config.name / f"run_{run_index}" if out_dir is not None else None
    logs: List[DayLog] = _prepare_run_dir(run_dir, snapshot, resume) if run_dir is not None else []
    for log in logs:
        agents = replay_day(log, agents, omega, feedback_mode)

    executor = None
    if config.decider.kind == "llm":
        executor = ThreadPoolExecutor(max_workers=config.llm.max_concurrent_requests)
    try:
        days = tqdm(
            range(len(logs) + 1, config.days + 1),
            desc=f"{config.name} run {run_index}",
            total=config.days,
            initial=len(logs),
            disable=quiet,
            leave=False,
        )
        for day in days:
            outcome = run_day(
                day,
                agents,
                scenario.network,
                scenario.route_sets,
                decide,
                demands,
                omega,
                feedback_mode,
                config.bonus,
                executor,
            )
            agents = list(outcome.agents)
            logs.append(outcome.log)
            if run_dir is not None:
                _append_day(run_dir, outcome)
    finally:
        if executor is not None:
            executor.shutdown(wait=True)

    summary = summarize_days(logs)
    if run_dir is not None:
        summary.to_csv(run_dir / SUMMARY_FILE, index=False)
        memory_frame(agents).to_csv(run_dir / MEMORY_FILE, index=False)
        logger.info("Run %d (seed %d): %d days saved to %s", run_index, seed, len(logs), run_dir)

    return RunResult(seed=seed, config=snapshot.to_dict(), days=tuple(logs), summary=summary, run_dir=run_dir)


def run_simulation(
    config: ScenarioConfig,
    out_dir: Optional[Path] = None,
    client: Optional[ChatClient] = None,
    resume: bool = True,
    quiet: bool = False,
) -> List[RunResult]:
    """All `config.runs` replications, at most `config.jobs` at a time."""
    if config.decider.kind == "llm" and client is None:
        client = ChatClient(config.llm)

    def one(run_index: int) -> RunResult:
        return run_replication(config, run_index, out_dir, client, resume, quiet)

    if config.jobs == 1 or config.runs == 1:
        return [one(r) for r in range(config.runs)]
    with ThreadPoolExecutor(max_workers=config.jobs) as pool:
        return list(pool.map(one, range(config.runs)))
