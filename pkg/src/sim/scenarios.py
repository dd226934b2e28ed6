"""
Scenario networks and agent populations.

The five two-route scenarios are two parallel links r1 and r2 between
nodes O and D. The Ortúzar-Willumsen scenario reads its network file.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from src.agent import AgentState, new_agent, sample_profile
from src.config import PROJECT_ROOT, ScenarioConfig
from src.network import OD, Link, Network, read_network
from src.routesets import RouteSet, build_route_sets

NETWORK_DIR = PROJECT_ROOT / "data" / "networks"
OW_NETWORK_PATH = NETWORK_DIR / "ow_network.txt"

TWO_ROUTE_OD: OD = ("O", "D")

# (free-flow time, slope) of route 1 and route 2
TWO_ROUTE_SCENARIOS: Dict[str, Tuple[Tuple[float, float], Tuple[float, float]]] = {
    "scenario1": ((6.0, 2.0), (6.0, 2.0)),
    "scenario2": ((10.0, 4.0), (24.0, 6.0)),
    "scenario3": ((5.0, 2.0), (12.0, 3.0)),
    "scenario4": ((12.0, 4.0), (24.0, 6.0)),
    "scenario5": ((6.0, 2.0), (12.0, 3.0)),
}

# Each agent's rng_seed is run_seed * PROFILE_SEED_STRIDE + agent id
PROFILE_SEED_STRIDE = 100_000


def two_route_network(route1: Tuple[float, float], route2: Tuple[float, float]) -> Network:
    origin, destination = TWO_ROUTE_OD
    return Network(
        [origin, destination],
        [Link("r1", origin, destination, *route1), Link("r2", origin, destination, *route2)],
    )


def load_scenario_network(source: str) -> Network:
    """`scenario1`..`scenario5`, `ow`, or a path to a network file."""
    if source in TWO_ROUTE_SCENARIOS:
        return two_route_network(*TWO_ROUTE_SCENARIOS[source])
    if source == "ow":
        return read_network(OW_NETWORK_PATH)
    path = Path(source)
    if not path.is_absolute() and not path.exists():
        path = PROJECT_ROOT / path
    return read_network(path)


def agent_weights(travelers: int, travelers_per_agent: int) -> List[int]:
    """Split an OD demand into agents of `travelers_per_agent`, plus one remainder agent."""
    full, remainder = divmod(travelers, travelers_per_agent)
    return [travelers_per_agent] * full + ([remainder] if remainder else [])


@dataclass(frozen=True)
class Scenario:
    network: Network
    route_sets: Dict[OD, RouteSet]
    agents: Tuple[AgentState, ...]

    @property
    def demands(self) -> Dict[OD, int]:
        totals: Dict[OD, int] = {od: 0 for od in self.route_sets}
        for agent in self.agents:
            totals[agent.od] += agent.weight
        return totals


def scenario_routes(config: ScenarioConfig) -> Tuple[Network, Dict[OD, RouteSet]]:
    network = load_scenario_network(config.network)
    return network, build_route_sets(network, [d.od for d in config.demands], config.k_routes)


def build_scenario(config: ScenarioConfig, seed: Optional[int] = None) -> Scenario:
    """Network, route sets and the day-0 agent population for one replication."""
    seed = config.seed if seed is None else seed
    network, route_sets = scenario_routes(config)

    agents = []
    for demand in config.demands:
        route_set = route_sets[demand.od]
        for weight in agent_weights(demand.travelers, config.travelers_per_agent):
            agent_id = len(agents)
            agent_seed = seed * PROFILE_SEED_STRIDE + agent_id
            agents.append(
                new_agent(
                    agent_id=agent_id,
                    od=demand.od,
                    free_flow_times=route_set.free_flow_times,
                    weight=weight,
                    rng_seed=agent_seed,
                    profile=sample_profile(agent_seed, selfish=config.selfish),
                )
            )
    return Scenario(network=network, route_sets=route_sets, agents=tuple(agents))
