"""
Reference equilibria.

two_route_due solves the two parallel linear routes in closed form. msa_ue
finds the route-restricted user equilibrium of any network over its fixed
route sets by averaging all-or-nothing assignments; every iterate is loaded
with the same `load_network` the simulator uses.
"""

from dataclasses import dataclass
from types import MappingProxyType
from typing import Dict, Mapping, Tuple

from src.config import ScenarioConfig
from src.errors import ConfigError
from src.logger import get_logger
from src.network import OD, LoadResult, Network, RouteKey, load_network
from src.routesets import RouteSet
from src.sim.scenarios import TWO_ROUTE_OD, TWO_ROUTE_SCENARIOS, scenario_routes

logger = get_logger(__name__)

STEP_RULES = ("projection", "exact", "msa")
# Routes carrying less than this share of their OD's demand count as unused
USED_FLOW_SHARE = 1e-9


@dataclass(frozen=True)
class DueSolution:
    route_flows: Mapping[RouteKey, float]
    route_costs: Mapping[RouteKey, float]
    max_cost_gap: float
    relative_gap: float = 0.0
    converged: bool = True
    iterations: int = 0

    def od_flows(self, od: OD) -> Tuple[float, ...]:
        return tuple(flow for (key_od, _), flow in sorted(self.route_flows.items()) if key_od == od)

    def od_costs(self, od: OD) -> Tuple[float, ...]:
        return tuple(cost for (key_od, _), cost in sorted(self.route_costs.items()) if key_od == od)

    @property
    def mean_travel_time(self) -> float:
        """Demand-weighted mean travel time over all travelers."""
        total = sum(self.route_flows.values())
        if total <= 0:
            return 0.0
        return sum(flow * self.route_costs[key] for key, flow in self.route_flows.items()) / total


@dataclass(frozen=True)
class MsaConfig:
    max_iterations: int = 5000
    relative_gap_tolerance: float = 1e-6
    # minutes a used route may exceed its OD's cheapest route
    cost_gap_tolerance: float = 1e-4
    step_rule: str = "projection"

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ConfigError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not self.relative_gap_tolerance > 0:
            raise ConfigError(f"relative_gap_tolerance must be > 0, got {self.relative_gap_tolerance}")
        if not self.cost_gap_tolerance > 0:
            raise ConfigError(f"cost_gap_tolerance must be > 0, got {self.cost_gap_tolerance}")
        if self.step_rule not in STEP_RULES:
            raise ConfigError(f"step_rule must be one of {STEP_RULES}, got '{self.step_rule}'")


def two_route_due(
    route1: Tuple[float, float],
    route2: Tuple[float, float],
    demand: float,
    od: OD = TWO_ROUTE_OD,
) -> DueSolution:
    """Equal-cost split of `demand` over two parallel routes given as (free-flow time, slope)."""
    (t01, s1), (t02, s2) = route1, route2
    if s1 + s2 <= 0:
        raise ValueError("At least one route needs a positive slope")
    if demand <= 0:
        raise ValueError(f"demand must be > 0, got {demand}")

    f1 = min(max((t02 - t01 + s2 * demand) / (s1 + s2), 0.0), float(demand))
    f2 = demand - f1
    c1, c2 = t01 + s1 * f1, t02 + s2 * f2

    # On a boundary the unused route is the dearer one; report by how much
    if f1 == 0:
        gap = c1 - c2
    elif f2 == 0:
        gap = c2 - c1
    else:
        gap = abs(c1 - c2)

    return DueSolution(
        route_flows=MappingProxyType({(od, 0): f1, (od, 1): f2}),
        route_costs=MappingProxyType({(od, 0): c1, (od, 1): c2}),
        max_cost_gap=gap,
    )


def relative_gap(
    route_flows: Mapping[RouteKey, float],
    route_times: Mapping[RouteKey, float],
    demands: Mapping[OD, float],
) -> float:
    """(sum of flow * cost - sum of demand * cheapest cost) / sum of demand * cheapest cost."""
    excess = 0.0
    baseline = 0.0
    for od, demand in demands.items():
        keys = [key for key in route_times if key[0] == od]
        cheapest = min(route_times[key] for key in keys)
        excess += sum(route_flows.get(key, 0.0) * route_times[key] for key in keys) - demand * cheapest
        baseline += demand * cheapest
    return excess / baseline if baseline > 0 else 0.0


def _all_or_nothing(
    route_times: Mapping[RouteKey, float],
    route_sets: Mapping[OD, RouteSet],
    demands: Mapping[OD, float],
) -> Dict[RouteKey, float]:
    flows = {(od, index): 0.0 for od, route_set in route_sets.items() for index in range(len(route_set))}
    for od, route_set in route_sets.items():
        costs = [route_times[(od, index)] for index in range(len(route_set))]
        flows[(od, costs.index(min(costs)))] = float(demands.get(od, 0.0))
    return flows


def _exact_step(network: Network, current: LoadResult, target: LoadResult) -> float:
    """Minimizer of the Beckmann objective along current -> target for linear link costs."""
    slope = 0.0
    curvature = 0.0
    for link in network.links:
        delta = target.link_flows[link.id] - current.link_flows[link.id]
        slope += current.link_times[link.id] * delta
        curvature += link.slope * delta * delta
    if curvature <= 0:
        return 1.0 if slope < 0 else 0.0
    return min(max(-slope / curvature, 0.0), 1.0)


def _cheapest(route_times: Mapping[RouteKey, float], od: OD, count: int) -> int:
    return min(range(count), key=lambda index: (route_times[(od, index)], index))


def _projection_sweep(
    network: Network,
    route_sets: Mapping[OD, RouteSet],
    flows: Dict[RouteKey, float],
    loaded: LoadResult,
) -> LoadResult:
    """
    One Gauss-Seidel pass over every used route: move flow from the route to
    the current cheapest route of its OD until their costs meet or the route
    empties. The move is exact for linear link costs. Updates `flows` in place.
    """
    for od in sorted(route_sets):
        route_set = route_sets[od]
        for index in range(len(route_set)):
            key = (od, index)
            best = _cheapest(loaded.route_times, od, len(route_set))
            if index == best or flows[key] <= 0:
                continue
            excess = loaded.route_times[key] - loaded.route_times[(od, best)]
            if excess <= 0:
                continue

            differing = set(route_set.routes[index].link_ids) ^ set(route_set.routes[best].link_ids)
            curvature = sum(network.link(link_id).slope for link_id in differing)
            shift = flows[key] if curvature <= 0 else min(flows[key], excess / curvature)

            flows[key] -= shift
            flows[(od, best)] += shift
            loaded = load_network(network, flows, route_sets)
    return loaded


def _max_cost_gap(flows, costs, route_sets, demands) -> float:
    gap = 0.0
    for od, route_set in route_sets.items():
        keys = [(od, index) for index in range(len(route_set))]
        cheapest = min(costs[key] for key in keys)
        threshold = USED_FLOW_SHARE * max(float(demands.get(od, 0.0)), 1.0)
        used = [costs[key] for key in keys if flows[key] > threshold]
        if used:
            gap = max(gap, max(used) - cheapest)
    return gap


def msa_ue(
    network: Network,
    route_sets: Mapping[OD, RouteSet],
    demands: Mapping[OD, float],
    config: MsaConfig = MsaConfig(),
) -> DueSolution:
    """
    Route-restricted user equilibrium. Starts from all-or-nothing at free flow.
      projection  shift flow route by route onto each OD's cheapest route
      exact       move towards the all-or-nothing target by line search
      msa         move towards the all-or-nothing target with step 1/(k+1)
    Converged means relative gap below tolerance and every used route within
    `cost_gap_tolerance` minutes of its OD's cheapest route.
    """
    missing = [od for od in demands if od not in route_sets]
    if missing:
        raise ValueError(f"No route set for OD {missing[0][0]}->{missing[0][1]}")

    flows = _all_or_nothing(load_network(network, {}, route_sets).route_times, route_sets, demands)
    loaded = load_network(network, flows, route_sets)
    iterations = 0

    def settled() -> bool:
        return (
            relative_gap(flows, loaded.route_times, demands) < config.relative_gap_tolerance
            and _max_cost_gap(flows, loaded.route_times, route_sets, demands) < config.cost_gap_tolerance
        )

    while not settled() and iterations < config.max_iterations:
        iterations += 1
        if config.step_rule == "projection":
            loaded = _projection_sweep(network, route_sets, flows, loaded)
            continue
        target = _all_or_nothing(loaded.route_times, route_sets, demands)
        if config.step_rule == "msa":
            step = 1.0 / (iterations + 1)
        else:
            step = _exact_step(network, loaded, load_network(network, target, route_sets))
        flows = {key: flow + step * (target[key] - flow) for key, flow in flows.items()}
        loaded = load_network(network, flows, route_sets)

    gap = relative_gap(flows, loaded.route_times, demands)
    max_gap = _max_cost_gap(flows, loaded.route_times, route_sets, demands)
    converged = settled()
    if not converged:
        logger.warning(
            "UE solver stopped after %d iterations at relative gap %.3g, cost gap %.3g min",
            iterations, gap, max_gap,
        )

    return DueSolution(
        route_flows=MappingProxyType(dict(flows)),
        route_costs=loaded.route_times,
        max_cost_gap=max_gap,
        relative_gap=gap,
        converged=converged,
        iterations=iterations,
    )


def scenario_due(config: ScenarioConfig, msa: MsaConfig = MsaConfig()) -> DueSolution:
    """Closed form for the builtin two-route scenarios, msa_ue for everything else."""
    if config.network in TWO_ROUTE_SCENARIOS and len(config.demands) == 1:
        demand = config.demands[0]
        route1, route2 = TWO_ROUTE_SCENARIOS[config.network]
        return two_route_due(route1, route2, demand.travelers, demand.od)
    network, route_sets = scenario_routes(config)
    return msa_ue(network, route_sets, config.demand_map, msa)
