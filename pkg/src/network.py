"""
Road network model.

Links carry a linear performance function (free-flow time plus slope times
flow). Routes are loop-free link sequences for one OD pair. Daily loading
turns route flows into link flows, link times and route times.
"""

from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import TYPE_CHECKING, Dict, Iterable, Mapping, Tuple, Union

import networkx as nx

if TYPE_CHECKING:
    from src.routesets import RouteSet

OD = Tuple[str, str]
RouteKey = Tuple[OD, int]


class NetworkError(ValueError):
    """Invalid link, route, network file or loading input."""


@dataclass(frozen=True)
class Link:
    id: str
    from_node: str
    to_node: str
    free_flow_time: float
    slope: float

    def __post_init__(self):
        if self.free_flow_time < 0:
            raise NetworkError(f"Link {self.id}: free_flow_time must be >= 0, got {self.free_flow_time}")
        if self.slope < 0:
            raise NetworkError(f"Link {self.id}: slope must be >= 0, got {self.slope}")
        if self.from_node == self.to_node:
            raise NetworkError(f"Link {self.id}: self-loop on node {self.from_node}")


def link_cost(link: Link, flow: float) -> float:
    """Travel time in minutes of `link` carrying `flow`."""
    if flow < 0:
        raise NetworkError(f"Negative flow {flow} on link {link.id}")
    return link.free_flow_time + link.slope * flow


class Network:
    """
    Directed graph of nodes and links. Parallel links between the same
    node pair are allowed (the two-route scenarios use them).
    Immutable after construction.
    """

    def __init__(self, nodes: Iterable[str], links: Iterable[Link]):
        self._nodes = frozenset(str(n) for n in nodes)
        self._links = tuple(links)

        by_id: Dict[str, Link] = {}
        for link in self._links:
            if link.id in by_id:
                raise NetworkError(f"Duplicate link id {link.id}")
            for endpoint in (link.from_node, link.to_node):
                if endpoint not in self._nodes:
                    raise NetworkError(f"Link {link.id} references undeclared node {endpoint}")
            by_id[link.id] = link
        self._by_id = MappingProxyType(by_id)

        adjacency: Dict[str, list] = {node: [] for node in self._nodes}
        for link in self._links:
            adjacency[link.from_node].append(link)
        self._adjacency = MappingProxyType(
            {node: tuple(sorted(out, key=lambda l: l.id)) for node, out in adjacency.items()}
        )

    @property
    def nodes(self) -> frozenset:
        return self._nodes

    @property
    def links(self) -> Tuple[Link, ...]:
        return self._links

    def __contains__(self, node: str) -> bool:
        return node in self._nodes

    def link(self, link_id: str) -> Link:
        try:
            return self._by_id[link_id]
        except KeyError:
            raise NetworkError(f"Unknown link {link_id}") from None

    def outgoing(self, node: str) -> Tuple[Link, ...]:
        """Outgoing links of `node`, sorted by link id."""
        return self._adjacency.get(node, ())

    def to_digraph(self) -> nx.MultiDiGraph:
        """networkx view with free-flow times as edge weights."""
        graph = nx.MultiDiGraph()
        graph.add_nodes_from(sorted(self._nodes))
        for link in self._links:
            graph.add_edge(link.from_node, link.to_node, key=link.id, weight=link.free_flow_time)
        return graph


@dataclass(frozen=True)
class Route:
    od: OD
    links: Tuple[Link, ...]

    def __post_init__(self):
        origin, destination = self.od
        if not self.links:
            raise NetworkError(f"Route for OD {origin}->{destination} has no links")
        if self.links[0].from_node != origin:
            raise NetworkError(f"Route does not start at origin {origin}")
        if self.links[-1].to_node != destination:
            raise NetworkError(f"Route does not end at destination {destination}")
        for prev, nxt in zip(self.links, self.links[1:]):
            if prev.to_node != nxt.from_node:
                raise NetworkError(f"Links {prev.id} and {nxt.id} are not consecutive")
        nodes = self.nodes
        if len(set(nodes)) != len(nodes):
            raise NetworkError(f"Route {'-'.join(nodes)} repeats a node")

    @property
    def nodes(self) -> Tuple[str, ...]:
        return (self.links[0].from_node,) + tuple(link.to_node for link in self.links)

    @property
    def link_ids(self) -> Tuple[str, ...]:
        return tuple(link.id for link in self.links)

    @property
    def free_flow_time(self) -> float:
        return sum(link.free_flow_time for link in self.links)


def route_time(route: Route, link_times: Mapping[str, float]) -> float:
    """Sum of the route's link times."""
    total = 0.0
    for link in route.links:
        if link.id not in link_times:
            raise NetworkError(f"Link {link.id} missing from link times")
        total += link_times[link.id]
    return total


@dataclass(frozen=True)
class LoadResult:
    link_flows: Mapping[str, float]
    link_times: Mapping[str, float]
    route_times: Mapping[RouteKey, float]

    def od_route_times(self, od: OD, route_count: int) -> Tuple[float, ...]:
        return tuple(self.route_times[(od, index)] for index in range(route_count))


def load_network(
    network: Network,
    route_flows: Mapping[RouteKey, float],
    route_sets: Mapping[OD, "RouteSet"],
) -> LoadResult:
    """
    Assign route flows to links and evaluate every link and route time.
    Route times are reported for all routes, including those carrying no flow.
    """
    link_flows: Dict[str, float] = {link.id: 0.0 for link in network.links}

    for (od, index), flow in route_flows.items():
        if od not in route_sets:
            raise NetworkError(f"Flow on unknown OD {od[0]}->{od[1]}")
        routes = route_sets[od].routes
        if not 0 <= index < len(routes):
            raise NetworkError(f"Unknown route index {index} for OD {od[0]}->{od[1]}")
        if flow < 0:
            raise NetworkError(f"Negative flow {flow} on route {index} of OD {od[0]}->{od[1]}")
        for link in routes[index].links:
            link_flows[link.id] += flow

    link_times = {link.id: link_cost(link, link_flows[link.id]) for link in network.links}
    route_times = {
        (od, index): route_time(route, link_times)
        for od, route_set in route_sets.items()
        for index, route in enumerate(route_set.routes)
    }
    return LoadResult(
        link_flows=MappingProxyType(link_flows),
        link_times=MappingProxyType(link_times),
        route_times=MappingProxyType(route_times),
    )


def read_network(filepath: Union[str, Path]) -> Network:
    """
    Parse a network file: header `nodes N` (nodes are "1".."N"), then one
    directed link per line `id from to t0 slope`. `#` starts a comment.
    """
    path = Path(filepath)
    if not path.exists():
        raise ValueError(f"File not found: {path}")

    node_count = None
    links = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()

        if parts[0] == "nodes":
            if node_count is not None or len(parts) != 2:
                raise NetworkError(f"{path}:{lineno}: malformed or repeated 'nodes' header")
            try:
                node_count = int(parts[1])
            except ValueError:
                raise NetworkError(f"{path}:{lineno}: node count must be an integer") from None
            continue

        if node_count is None:
            raise NetworkError(f"{path}:{lineno}: link before 'nodes' header")
        if len(parts) != 5:
            raise NetworkError(f"{path}:{lineno}: expected 'id from to t0 slope'")
        link_id, source, target, t0, slope = parts
        try:
            links.append(Link(link_id, source, target, float(t0), float(slope)))
        except ValueError as e:
            raise NetworkError(f"{path}:{lineno}: {e}") from None

    if node_count is None:
        raise NetworkError(f"{path}: missing 'nodes' header")
    return Network((str(i) for i in range(1, node_count + 1)), links)
