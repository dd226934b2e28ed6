"""
k-shortest loop-free route sets (Yen's algorithm) on free-flow times.

Paths are ordered by (free-flow cost, link-id sequence), so ties are broken
lexicographically and the output is deterministic.
"""

import heapq
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

import networkx as nx

from src.network import OD, Link, Network, Route

PathKey = Tuple[float, Tuple[str, ...]]


class RouteSetError(ValueError):
    """Invalid route-set request (unknown node, bad k, unreachable OD)."""


@dataclass(frozen=True)
class RouteSet:
    od: OD
    routes: Tuple[Route, ...]
    k: int

    def __len__(self) -> int:
        return len(self.routes)

    @property
    def free_flow_times(self) -> Tuple[float, ...]:
        return tuple(route.free_flow_time for route in self.routes)


def _path_cost(links: Iterable[Link]) -> float:
    return sum(link.free_flow_time for link in links)


def _shortest_path(
    network: Network,
    source: str,
    target: str,
    banned_links: FrozenSet[str] = frozenset(),
    banned_nodes: FrozenSet[str] = frozenset(),
) -> Optional[Tuple[Link, ...]]:
    """
    Dijkstra returning the (cost, link-id sequence)-minimal path, or None.
    Heap entries carry the id sequence so equal-cost labels resolve lexicographically.
    """
    best: Dict[str, PathKey] = {source: (0.0, ())}
    heap = [(0.0, (), source, ())]
    settled = set()

    while heap:
        cost, ids, node, links = heapq.heappop(heap)
        if node in settled:
            continue
        settled.add(node)
        if node == target:
            return links

        for link in network.outgoing(node):
            nxt = link.to_node
            if link.id in banned_links or nxt in banned_nodes or nxt in settled:
                continue
            label = (cost + link.free_flow_time, ids + (link.id,))
            if nxt not in best or label < best[nxt]:
                best[nxt] = label
                heapq.heappush(heap, (label[0], label[1], nxt, links + (link,)))
    return None


def k_shortest_routes(network: Network, origin: str, destination: str, k: int) -> RouteSet:
    """Yen's k shortest loop-free paths from `origin` to `destination`."""
    if k < 1:
        raise RouteSetError(f"k must be >= 1, got {k}")
    for node in (origin, destination):
        if node not in network:
            raise RouteSetError(f"Unknown node {node}")
    if origin == destination:
        raise RouteSetError(f"Origin and destination coincide ({origin})")
    if not nx.has_path(network.to_digraph(), origin, destination):
        raise RouteSetError(f"Destination unreachable for OD {origin}->{destination}")

    first = _shortest_path(network, origin, destination)
    accepted: List[Tuple[Link, ...]] = [first]
    seen = {tuple(link.id for link in first)}
    candidates: list = []

    while len(accepted) < k:
        previous = accepted[-1]
        prev_nodes = (previous[0].from_node,) + tuple(link.to_node for link in previous)

        for i in range(len(previous)):
            spur_node = prev_nodes[i]
            root = previous[:i]
            root_ids = tuple(link.id for link in root)

            # Links leaving the spur node along any accepted path sharing this root
            banned_links = frozenset(
                path[i].id
                for path in accepted
                if len(path) > i and tuple(link.id for link in path[:i]) == root_ids
            )
            banned_nodes = frozenset(prev_nodes[:i])

            spur = _shortest_path(network, spur_node, destination, banned_links, banned_nodes)
            if spur is None:
                continue
            path = root + spur
            ids = root_ids + tuple(link.id for link in spur)
            if ids in seen:
                continue
            seen.add(ids)
            heapq.heappush(candidates, (_path_cost(path), ids, path))

        if not candidates:
            break
        _, _, best = heapq.heappop(candidates)
        accepted.append(best)

    od = (origin, destination)
    return RouteSet(od=od, routes=tuple(Route(od, path) for path in accepted), k=k)


def build_route_sets(network: Network, ods: Iterable[OD], k: int) -> Dict[OD, RouteSet]:
    return {od: k_shortest_routes(network, od[0], od[1], k) for od in ods}
