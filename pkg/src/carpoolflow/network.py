"""The carpooling network: a directed graph of meeting points, plus lines.

A carpooling line is an ordered sequence of meeting points between which the
service is guaranteed. A line may be realized by several node sequences on
the graph ("variants"): every simple directed path between the line's
endpoints that passes its intermediate nodes in order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Sequence, Set, Tuple

from .errors import (
    DuplicateIdError,
    NetworkTooLargeError,
    SelfLoopError,
    UnknownEndpointError,
    UnknownNodeError,
)
from .geo import GeoPoint

MAX_ENUMERATION_NODES = 64


@dataclass(frozen=True)
class MeetingPoint:
    """A fixed physical carpooling stop."""

    id: str
    name: str
    location: GeoPoint


@dataclass(frozen=True)
class CarpoolLine:
    """An ordered, repeat-free sequence of at least two meeting-point ids."""

    node_ids: Tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "node_ids", tuple(self.node_ids))
        if len(self.node_ids) < 2:
            raise ValueError("a carpooling line needs at least two meeting points")
        if len(set(self.node_ids)) != len(self.node_ids):
            raise ValueError(f"line {self.node_ids} repeats a meeting point")

    @property
    def first(self) -> str:
        return self.node_ids[0]

    @property
    def last(self) -> str:
        return self.node_ids[-1]

    def label(self) -> str:
        return ">".join(self.node_ids)


class CarpoolNetwork:
    """Directed meeting-point graph. Immutable after construction."""

    def __init__(self, points: Iterable[MeetingPoint], edges: Iterable[Tuple[str, str]]):
        nodes: Dict[str, MeetingPoint] = {}
        for point in points:
            if point.id in nodes:
                raise DuplicateIdError(f"duplicate meeting point id {point.id!r}")
            nodes[point.id] = point
        edge_set: Set[Tuple[str, str]] = set()
        succ: Dict[str, List[str]] = {node_id: [] for node_id in nodes}
        for from_id, to_id in edges:
            if from_id == to_id:
                raise SelfLoopError(f"self-loop edge on {from_id!r}")
            for endpoint in (from_id, to_id):
                if endpoint not in nodes:
                    raise UnknownEndpointError(f"edge endpoint {endpoint!r} is not a meeting point")
            if (from_id, to_id) not in edge_set:
                edge_set.add((from_id, to_id))
                succ[from_id].append(to_id)
        self._nodes = nodes
        self._edges = frozenset(edge_set)
        # sorted successor lists keep traversals deterministic
        self._succ = {k: tuple(sorted(v)) for k, v in succ.items()}

    @property
    def points(self) -> Tuple[MeetingPoint, ...]:
        return tuple(self._nodes[node_id] for node_id in sorted(self._nodes))

    @property
    def edges(self) -> FrozenSet[Tuple[str, str]]:
        return self._edges

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._nodes

    def __len__(self) -> int:
        return len(self._nodes)

    def node(self, node_id: str) -> MeetingPoint:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise UnknownNodeError(f"unknown meeting point {node_id!r}") from None

    def successors(self, node_id: str) -> Tuple[str, ...]:
        if node_id not in self._nodes:
            raise UnknownNodeError(f"unknown meeting point {node_id!r}")
        return self._succ[node_id]


def build_network(points: Sequence[MeetingPoint], edges: Sequence[Tuple[str, str]]) -> CarpoolNetwork:
    """Validate and build a :class:`CarpoolNetwork`.

    Rejects duplicate node ids, edges with unknown endpoints, and self-loops.
    """
    return CarpoolNetwork(points, edges)


def line_variants(network: CarpoolNetwork, line: CarpoolLine) -> Set[Tuple[str, ...]]:
    """All node sequences on the graph that realize ``line``.

    A variant is a simple directed path from the line's first node to its
    last node that visits the line's intermediate nodes in order; other
    network nodes may be interleaved. Returns the empty set when the graph
    offers no such path.
    """
    for node_id in line.node_ids:
        if node_id not in network:
            raise UnknownNodeError(f"line node {node_id!r} is not in the network")
    if len(network) > MAX_ENUMERATION_NODES:
        raise NetworkTooLargeError(
            f"variant enumeration capped at {MAX_ENUMERATION_NODES} nodes, network has {len(network)}"
        )

    required = line.node_ids[1:-1]
    variants: Set[Tuple[str, ...]] = set()

    def walk(current: str, path: List[str], on_path: Set[str], matched: int) -> None:
        if current == line.last:
            if matched == len(required):
                variants.add(tuple(path))
            return
        for nxt in network.successors(current):
            if nxt in on_path:
                continue
            # greedy subsequence matching of the required intermediate order
            advance = 1 if matched < len(required) and nxt == required[matched] else 0
            path.append(nxt)
            on_path.add(nxt)
            walk(nxt, path, on_path, matched + advance)
            on_path.remove(nxt)
            path.pop()

    walk(line.first, [line.first], {line.first}, 0)
    return variants
