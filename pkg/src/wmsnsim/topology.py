"""Stations and the static network graph.

Cluster heads carry a directional optical transmitter (a sector) plus an
omnidirectional photodetector and an omnidirectional radio, so optical
links are directional and may be asymmetric while radio links are plain
disk links. The base station is reached over dedicated optical uplinks
and takes no part in radio contention. Sensor nodes are abstracted to
traffic sources attached to their nearest cluster head.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from enum import Enum

from .geometry import (
    GridCell,
    GridSpec,
    Point,
    Sector,
    distance,
    grid_of,
    sector_contains,
)


class UnknownStationError(KeyError):
    """Raised for a station id that is not part of the network."""


class NotClusterHeadError(ValueError):
    """Raised when an optical-transmit operation names a non cluster head."""


class StationKind(str, Enum):
    CLUSTER_HEAD = "cluster_head"
    SENSOR_NODE = "sensor_node"
    BASE_STATION = "base_station"


@dataclass(frozen=True)
class Station:
    id: int
    kind: StationKind
    position: Point
    rf_range: float = 0.0
    sector: Sector | None = None
    grid: GridCell | None = None

    def __post_init__(self):
        if self.id < 0:
            raise ValueError(f"station id must be non-negative, got {self.id}")
        if self.rf_range < 0.0:
            raise ValueError(f"rf_range must be >= 0, got {self.rf_range}")
        if self.kind is StationKind.CLUSTER_HEAD:
            if self.sector is None:
                raise ValueError(f"cluster head {self.id} needs a sector")
            if self.sector.apex != self.position:
                raise ValueError(f"station {self.id}: sector apex off position")


@dataclass(frozen=True)
class NeighborTable:
    station: int
    fso: frozenset[int]
    rf: frozenset[int]


class Network:
    """Immutable station set plus the grid layout. Positions never change
    during a run, so neighborhoods are safe to precompute and cache."""

    def __init__(self, stations, sink: int, grid_spec: GridSpec):
        by_id: dict[int, Station] = {}
        for st in sorted(stations, key=lambda s: s.id):
            if st.id in by_id:
                raise ValueError(f"duplicate station id {st.id}")
            by_id[st.id] = replace(st, grid=grid_of(st.position, grid_spec))
        if sink not in by_id:
            raise UnknownStationError(sink)
        if by_id[sink].kind is not StationKind.BASE_STATION:
            raise ValueError(f"sink {sink} is not a base station")
        bases = [s.id for s in by_id.values() if s.kind is StationKind.BASE_STATION]
        if len(bases) != 1:
            raise ValueError(f"exactly one base station required, got {bases}")
        self._stations = by_id
        self.sink = sink
        self.grid_spec = grid_spec

    def station(self, sid: int) -> Station:
        try:
            return self._stations[sid]
        except KeyError:
            raise UnknownStationError(sid) from None

    def ids(self) -> tuple[int, ...]:
        return tuple(self._stations)

    def stations(self) -> tuple[Station, ...]:
        return tuple(self._stations.values())

    def cluster_heads(self) -> tuple[Station, ...]:
        return tuple(
            s for s in self._stations.values() if s.kind is StationKind.CLUSTER_HEAD
        )

    def __contains__(self, sid: int) -> bool:
        return sid in self._stations


def rf_neighbors(net: Network, x: int) -> frozenset[int]:
    """Stations inside x's radio range (x excluded). Uses the sender's own
    range, so unequal ranges make this asymmetric."""
    me = net.station(x)
    return frozenset(
        s.id
        for s in net.stations()
        if s.id != x and distance(me.position, s.position) <= me.rf_range
    )


def common_range(net: Network, x: int, y: int) -> frozenset[int]:
    """Stations audible to both x and y (neither endpoint included)."""
    return (rf_neighbors(net, x) & rf_neighbors(net, y)) - {x, y}


def fso_can_transmit(net: Network, frm: int, to: int) -> bool:
    """True iff the optical beam of `frm` covers station `to`.

    Only cluster heads transmit optically; receive needs no aiming because
    photodetectors are omnidirectional. Directionality makes this relation
    asymmetric in general.
    """
    sender = net.station(frm)
    target = net.station(to)
    if sender.kind is not StationKind.CLUSTER_HEAD:
        raise NotClusterHeadError(f"station {frm} has no optical transmitter")
    if frm == to:
        return False
    return sector_contains(sender.sector, target.position)


def discover_neighbors(net: Network, x: int) -> NeighborTable:
    """Both neighbor sets of one station."""
    me = net.station(x)
    if me.kind is StationKind.CLUSTER_HEAD:
        fso = frozenset(
            s.id
            for s in net.stations()
            if s.id != x and sector_contains(me.sector, s.position)
        )
    else:
        fso = frozenset()
    return NeighborTable(station=x, fso=fso, rf=rf_neighbors(net, x))


def rf_hop_distance(net: Network, a: int, b: int) -> int | None:
    """Hop count of the shortest bidirectional radio path a..b, or None if
    disconnected. Edges require each endpoint inside the other's range."""
    if a == b:
        return 0
    net.station(a), net.station(b)
    stations = net.stations()
    adj: dict[int, list[int]] = {s.id: [] for s in stations}
    for s in stations:
        for t in stations:
            if s.id < t.id:
                d = distance(s.position, t.position)
                if d <= s.rf_range and d <= t.rf_range:
                    adj[s.id].append(t.id)
                    adj[t.id].append(s.id)
    seen = {a: 0}
    queue = deque([a])
    while queue:
        cur = queue.popleft()
        for nxt in adj[cur]:
            if nxt not in seen:
                seen[nxt] = seen[cur] + 1
                if nxt == b:
                    return seen[nxt]
                queue.append(nxt)
    return None
