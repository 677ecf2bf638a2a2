"""Nodes, access links, drop-tail queues and path routing.

Store-and-forward at every hop: a segment is fully serialized onto a link
before propagating, and each directed link serves its FIFO queue at the
configured bandwidth. Drops (queue overflow, no radio coverage) are modeled
outcomes, not errors. Segments already accepted by a link when coverage
ends are still delivered; only new transmissions are blocked.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .kernel import Kernel, SEC
from .errors import ConfigError

# Wire overhead: 40 B TCP/IP header on data and pure-ACK segments,
# 60 B for registration (BU/BUACK) control segments.
HEADER_BYTES = 40
CONTROL_BYTES = 60

ACCESS_KINDS = ("WLAN", "GPRS", "SAT")
LINK_KINDS = ACCESS_KINDS + ("WIRED",)

# Segment flag bits.
F_DATA = 1
F_ACK = 2
F_BU = 4
F_BUACK = 8
F_WUPD = 16  # window-update ACK: never counted as a duplicate by the sender
F_REFRESH = 32  # state-refresh ACK emitted while duplicate ACKs are suppressed

OVERFLOW = "OVERFLOW"
NO_COVERAGE = "NO_COVERAGE"


@dataclass(frozen=True, slots=True)
class Drop:
    reason: str


@dataclass(slots=True)
class Segment:
    """One simulated TCP/registration segment (headers abstracted).

    `sent_at` is stamped at original emission; `echo` carries the data
    segment's send time back on cumulative ACKs for RTT sampling.
    `path_tag` records the access network that carried the segment,
    `routed_at` the time the home agent forwarded it.
    """

    flow_id: str
    seq: int = 0
    payload_len: int = 0
    ack: int = 0
    rwnd: int = 0
    flags: int = F_DATA
    sent_at: int = 0
    path_tag: Optional[str] = None
    echo: Optional[int] = None
    rexmit: bool = False
    routed_at: Optional[int] = None
    copy: int = 0
    mark: Optional[str] = None
    route: tuple = ()
    hop: int = 0

    def wire_size(self) -> int:
        if self.flags & (F_BU | F_BUACK):
            return CONTROL_BYTES
        return HEADER_BYTES + self.payload_len


@dataclass(frozen=True)
class LinkSpec:
    """Static description of one (bidirectional) link.

    bandwidth is bytes/second, prop_delay microseconds one-way,
    queue_capacity bytes per direction. `availability` lists the [start,
    end) windows during which the link is up; None means always up.
    """

    name: str
    a: str
    b: str
    bandwidth: int
    prop_delay: int
    queue_capacity: int
    kind: str = "WIRED"
    availability: Optional[tuple[tuple[int, int], ...]] = None

    def validate(self, min_segment: int) -> None:
        if self.bandwidth <= 0:
            raise ConfigError(f"link {self.name}: bandwidth must be > 0")
        if self.prop_delay < 0:
            raise ConfigError(f"link {self.name}: negative delay")
        if self.queue_capacity < min_segment:
            raise ConfigError(
                f"link {self.name}: queue {self.queue_capacity} B below one "
                f"maximum segment ({min_segment} B)"
            )
        if self.kind not in LINK_KINDS:
            raise ConfigError(f"link {self.name}: unknown kind {self.kind!r}")
        if self.availability is not None:
            prev_end = -1
            for start, end in self.availability:
                if start >= end or start < prev_end:
                    raise ConfigError(
                        f"link {self.name}: availability windows must be "
                        "sorted and disjoint"
                    )
                prev_end = end

    def serialization_us(self, wire_bytes: int) -> int:
        # ceil: a byte not fully clocked out has not left the node
        return (wire_bytes * SEC + self.bandwidth - 1) // self.bandwidth

    def is_available(self, at: int) -> bool:
        if self.availability is None:
            return True
        for start, end in self.availability:
            if start <= at < end:
                return True
        return False


class DirectedLink:
    """Runtime state of one direction of a link: drop-tail queue + serializer.

    Occupancy counts every byte accepted and not yet fully serialized,
    asserted <= capacity on each enqueue.
    """

    def __init__(self, spec: LinkSpec, src: str, dst: str, kernel: Kernel):
        self.spec = spec
        self.src = src
        self.dst = dst
        self.kernel = kernel
        self.occupancy = 0
        self.queue: list[Segment] = []
        self.free_at = 0  # when the serializer finishes its current backlog
        self.deliver: Callable[[DirectedLink, Segment], None] | None = None
        self.on_enqueue: Callable[[DirectedLink, Segment, int], None] | None = None
        self.on_drop: Callable[[DirectedLink, Segment, str, int], None] | None = None
        self.drops = {OVERFLOW: 0, NO_COVERAGE: 0}

    @property
    def label(self) -> str:
        return f"{self.spec.name}:{self.src}->{self.dst}"

    def transmit(self, seg: Segment, at: int) -> int | Drop:
        """Enqueue `seg` at time `at`; returns its arrival time or a Drop.

        Arrival = end of FIFO serialization + propagation delay. The drop
        outcome is also reported through on_drop so callers relying on the
        scheduled-events path need not inspect the return value.
        """
        wire = seg.wire_size()
        if not self.spec.is_available(at):
            return self._drop(seg, NO_COVERAGE, at)
        if self.occupancy + wire > self.spec.queue_capacity:
            return self._drop(seg, OVERFLOW, at)
        self.occupancy += wire
        assert self.occupancy <= self.spec.queue_capacity
        self.queue.append(seg)
        start = at if at > self.free_at else self.free_at
        finish = start + self.spec.serialization_us(wire)
        self.free_at = finish
        self.kernel.schedule(finish, self._dequeue, kind="link-tx")
        arrival = finish + self.spec.prop_delay
        self.kernel.schedule(arrival, lambda s=seg: self._arrive(s), kind="link-rx")
        if self.on_enqueue is not None:
            self.on_enqueue(self, seg, at)
        return arrival

    def _dequeue(self) -> None:
        seg = self.queue.pop(0)
        self.occupancy -= seg.wire_size()

    def _arrive(self, seg: Segment) -> None:
        if self.spec.kind in ACCESS_KINDS:
            seg.path_tag = self.spec.kind
        assert self.deliver is not None, f"link {self.label} not wired"
        self.deliver(self, seg)

    def _drop(self, seg: Segment, reason: str, at: int) -> Drop:
        self.drops[reason] += 1
        if self.on_drop is not None:
            self.on_drop(self, seg, reason, at)
        return Drop(reason)


@dataclass(frozen=True)
class NodeSpec:
    name: str
    role: str  # cn | ha | mn | gateway | router
    kind: Optional[str] = None  # access network kind for gateways


Route = tuple[DirectedLink, ...]


class Topology:
    """Node/link graph with deterministic shortest-delay routing.

    Routes minimize total one-way propagation delay, breaking ties first on
    hop count and then on the lexicographic node sequence, so identical
    scenarios route identically everywhere.
    """

    def __init__(self, nodes: list[NodeSpec], links: list[LinkSpec], kernel: Kernel):
        self.nodes = {n.name: n for n in nodes}
        self.links = {l.name: l for l in links}
        self.kernel = kernel
        self.directed: dict[tuple[str, str], DirectedLink] = {}
        self._adj: dict[str, list[tuple[str, LinkSpec]]] = {n.name: [] for n in nodes}
        for spec in links:
            for src, dst in ((spec.a, spec.b), (spec.b, spec.a)):
                if src not in self.nodes or dst not in self.nodes:
                    raise ConfigError(f"link {spec.name}: unknown node {src!r}/{dst!r}")
                self.directed[(src, dst)] = DirectedLink(spec, src, dst, kernel)
                self._adj[src].append((dst, spec))
        for adj in self._adj.values():
            adj.sort(key=lambda e: (e[0], e[1].name))
        self._route_cache: dict[tuple[str, str], Route] = {}

    def node_with_role(self, role: str) -> str:
        names = [n.name for n in self.nodes.values() if n.role == role]
        if len(names) != 1:
            raise ConfigError(f"topology must define exactly one {role!r} node, found {names}")
        return names[0]

    def access_gateway(self, kind: str) -> str:
        mn = self.node_with_role("mn")
        for (src, dst), dl in sorted(self.directed.items()):
            if src == mn and dl.spec.kind == kind:
                return dst
        raise ConfigError(f"no {kind} access link attached to the mobile node")

    def access_link(self, kind: str) -> LinkSpec:
        mn = self.node_with_role("mn")
        for (src, _), dl in sorted(self.directed.items()):
            if src == mn and dl.spec.kind == kind:
                return dl.spec
        raise ConfigError(f"no {kind} access link attached to the mobile node")

    def route(self, src: str, dst: str, avoid_mn_access: bool = True) -> Route:
        """Shortest-delay route; never transits the MN's radio links unless
        one endpoint is the MN itself."""
        key = (src, dst)
        cached = self._route_cache.get(key)
        if cached is not None:
            return cached
        mn = next((n.name for n in self.nodes.values() if n.role == "mn"), None)
        best: dict[str, tuple[int, int, tuple[str, ...]]] = {src: (0, 0, (src,))}
        frontier = [(0, 0, (src,), src)]
        import heapq as _hq

        while frontier:
            cost, hops, path, here = _hq.heappop(frontier)
            if best.get(here, (None,))[0:3] != (cost, hops, path):
                continue
            if here == dst:
                break
            for nxt, spec in self._adj[here]:
                if avoid_mn_access and mn is not None and mn in (here, nxt) and mn not in (src, dst):
                    continue
                cand = (cost + spec.prop_delay, hops + 1, path + (nxt,))
                if nxt not in best or cand < best[nxt]:
                    best[nxt] = cand
                    _hq.heappush(frontier, cand + (nxt,))
        if dst not in best:
            raise ConfigError(f"no route from {src} to {dst}")
        names = best[dst][2]
        hops = tuple(self.directed[(names[i], names[i + 1])] for i in range(len(names) - 1))
        self._route_cache[key] = hops
        return hops

    def route_via_access(self, src: str, dst: str, kind: str) -> Route:
        """Route whose first (or last) hop is the MN's access link of `kind`."""
        mn = self.node_with_role("mn")
        gw = self.access_gateway(kind)
        if src == mn:
            first = self.directed[(mn, gw)]
            return (first,) + (self.route(gw, dst) if gw != dst else ())
        last = self.directed[(gw, mn)]
        assert dst == mn
        return (self.route(src, gw) if src != gw else ()) + (last,)


def path_rtt(route: Route, probe_size: int = 0, at: Optional[int] = None) -> int:
    """Round-trip latency of a probe over `route` and back, empty queues.

    Symmetric links: RTT = 2 * sum(serialization + propagation) per hop.
    Raises ConfigError(UNREACHABLE) if a hop is unavailable at `at`.
    """
    total = 0
    for hop in route:
        if at is not None and not hop.spec.is_available(at):
            raise ConfigError(f"UNREACHABLE: link {hop.spec.name} down at probe time")
        total += hop.spec.prop_delay + hop.spec.serialization_us(probe_size)
    return 2 * total


@dataclass(frozen=True)
class RttTable:
    """The three round-trip terms feeding the registration-delay bound."""

    mn_sat_cn: int
    mn_sat_ha: int
    mn_old_ha: int


def rtt_table(topo: Topology, old_kind: str, sat_kind: str = "SAT") -> RttTable:
    """Propagation RTTs MN<->CN over the satellite, MN<->HA over the
    satellite, and MN<->HA over the old access network (zero-size probe)."""
    mn = topo.node_with_role("mn")
    cn = topo.node_with_role("cn")
    ha = topo.node_with_role("ha")
    via_sat_cn = topo.route_via_access(mn, cn, sat_kind)
    via_sat_ha = topo.route_via_access(mn, ha, sat_kind)
    via_old_ha = topo.route_via_access(mn, ha, old_kind)
    return RttTable(
        mn_sat_cn=path_rtt(via_sat_cn),
        mn_sat_ha=path_rtt(via_sat_ha),
        mn_old_ha=path_rtt(via_old_ha),
    )
