"""Home-agent anchoring: binding table, registration signaling, redirection.

The rendezvous/home-agent roles are collapsed into one node. Registration
processing takes zero time at the agent itself; all latency comes from the
paths the 60-byte BU/BUACK control segments travel, and those segments
share link queues with data (congestion can delay them).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .errors import ConfigError
from .net import F_BU, F_BUACK, Segment

MIP_FLOW = "_mip"  # pseudo flow id carried by registration segments


@dataclass(frozen=True)
class RegistrationConfig:
    """Where binding updates originate: the mobile node itself, or a
    network-side proxy sitting in the target access gateway."""

    origin: str = "MN"  # MN | PROXY
    proxy_location: Optional[str] = None  # gateway override when PROXY

    def validate(self, gateway_names: set[str]) -> None:
        if self.origin not in ("MN", "PROXY"):
            raise ConfigError(f"registration origin must be MN or PROXY, got {self.origin!r}")
        if self.origin == "PROXY" and self.proxy_location is not None:
            if self.proxy_location not in gateway_names:
                raise ConfigError(
                    f"proxy location {self.proxy_location!r} is not a gateway node"
                )


@dataclass
class Binding:
    attachment: str  # access network kind the address belongs to
    registered_at: int


class BindingTable:
    """Per-MN ordered bindings; the newest is active, older ones are kept
    (multi-binding capable agent)."""

    def __init__(self):
        self.entries: dict[str, list[Binding]] = {}

    def register(self, mn: str, attachment: str, at: int) -> Binding:
        bindings = self.entries.setdefault(mn, [])
        if bindings and at < bindings[-1].registered_at:
            raise ConfigError("binding registrations must not go back in time")
        binding = Binding(attachment, at)
        bindings.append(binding)
        return binding

    def active(self, mn: str) -> Optional[Binding]:
        bindings = self.entries.get(mn)
        return bindings[-1] if bindings else None

    def active_as_of(self, mn: str, at: int) -> Optional[Binding]:
        """Newest binding with registered_at <= at (None before the first).

        This is the single redirection boundary: arrivals strictly before a
        binding's registration use the previous one."""
        best = None
        for b in self.entries.get(mn, ()):
            if b.registered_at <= at:
                best = b
            else:
                break
        return best


def make_binding_update(mn: str, attachment: str, at: int) -> Segment:
    return Segment(flow_id=MIP_FLOW, flags=F_BU, sent_at=at, path_tag=attachment)


class HomeAgent:
    """Redirects anchored traffic to the MN's active binding and answers
    binding updates with BUACKs over the path they arrived on."""

    def __init__(self, node: str, mn: str):
        self.node = node
        self.mn = mn
        self.table = BindingTable()
        self.no_binding_drops = 0
        # observation hooks, wired by the runner
        self.on_registration: Callable[[Segment, int], None] | None = None
        self.on_data: Callable[[Segment, int], None] | None = None

    def handle_binding_update(self, seg: Segment, now: int) -> Segment:
        """Register the new attachment and produce the BUACK; the caller
        sends it back over the new path (its arrival defines t_r3)."""
        assert seg.flags & F_BU
        self.table.register(self.mn, seg.path_tag or "?", now)
        if self.on_registration is not None:
            self.on_registration(seg, now)
        return Segment(flow_id=MIP_FLOW, flags=F_BUACK, sent_at=now, path_tag=seg.path_tag)

    def route_attachment(self, seg: Segment, now: int) -> Optional[str]:
        """Pick the access network for a data segment arriving now; None
        (counted) when the MN has no binding yet."""
        binding = self.table.active_as_of(self.mn, now)
        if binding is None:
            self.no_binding_drops += 1
            return None
        seg.routed_at = now
        if self.on_data is not None:
            self.on_data(seg, now)
        return binding.attachment
