"""Scenario files: flat sectioned text, `[section]` headers, `key = value`.

Sections: [sim], [node.<name>], [link.<name>], [flow.<name>], [handover.<n>].
Times are decimal seconds (must land on the microsecond grid), bandwidths
bits/second, sizes bytes. Unknown sections or keys are configuration errors
reported with their line number.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .kernel import SEC, fmt_time
from .net import ACCESS_KINDS, LINK_KINDS, HEADER_BYTES, LinkSpec, NodeSpec
from .mobility import RegistrationConfig

BASELINE = "BASELINE"
PROACTIVE = "PROACTIVE"
RESET_CWND = "RESET_CWND"
MODES = (BASELINE, PROACTIVE, RESET_CWND)

MODE_NAMES = {"baseline": BASELINE, "proactive": PROACTIVE, "reset-cwnd": RESET_CWND}
ROLES = ("cn", "ha", "mn", "gateway", "router")
DIRECTIONS = ("terr_to_sat", "sat_to_terr")

DEFAULT_EXEC_LEAD = SEC // 2  # satellite->terrestrial detection lead


@dataclass(frozen=True)
class FlowDef:
    name: str
    src: str
    dst: str
    start: int
    volume: Optional[int]  # None = unlimited bulk source
    weight: Fraction
    min_share: int
    buffer: int
    ack_extra_delay: int = 0


@dataclass(frozen=True)
class HandoverDef:
    name: str
    at: int  # detection time
    direction: str
    to: str
    exec_lead: int = DEFAULT_EXEC_LEAD
    ack_pacing: int = 0


@dataclass(frozen=True)
class Scenario:
    name: str
    end: int
    seed: int
    mode: str
    attach: str
    w_default: int
    sat_default_window: Optional[int]
    mss: int
    registration: RegistrationConfig
    nodes: tuple[NodeSpec, ...]
    links: tuple[LinkSpec, ...]
    flows: tuple[FlowDef, ...]
    handovers: tuple[HandoverDef, ...]


def _parse_time(raw: str, line: int, key: str) -> int:
    try:
        value = Decimal(raw) * SEC
    except InvalidOperation:
        raise ConfigError(f"bad time value {raw!r}", line, key) from None
    if value != value.to_integral_value():
        raise ConfigError(f"time {raw!r} is finer than 1 microsecond", line, key)
    micros = int(value)
    if micros < 0:
        raise ConfigError(f"time {raw!r} is negative", line, key)
    return micros


def _parse_int(raw: str, line: int, key: str, minimum: Optional[int] = None) -> int:
    try:
        value = int(Decimal(raw))
        if Decimal(raw) != value:
            raise InvalidOperation
    except InvalidOperation:
        raise ConfigError(f"expected an integer, got {raw!r}", line, key) from None
    if minimum is not None and value < minimum:
        raise ConfigError(f"value {value} below minimum {minimum}", line, key)
    return value


def _parse_bandwidth(raw: str, line: int, key: str) -> int:
    try:
        bits = Decimal(raw)
    except InvalidOperation:
        raise ConfigError(f"bad bandwidth {raw!r}", line, key) from None
    if bits <= 0 or bits != bits.to_integral_value() or int(bits) % 8:
        raise ConfigError(
            f"bandwidth {raw!r} must be a positive whole number of bits/s divisible by 8",
            line,
            key,
        )
    return int(bits) // 8


def _parse_availability(raw: str, line: int, key: str):
    windows = []
    for part in raw.split(","):
        try:
            start_s, end_s = part.split(":")
        except ValueError:
            raise ConfigError(f"availability windows look like start:end, got {part!r}", line, key)
        windows.append((_parse_time(start_s.strip(), line, key), _parse_time(end_s.strip(), line, key)))
    return tuple(windows)


class _Section:
    def __init__(self, kind: str, name: str, line: int):
        self.kind = kind
        self.name = name
        self.line = line
        self.items: dict[str, tuple[str, int]] = {}


def _split_sections(text: str, origin: str) -> list[_Section]:
    sections: list[_Section] = []
    current: Optional[_Section] = None
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        stripped = rawline.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ConfigError(f"{origin}: malformed section header", lineno)
            header = stripped[1:-1].strip()
            kind, _, name = header.partition(".")
            current = _Section(kind, name, lineno)
            sections.append(current)
            continue
        if "=" not in stripped:
            raise ConfigError(f"{origin}: expected key = value", lineno)
        if current is None:
            raise ConfigError(f"{origin}: key outside any section", lineno)
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key in current.items:
            raise ConfigError(f"{origin}: duplicate key", lineno, key)
        current.items[key] = (value.strip(), lineno)
    return sections


_SIM_KEYS = {
    "end", "seed", "mode", "attach", "w_default", "sat_default_window",
    "mss", "s2t_exec_lead", "registration", "proxy_gateway",
}
_NODE_KEYS = {"role", "kind"}
_LINK_KEYS = {"a", "b", "kind", "bandwidth", "delay", "queue", "availability"}
_FLOW_KEYS = {"src", "dst", "start", "volume", "weight", "min_share", "buffer", "ack_extra_delay"}
_HANDOVER_KEYS = {"at", "direction", "to", "exec_lead", "ack_pacing"}


def parse_scenario(text: str, name: str = "scenario") -> Scenario:
    sections = _split_sections(text, name)

    sim: dict[str, tuple[str, int]] = {}
    nodes: list[NodeSpec] = []
    links: list[LinkSpec] = []
    flows: list[FlowDef] = []
    handovers: list[HandoverDef] = []

    def check_keys(section: _Section, allowed: set[str]) -> None:
        for key, (_, line) in section.items.items():
            if key not in allowed:
                raise ConfigError(f"unknown key in [{section.kind}] section", line, key)

    def need(section: _Section, key: str) -> tuple[str, int]:
        if key not in section.items:
            raise ConfigError(f"[{section.kind}.{section.name}] missing key", section.line, key)
        return section.items[key]

    for section in sections:
        if section.kind == "sim":
            check_keys(section, _SIM_KEYS)
            sim = section.items
        elif section.kind == "node":
            check_keys(section, _NODE_KEYS)
            role_raw, role_line = need(section, "role")
            if role_raw not in ROLES:
                raise ConfigError(f"unknown role {role_raw!r}; valid: {', '.join(ROLES)}", role_line, "role")
            kind = None
            if "kind" in section.items:
                kind_raw, kind_line = section.items["kind"]
                if kind_raw not in ACCESS_KINDS:
                    raise ConfigError(f"gateway kind must be one of {ACCESS_KINDS}", kind_line, "kind")
                kind = kind_raw
            nodes.append(NodeSpec(section.name, role_raw, kind))
        elif section.kind == "link":
            check_keys(section, _LINK_KEYS)
            kind = "WIRED"
            if "kind" in section.items:
                kind_raw, kind_line = section.items["kind"]
                if kind_raw not in LINK_KINDS:
                    raise ConfigError(f"link kind must be one of {LINK_KINDS}", kind_line, "kind")
                kind = kind_raw
            availability = None
            if "availability" in section.items:
                avail_raw, avail_line = section.items["availability"]
                availability = _parse_availability(avail_raw, avail_line, "availability")
            links.append(
                LinkSpec(
                    name=section.name,
                    a=need(section, "a")[0],
                    b=need(section, "b")[0],
                    bandwidth=_parse_bandwidth(*need(section, "bandwidth"), key="bandwidth"),
                    prop_delay=_parse_time(*need(section, "delay"), key="delay"),
                    queue_capacity=_parse_int(*need(section, "queue"), key="queue", minimum=1),
                    kind=kind,
                    availability=availability,
                )
            )
        elif section.kind == "flow":
            check_keys(section, _FLOW_KEYS)
            volume = None
            if "volume" in section.items:
                vol = _parse_int(*section.items["volume"], key="volume", minimum=0)
                volume = vol or None
            weight = Fraction(1)
            if "weight" in section.items:
                weight_raw, weight_line = section.items["weight"]
                try:
                    weight = Fraction(weight_raw)
                except (ValueError, ZeroDivisionError):
                    raise ConfigError(f"bad weight {weight_raw!r}", weight_line, "weight") from None
                if weight <= 0:
                    raise ConfigError("weight must be positive", weight_line, "weight")
            flows.append(
                FlowDef(
                    name=section.name,
                    src=need(section, "src")[0],
                    dst=need(section, "dst")[0],
                    start=_parse_time(*need(section, "start"), key="start"),
                    volume=volume,
                    weight=weight,
                    min_share=_parse_int(*section.items["min_share"], key="min_share", minimum=0)
                    if "min_share" in section.items
                    else 0,
                    buffer=_parse_int(*section.items["buffer"], key="buffer", minimum=1)
                    if "buffer" in section.items
                    else 0,
                    ack_extra_delay=_parse_time(*section.items["ack_extra_delay"], key="ack_extra_delay")
                    if "ack_extra_delay" in section.items
                    else 0,
                )
            )
        elif section.kind == "handover":
            check_keys(section, _HANDOVER_KEYS)
            direction_raw, direction_line = need(section, "direction")
            if direction_raw not in DIRECTIONS:
                raise ConfigError(
                    f"unknown direction {direction_raw!r}; valid: {', '.join(DIRECTIONS)}",
                    direction_line,
                    "direction",
                )
            to_raw, to_line = need(section, "to")
            if to_raw not in ACCESS_KINDS:
                raise ConfigError(f"handover target must be one of {ACCESS_KINDS}", to_line, "to")
            handovers.append(
                (
                    HandoverDef(
                        name=section.name,
                        at=_parse_time(*need(section, "at"), key="at"),
                        direction=direction_raw,
                        to=to_raw,
                        exec_lead=_parse_time(*section.items["exec_lead"], key="exec_lead")
                        if "exec_lead" in section.items
                        else DEFAULT_EXEC_LEAD,
                        ack_pacing=_parse_time(*section.items["ack_pacing"], key="ack_pacing")
                        if "ack_pacing" in section.items
                        else 0,
                    ),
                    "exec_lead" in section.items,
                )
            )
        else:
            raise ConfigError(f"unknown section [{section.kind}]", section.line)

    if not sim:
        raise ConfigError(f"{name}: missing [sim] section")

    end = _parse_time(*need_sim(sim, "end", name), key="end")
    seed = 0
    if "seed" in sim:
        seed = _parse_int(*sim["seed"], key="seed", minimum=0)
        if seed >= 1 << 64:
            raise ConfigError("seed must fit in 64 bits", sim["seed"][1], "seed")
    mode = BASELINE
    if "mode" in sim:
        mode_raw, mode_line = sim["mode"]
        if mode_raw not in MODE_NAMES:
            raise ConfigError(
                f"unknown mode {mode_raw!r}; valid modes: {', '.join(sorted(MODE_NAMES))}",
                mode_line,
                "mode",
            )
        mode = MODE_NAMES[mode_raw]
    attach_raw, attach_line = need_sim(sim, "attach", name)
    if attach_raw not in ACCESS_KINDS:
        raise ConfigError(f"attach must be one of {ACCESS_KINDS}", attach_line, "attach")
    w_default = _parse_int(*need_sim(sim, "w_default", name), key="w_default", minimum=1)
    sat_default_window = (
        _parse_int(*sim["sat_default_window"], key="sat_default_window", minimum=1)
        if "sat_default_window" in sim
        else None
    )
    mss = _parse_int(*sim["mss"], key="mss", minimum=1) if "mss" in sim else 1460
    exec_lead_default = (
        _parse_time(*sim["s2t_exec_lead"], key="s2t_exec_lead") if "s2t_exec_lead" in sim else None
    )
    registration = RegistrationConfig()
    if "registration" in sim:
        reg_raw, reg_line = sim["registration"]
        if reg_raw not in ("MN", "PROXY"):
            raise ConfigError("registration must be MN or PROXY", reg_line, "registration")
        proxy = sim.get("proxy_gateway", (None, 0))[0]
        registration = RegistrationConfig(origin=reg_raw, proxy_location=proxy)

    resolved_handovers = []
    for ho, explicit in handovers:
        if not explicit and exec_lead_default is not None:
            ho = replace(ho, exec_lead=exec_lead_default)
        resolved_handovers.append(ho)

    scenario = Scenario(
        name=name,
        end=end,
        seed=seed,
        mode=mode,
        attach=attach_raw,
        w_default=w_default,
        sat_default_window=sat_default_window,
        mss=mss,
        registration=registration,
        nodes=tuple(nodes),
        links=tuple(links),
        flows=tuple(flows),
        handovers=tuple(sorted(resolved_handovers, key=lambda h: (h.at, h.name))),
    )
    validate_scenario(scenario)
    return scenario


def need_sim(sim: dict, key: str, origin: str) -> tuple[str, int]:
    if key not in sim:
        raise ConfigError(f"{origin}: [sim] missing key", None, key)
    return sim[key]


def validate_scenario(s: Scenario) -> None:
    node_names = {n.name for n in s.nodes}
    roles = [n.role for n in s.nodes]
    for role in ("mn", "cn", "ha"):
        if roles.count(role) != 1:
            raise ConfigError(f"scenario must define exactly one {role!r} node")
    mn = next(n.name for n in s.nodes if n.role == "mn")

    max_segment = s.mss + HEADER_BYTES
    seen_links = set()
    for link in s.links:
        if link.name in seen_links:
            raise ConfigError(f"duplicate link name {link.name!r}")
        seen_links.add(link.name)
        if link.a not in node_names or link.b not in node_names:
            raise ConfigError(f"link {link.name}: endpoint does not exist")
        link.validate(max_segment)

    access_kinds = {l.kind for l in s.links if mn in (l.a, l.b) and l.kind in ACCESS_KINDS}
    for kind in access_kinds:
        count = sum(1 for l in s.links if mn in (l.a, l.b) and l.kind == kind)
        if count > 1:
            raise ConfigError(f"the mobile node has {count} {kind} access links; expected one")
    if s.attach not in access_kinds:
        raise ConfigError(f"initial attachment {s.attach!r} has no access link at the mobile node")

    if not s.flows:
        raise ConfigError("scenario defines no flows")
    seen_flows = set()
    for flow in s.flows:
        if flow.name in seen_flows:
            raise ConfigError(f"duplicate flow name {flow.name!r}")
        seen_flows.add(flow.name)
        if flow.src not in node_names or flow.dst not in node_names:
            raise ConfigError(f"flow {flow.name}: endpoint does not exist")
        if flow.dst != mn:
            raise ConfigError(f"flow {flow.name}: destination must be the mobile node")
        if flow.start >= s.end:
            raise ConfigError(f"flow {flow.name}: starts at or after the end of the run")
        buffer = flow.buffer or s.w_default
        if buffer < s.mss:
            raise ConfigError(f"flow {flow.name}: receive buffer below one segment")

    for ho in s.handovers:
        if not 0 <= ho.at < s.end:
            raise ConfigError(f"handover {ho.name}: time {fmt_time(ho.at)} outside [0, end)")
        if ho.to not in access_kinds:
            raise ConfigError(f"handover {ho.name}: no {ho.to} access link at the mobile node")
        if ho.direction == "terr_to_sat" and s.sat_default_window is None:
            raise ConfigError(
                "terrestrial->satellite handovers need sat_default_window "
                "(fallback when no satellite estimate is cached)"
            )

    s.registration.validate({n.name for n in s.nodes if n.role == "gateway"})


def flow_buffer(s: Scenario, flow: FlowDef) -> int:
    return flow.buffer or s.w_default


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"scenario file {path} does not exist")
    return parse_scenario(path.read_text(), name=path.stem)


def canonical_text(s: Scenario) -> str:
    """Emit a normal form that parses back to an equal Scenario."""
    out = ["[sim]"]
    out.append(f"end = {fmt_time(s.end)}")
    out.append(f"seed = {s.seed}")
    out.append(f"mode = {next(k for k, v in MODE_NAMES.items() if v == s.mode)}")
    out.append(f"attach = {s.attach}")
    out.append(f"w_default = {s.w_default}")
    if s.sat_default_window is not None:
        out.append(f"sat_default_window = {s.sat_default_window}")
    out.append(f"mss = {s.mss}")
    out.append(f"registration = {s.registration.origin}")
    if s.registration.proxy_location:
        out.append(f"proxy_gateway = {s.registration.proxy_location}")
    for n in s.nodes:
        out.append(f"\n[node.{n.name}]")
        out.append(f"role = {n.role}")
        if n.kind:
            out.append(f"kind = {n.kind}")
    for l in s.links:
        out.append(f"\n[link.{l.name}]")
        out.append(f"a = {l.a}")
        out.append(f"b = {l.b}")
        if l.kind != "WIRED":
            out.append(f"kind = {l.kind}")
        out.append(f"bandwidth = {l.bandwidth * 8}")
        out.append(f"delay = {fmt_time(l.prop_delay)}")
        out.append(f"queue = {l.queue_capacity}")
        if l.availability is not None:
            windows = ",".join(f"{fmt_time(a)}:{fmt_time(b)}" for a, b in l.availability)
            out.append(f"availability = {windows}")
    for f in s.flows:
        out.append(f"\n[flow.{f.name}]")
        out.append(f"src = {f.src}")
        out.append(f"dst = {f.dst}")
        out.append(f"start = {fmt_time(f.start)}")
        if f.volume is not None:
            out.append(f"volume = {f.volume}")
        out.append(f"weight = {f.weight}")
        if f.min_share:
            out.append(f"min_share = {f.min_share}")
        if f.buffer:
            out.append(f"buffer = {f.buffer}")
        if f.ack_extra_delay:
            out.append(f"ack_extra_delay = {fmt_time(f.ack_extra_delay)}")
    for h in s.handovers:
        out.append(f"\n[handover.{h.name}]")
        out.append(f"at = {fmt_time(h.at)}")
        out.append(f"direction = {h.direction}")
        out.append(f"to = {h.to}")
        out.append(f"exec_lead = {fmt_time(h.exec_lead)}")
        if h.ack_pacing:
            out.append(f"ack_pacing = {fmt_time(h.ack_pacing)}")
    return "\n".join(out) + "\n"
