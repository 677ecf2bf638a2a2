"""Run metrics, the trace log, and the comparison CSV schema."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Optional

from .kernel import SEC, fmt_time

CSV_COLUMNS = [
    "scenario", "mode", "seed", "flow_id", "goodput_bps", "retransmits",
    "spurious_retransmits", "rto_count", "drops_old_path", "drops_new_path",
    "handover_gap_ms", "t_a0", "t_a1", "t_a2", "t_r0", "t_r1", "t_r3",
    "old_path_enqueues_after_tr1",
]

TIMELINE_LABELS = ("t_a0", "t_a1", "t_a2", "t_r0", "t_r1", "t_r3")


class Trace:
    """Event log: one line per event, `<time_s> <event> <node> <k=v ...>`,
    kept in event order. Disabled tracing costs one branch per call."""

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self.lines: list[str] = []

    def emit(self, t_us: int, event: str, node: str, **kv) -> None:
        if not self.enabled:
            return
        if kv:
            tail = " " + " ".join(f"{k}={v}" for k, v in kv.items())
        else:
            tail = ""
        self.lines.append(f"{fmt_time(t_us)} {event} {node}{tail}")

    def text(self) -> str:
        return "\n".join(self.lines) + ("\n" if self.lines else "")


@dataclass
class FlowMetrics:
    flow_id: str
    start: int
    bytes_sent: int = 0  # payload bytes of every transmitted copy
    bytes_delivered: int = 0  # payload bytes of every copy reaching the MN
    bytes_dropped: int = 0
    bytes_inflight_end: int = 0
    delivered_inorder: int = 0
    last_inorder_at: Optional[int] = None
    retransmits: int = 0
    spurious_retransmits: int = 0
    rto_count: int = 0
    fast_retransmits: int = 0
    rto_times: list[int] = field(default_factory=list)
    fr_times: list[int] = field(default_factory=list)
    inorder_times: list[int] = field(default_factory=list)
    max_rwnd_increase: int = 0
    receiver_overflows: int = 0

    def goodput_bps(self) -> float:
        if self.last_inorder_at is None or self.last_inorder_at <= self.start:
            return 0.0
        duration = self.last_inorder_at - self.start
        return self.delivered_inorder * 8 * SEC / duration

    def conservation_residual(self) -> int:
        return self.bytes_sent - (
            self.bytes_delivered + self.bytes_dropped + self.bytes_inflight_end
        )

    def recoveries_within(self, start: int, end: int) -> int:
        return sum(1 for t in self.rto_times if start <= t <= end) + sum(
            1 for t in self.fr_times if start <= t <= end
        )

    def handover_gap(self, start: int, end: int) -> int:
        """Longest interval without an in-order delivery, clipped to the
        window [start, end]."""
        points = [start] + [t for t in self.inorder_times if start <= t <= end] + [end]
        return max(b - a for a, b in zip(points, points[1:]))


@dataclass
class DropRecord:
    time: int
    link: str
    kind: str
    reason: str
    flow_id: str
    payload: int


@dataclass
class HandoverMetrics:
    name: str
    direction: str
    at: int
    old_kind: str = ""
    new_kind: str = ""
    aborted: bool = False
    chain_violation: bool = False
    timeline: dict[str, int] = field(default_factory=dict)
    old_path_enqueues_after_tr1: int = 0
    drain_timed_out: bool = False


@dataclass
class RunMetrics:
    scenario: str
    mode: str
    seed: int
    end: int = 0
    flows: dict[str, FlowMetrics] = field(default_factory=dict)
    drops: list[DropRecord] = field(default_factory=list)
    handovers: list[HandoverMetrics] = field(default_factory=list)
    no_binding_drops: int = 0

    def drops_on_kind(self, kind: str, reason: Optional[str] = None,
                      start: Optional[int] = None, end: Optional[int] = None) -> int:
        n = 0
        for d in self.drops:
            if d.kind != kind:
                continue
            if reason is not None and d.reason != reason:
                continue
            if start is not None and d.time < start:
                continue
            if end is not None and d.time > end:
                continue
            n += 1
        return n

    def check_conservation(self) -> None:
        for fm in self.flows.values():
            residual = fm.conservation_residual()
            assert residual == 0, (
                f"flow {fm.flow_id}: sent {fm.bytes_sent} != delivered "
                f"{fm.bytes_delivered} + dropped {fm.bytes_dropped} + "
                f"in-flight {fm.bytes_inflight_end} (residual {residual})"
            )

    def csv_rows(self) -> list[dict[str, str]]:
        ho = self.handovers[0] if self.handovers else None
        rows = []
        for fid in sorted(self.flows):
            fm = self.flows[fid]
            row = {
                "scenario": self.scenario,
                "mode": self.mode,
                "seed": str(self.seed),
                "flow_id": fid,
                "goodput_bps": f"{fm.goodput_bps():.3f}",
                "retransmits": str(fm.retransmits),
                "spurious_retransmits": str(fm.spurious_retransmits),
                "rto_count": str(fm.rto_count),
                "drops_old_path": "0",
                "drops_new_path": "0",
                "handover_gap_ms": "",
                "old_path_enqueues_after_tr1": "",
            }
            for label in TIMELINE_LABELS:
                row[label] = ""
            if ho is not None:
                row["drops_old_path"] = str(
                    sum(1 for d in self.drops if d.kind == ho.old_kind and d.flow_id == fid)
                )
                row["drops_new_path"] = str(
                    sum(1 for d in self.drops if d.kind == ho.new_kind and d.flow_id == fid)
                )
                gap = fm.handover_gap(ho.at, min(ho.at + 5 * SEC, self.end))
                row["handover_gap_ms"] = f"{gap / 1000:.3f}"
                for label in TIMELINE_LABELS:
                    if label in ho.timeline:
                        row[label] = fmt_time(ho.timeline[label])
                row["old_path_enqueues_after_tr1"] = str(ho.old_path_enqueues_after_tr1)
            rows.append(row)
        return rows


def write_csv(rows: list[dict[str, str]]) -> str:
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for row in rows:
        buf.write(",".join(row[c] for c in CSV_COLUMNS) + "\n")
    return buf.getvalue()
