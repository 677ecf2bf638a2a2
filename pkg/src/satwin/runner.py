"""Simulation orchestration: builds a world from a scenario, executes the
handover engine, and aggregates metrics and the trace."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import handover as ho_policy
from .errors import ConfigError
from .kernel import Kernel, fmt_time
from .metrics import DropRecord, FlowMetrics, HandoverMetrics, RunMetrics, Trace
from .mobility import HomeAgent, make_binding_update
from .net import (
    ACCESS_KINDS,
    F_BU,
    F_BUACK,
    F_DATA,
    F_WUPD,
    DirectedLink,
    Segment,
    Topology,
    path_rtt,
    rtt_table,
)
from .scenario import BASELINE, PROACTIVE, RESET_CWND, FlowDef, HandoverDef, Scenario, flow_buffer
from .tcp import SLOW_START, TcpReceiver, TcpSender


def _bottleneck_bw(route) -> int:
    return min(hop.spec.bandwidth for hop in route)


@dataclass
class _FlowRuntime:
    spec: FlowDef
    sender: TcpSender
    receiver: TcpReceiver
    metrics: FlowMetrics
    rto_event: Optional[int] = None


class Simulation:
    """One deterministic run of a scenario in a given mode."""

    def __init__(self, scenario: Scenario, mode: Optional[str] = None,
                 seed: Optional[int] = None, trace: bool = False):
        self.scenario = scenario
        self.mode = mode if mode is not None else scenario.mode
        self.seed = seed if seed is not None else scenario.seed
        self.kernel = Kernel(self.seed)
        self.trace = Trace(enabled=trace)
        self.topo = Topology(list(scenario.nodes), list(scenario.links), self.kernel)
        self.mn = self.topo.node_with_role("mn")
        self.cn = self.topo.node_with_role("cn")
        self.ha_node = self.topo.node_with_role("ha")
        self.ha = HomeAgent(self.ha_node, self.mn)
        self.ha.on_registration = self._on_registration
        self.ha.on_data = self._on_ha_data
        self.metrics = RunMetrics(scenario.name, self.mode, self.seed, end=scenario.end)
        self.attachment = scenario.attach
        self.cache = ho_policy.PathEstimateCache()
        self.flows: dict[str, _FlowRuntime] = {}
        self._inflight: dict[tuple[str, int], int] = {}

        # engine bookkeeping
        self._pending_reg: list[HandoverMetrics] = []
        self._pending_ack: list[HandoverMetrics] = []
        self._ta_marker: dict[str, int] = {}  # flow -> old-window edge
        self._ta_handover: Optional[HandoverMetrics] = None
        self._ha_last_end: dict[str, int] = {}
        self._ha_last_time: dict[str, int] = {}
        self._routed_watermark: dict[tuple[str, str], int] = {}  # (flow, kind) -> seq end
        self._drain: dict[str, dict] = {}  # flow -> drain context
        self._completed_handover: Optional[HandoverMetrics] = None
        self._tag_next_wupd: Optional[str] = None

        for (_, _), dlink in self.topo.directed.items():
            dlink.deliver = self._on_arrival
            dlink.on_drop = self._on_link_drop
            if dlink.spec.kind in ACCESS_KINDS and dlink.dst == self.mn:
                dlink.on_enqueue = self._on_access_enqueue

        # a proactive node on the satellite always runs at the window the
        # engine would have chosen for it (the state a managed handover
        # onto the satellite leaves behind)
        self._initial_cap: Optional[int] = None
        if self.mode == PROACTIVE and scenario.attach == "SAT":
            route = self.topo.route_via_access(self.mn, self.cn, scenario.attach)
            self._initial_cap = ho_policy.estimate_bdp(_bottleneck_bw(route), path_rtt(route))

        for fdef in scenario.flows:
            self._setup_flow(fdef)

        self._attach(scenario.attach, 0, initial=True)
        for fdef in scenario.flows:
            self.kernel.schedule(fdef.start, lambda f=fdef.name: self._start_flow(f), "flow-start")
        for hdef in scenario.handovers:
            self.kernel.schedule(hdef.at, lambda h=hdef: self._on_handover(h), "handover")

    # ------------------------------------------------------------------
    # construction helpers

    def _setup_flow(self, fdef: FlowDef) -> None:
        buffer = flow_buffer(self.scenario, fdef)
        cap = None if self._initial_cap is None else min(self._initial_cap, buffer)
        receiver = TcpReceiver(fdef.name, buffer_capacity=buffer, mss=self.scenario.mss,
                               policy_cap=cap)
        receiver.ack_delay = fdef.ack_extra_delay
        sender = TcpSender(
            fdef.name,
            mss=self.scenario.mss,
            init_ssthresh=65536,
            peer_rwnd=receiver.advertised(),
            volume=fdef.volume,
        )
        fm = FlowMetrics(fdef.name, start=fdef.start)
        runtime = _FlowRuntime(fdef, sender, receiver, fm)
        sender.send_cb = lambda seg, now, rt=runtime: self._send_data(rt, seg, now)
        sender.state_cb = lambda snd, now, rt=runtime: self._trace_state(rt, snd, now)
        receiver.emit_cb = lambda seg, at, rt=runtime: self._emit_ack(rt, seg, at)
        receiver.advance_cb = lambda rcv, now, rt=runtime: self._on_inorder(rt, rcv, now)
        self.flows[fdef.name] = runtime
        self.metrics.flows[fdef.name] = fm

    def _start_flow(self, fid: str) -> None:
        rt = self.flows[fid]
        self.trace.emit(self.kernel.now, "flow_start", rt.spec.src, flow=fid)
        rt.sender.try_send(self.kernel.now)
        self._manage_rto(rt, rearm=False)

    # ------------------------------------------------------------------
    # data plane

    def _send_data(self, rt: _FlowRuntime, seg: Segment, now: int) -> None:
        seg.route = self.topo.route(rt.spec.src, self.ha_node)
        seg.hop = 0
        rt.metrics.bytes_sent += seg.payload_len
        self._inflight[(seg.flow_id, seg.copy)] = seg.payload_len
        if self.trace.enabled:
            self.trace.emit(now, "rexmit" if seg.rexmit else "send", rt.spec.src,
                            flow=seg.flow_id, seq=seg.seq, len=seg.payload_len)
        self._launch(seg, now)

    def _emit_ack(self, rt: _FlowRuntime, seg: Segment, send_at: int) -> None:
        if self._tag_next_wupd is not None and seg.flags & F_WUPD:
            seg.mark = self._tag_next_wupd
        if send_at > self.kernel.now:
            self.kernel.schedule(send_at, lambda: self._send_ack(rt, seg), "ack-paced")
        else:
            self._send_ack(rt, seg)

    def _send_ack(self, rt: _FlowRuntime, seg: Segment) -> None:
        now = self.kernel.now
        seg.route = self.topo.route_via_access(self.mn, rt.spec.src, self.attachment)
        seg.hop = 0
        if self.trace.enabled:
            self.trace.emit(now, "ack_tx", self.mn, flow=seg.flow_id, ack=seg.ack,
                            rwnd=seg.rwnd, flags=seg.flags)
        self._launch(seg, now)

    def _launch(self, seg: Segment, now: int) -> None:
        seg.route[seg.hop].transmit(seg, now)

    def _on_arrival(self, link: DirectedLink, seg: Segment) -> None:
        now = self.kernel.now
        seg.hop += 1
        if seg.hop < len(seg.route):
            seg.route[seg.hop].transmit(seg, now)
            return
        node = link.dst
        if seg.flags & F_DATA:
            if node == self.ha_node:
                self._ha_forward(seg, now)
            else:
                self._deliver_data(seg, now)
            return
        if seg.flags & F_BU:
            buack = self.ha.handle_binding_update(seg, now)
            buack.mark = seg.mark
            self._send_buack(buack, now)
            return
        if seg.flags & F_BUACK:
            self._on_buack(seg, now)
            return
        # cumulative ACK reaching the sender
        rt = self.flows.get(seg.flow_id)
        if rt is None:
            return
        if seg.mark is not None:
            self._on_advert_arrival(seg, rt, now)
        if self.trace.enabled:
            self.trace.emit(now, "ack_rx", node, flow=seg.flow_id, ack=seg.ack, rwnd=seg.rwnd)
        prev_una = rt.sender.snd_una
        rt.sender.on_ack(seg, now)
        self._manage_rto(rt, rearm=rt.sender.snd_una > prev_una)

    def _ha_forward(self, seg: Segment, now: int) -> None:
        kind = self.ha.route_attachment(seg, now)
        if kind is None:
            self.metrics.no_binding_drops += 1
            self._account_drop(seg, "NO_BINDING", "-", "-", now)
            return
        # the routed watermark seals the satellite stream at t_r1 exactly:
        # everything the anchor ever pointed at the old network is below it
        key = (seg.flow_id, kind)
        end = seg.seq + seg.payload_len
        if end > self._routed_watermark.get(key, 0):
            self._routed_watermark[key] = end
        seg.route = self.topo.route_via_access(self.ha_node, self.mn, kind)
        seg.hop = 0
        seg.route[0].transmit(seg, now)

    def _deliver_data(self, seg: Segment, now: int) -> None:
        rt = self.flows.get(seg.flow_id)
        if rt is None:
            return
        rt.metrics.bytes_delivered += seg.payload_len
        self._inflight.pop((seg.flow_id, seg.copy), None)
        if seg.rexmit and rt.receiver.holds_range(seg.seq, seg.payload_len):
            rt.metrics.spurious_retransmits += 1
            self.trace.emit(now, "spurious_rexmit", self.mn, flow=seg.flow_id, seq=seg.seq)
        if self.trace.enabled:
            self.trace.emit(now, "deliver", self.mn, flow=seg.flow_id, seq=seg.seq,
                            len=seg.payload_len, path=seg.path_tag or "-")
        rt.receiver.on_data(seg, now)

    def _on_inorder(self, rt: _FlowRuntime, receiver: TcpReceiver, now: int) -> None:
        rt.metrics.delivered_inorder = receiver.delivered_inorder
        rt.metrics.last_inorder_at = now
        rt.metrics.inorder_times.append(now)
        drain = self._drain.get(rt.spec.name)
        if drain is not None:
            self._check_drain(rt, now)

    def _on_link_drop(self, link: DirectedLink, seg: Segment, reason: str, at: int) -> None:
        self._account_drop(seg, reason, link.label, link.spec.kind, at)

    def _account_drop(self, seg: Segment, reason: str, label: str, kind: str, at: int) -> None:
        payload = seg.payload_len if seg.flags & F_DATA else 0
        self.metrics.drops.append(DropRecord(at, label, kind, reason, seg.flow_id, payload))
        if payload:
            rt = self.flows.get(seg.flow_id)
            if rt is not None:
                rt.metrics.bytes_dropped += payload
                self._inflight.pop((seg.flow_id, seg.copy), None)
        if seg.flags & (F_BU | F_BUACK):
            self._on_registration_lost(seg, at)
        self.trace.emit(at, "drop", label, flow=seg.flow_id, reason=reason,
                        seq=seg.seq, len=payload)

    def _on_access_enqueue(self, link: DirectedLink, seg: Segment, at: int) -> None:
        if not seg.flags & F_DATA:
            return
        ho = self._completed_handover
        if (
            ho is not None
            and link.spec.kind == ho.old_kind
            and "t_r1" in ho.timeline
            and seg.routed_at is not None
            and seg.routed_at >= ho.timeline["t_r1"]
        ):
            ho.old_path_enqueues_after_tr1 += 1

    # ------------------------------------------------------------------
    # sender timer management

    def _manage_rto(self, rt: _FlowRuntime, rearm: bool) -> None:
        sender = rt.sender
        if sender.flight == 0:
            if rt.rto_event is not None:
                self.kernel.cancel(rt.rto_event)
                rt.rto_event = None
            return
        if rearm and rt.rto_event is not None:
            self.kernel.cancel(rt.rto_event)
            rt.rto_event = None
        if rt.rto_event is None:
            rt.rto_event = self.kernel.schedule_in(
                sender.rto, lambda: self._on_rto(rt), "rto"
            )

    def _on_rto(self, rt: _FlowRuntime) -> None:
        rt.rto_event = None
        now = self.kernel.now
        if rt.sender.on_rto(now):
            rt.metrics.rto_times.append(now)
            self.trace.emit(now, "rto", rt.spec.src, flow=rt.spec.name, rto=fmt_time(rt.sender.rto))
        self._manage_rto(rt, rearm=False)

    def _trace_state(self, rt: _FlowRuntime, sender: TcpSender, now: int) -> None:
        if len(rt.metrics.fr_times) < sender.fast_retransmit_count:
            rt.metrics.fr_times.append(now)
            self.trace.emit(now, "fast_retransmit", rt.spec.src, flow=rt.spec.name)
        if self.trace.enabled:
            self.trace.emit(now, "cwnd", rt.spec.src, flow=rt.spec.name, cwnd=sender.cwnd,
                            ssthresh=sender.ssthresh, phase=sender.phase, una=sender.snd_una)

    # ------------------------------------------------------------------
    # attachment, registration, redirection

    def _attach(self, kind: str, now: int, initial: bool = False) -> None:
        self.attachment = kind
        route = self.topo.route_via_access(self.mn, self.cn, kind)
        rtt = path_rtt(route)
        self.cache.observe(kind, _bottleneck_bw(route), rtt, now)
        self.trace.emit(now, "attach", self.mn, network=kind)
        if initial:
            # the starting network counts as registered from t=0
            self.ha.table.register(self.mn, kind, now)

    def _send_bu(self, target_kind: str, ho: HandoverMetrics, now: int) -> None:
        reg = self.scenario.registration
        seg = make_binding_update(self.mn, target_kind, now)
        seg.mark = ho.name
        if reg.origin == "PROXY":
            proxy = reg.proxy_location or self.topo.access_gateway(target_kind)
            seg.route = self.topo.route(proxy, self.ha_node)
            origin = proxy
        else:
            seg.route = self.topo.route_via_access(self.mn, self.ha_node, target_kind)
            origin = self.mn
        seg.hop = 0
        ho.timeline["t_r0"] = now
        self._pending_reg.append(ho)
        self._pending_ack.append(ho)
        self.trace.emit(now, "bu_send", origin, network=target_kind)
        self.trace.emit(now, "timeline", origin, label="t_r0", t=fmt_time(now))
        seg.route[0].transmit(seg, now)

    def _on_registration_lost(self, seg: Segment, now: int) -> None:
        """A dropped BU/BUACK leaves the binding (or its confirmation)
        unchanged; the owning handover stops waiting for it."""
        stale = [h for h in self._pending_ack if h.name == seg.mark]
        for ho in stale:
            if seg.flags & F_BU and ho in self._pending_reg:
                self._pending_reg.remove(ho)
            self._pending_ack.remove(ho)
            self.trace.emit(now, "bu_lost", self.mn, handover=ho.name)

    def _send_buack(self, seg: Segment, now: int) -> None:
        reg = self.scenario.registration
        kind = seg.path_tag or self.attachment
        if reg.origin == "PROXY":
            proxy = reg.proxy_location or self.topo.access_gateway(kind)
            seg.route = self.topo.route(self.ha_node, proxy)
        else:
            seg.route = self.topo.route_via_access(self.ha_node, self.mn, kind)
        seg.hop = 0
        seg.route[0].transmit(seg, now)

    @staticmethod
    def _pop_pending(queue: list[HandoverMetrics], mark: Optional[str]):
        for i, ho in enumerate(queue):
            if mark is None or ho.name == mark:
                return queue.pop(i)
        return None

    def _on_registration(self, seg: Segment, now: int) -> None:
        self.trace.emit(now, "bu_recv", self.ha_node, network=seg.path_tag or "-")
        ho = self._pop_pending(self._pending_reg, seg.mark)
        if ho is None:
            return
        ho.timeline["t_r1"] = now
        self.trace.emit(now, "timeline", self.ha_node, label="t_r1", t=fmt_time(now))
        for fid in list(self._drain):
            self._check_drain(self.flows[fid], now)

    def _on_buack(self, seg: Segment, now: int) -> None:
        ho = self._pop_pending(self._pending_ack, seg.mark)
        if ho is None:
            return
        ho.timeline["t_r3"] = now
        self.trace.emit(now, "buack_recv", self.mn, network=seg.path_tag or "-")
        self.trace.emit(now, "timeline", self.mn, label="t_r3", t=fmt_time(now))

    def _on_ha_data(self, seg: Segment, now: int) -> None:
        fid = seg.flow_id
        end = seg.seq + seg.payload_len
        if end > self._ha_last_end.get(fid, -1):
            self._ha_last_end[fid] = end
            self._ha_last_time[fid] = now
        marker = self._ta_marker.get(fid)
        if marker is not None and end >= marker:
            ho = self._ta_handover
            if ho is not None:
                prev = ho.timeline.get("t_a2")
                if prev is None or now > prev:
                    ho.timeline["t_a2"] = now
                    self.trace.emit(now, "timeline", self.ha_node, label="t_a2", t=fmt_time(now))
            del self._ta_marker[fid]

    def _on_advert_arrival(self, seg: Segment, rt: _FlowRuntime, now: int) -> None:
        ho = self._ta_handover
        seg.mark = None
        if ho is None:
            return
        if "t_a1" not in ho.timeline:
            ho.timeline["t_a1"] = now
            self.trace.emit(now, "timeline", rt.spec.src, label="t_a1", t=fmt_time(now))
        marker = rt.sender.snd_nxt
        if self._ha_last_end.get(rt.spec.name, -1) >= marker:
            # the last old-window segment already passed the agent
            prev = ho.timeline.get("t_a2")
            last = self._ha_last_time[rt.spec.name]
            if prev is None or last > prev:
                ho.timeline["t_a2"] = last
        else:
            self._ta_marker[rt.spec.name] = marker

    # ------------------------------------------------------------------
    # handover engine

    def _on_handover(self, hdef: HandoverDef) -> None:
        now = self.kernel.now
        ho = HandoverMetrics(hdef.name, hdef.direction, hdef.at,
                             old_kind=self.attachment, new_kind=hdef.to)
        self.metrics.handovers.append(ho)
        self.trace.emit(now, "handover_detect", self.mn, direction=hdef.direction,
                        to=hdef.to, mode=self.mode)
        if self.mode in (BASELINE, RESET_CWND):
            self._execute_switch(hdef, ho, now)
            return
        if hdef.direction == "terr_to_sat":
            self._proactive_t2s(hdef, ho, now)
        else:
            self._proactive_s2t(hdef, ho, now)

    def _execute_switch(self, hdef: HandoverDef, ho: HandoverMetrics, now: int) -> None:
        """Baseline behavior: immediate registration, no window shaping."""
        link = self.topo.access_link(hdef.to)
        if not link.is_available(now):
            self._abort(ho, now)
            return
        self._attach(hdef.to, now)
        self._send_bu(hdef.to, ho, now)
        self._completed_handover = ho
        if self.mode == RESET_CWND:
            # comparison policy: collapse cwnd, seed ssthresh with the
            # estimated bandwidth-delay product of the new path
            route = self.topo.route_via_access(self.mn, self.cn, hdef.to)
            bdp = ho_policy.estimate_bdp(_bottleneck_bw(route), path_rtt(route))
            for rt in self.flows.values():
                sender = rt.sender
                sender.ssthresh = max(bdp, 2 * sender.mss)
                sender.cwnd = sender.mss
                sender.phase = SLOW_START
                sender.dupacks = 0
                self._trace_state(rt, sender, now)

    def _proactive_t2s(self, hdef: HandoverDef, ho: HandoverMetrics, now: int) -> None:
        rtts = rtt_table(self.topo, old_kind=self.attachment, sat_kind=hdef.to)
        est = self.cache.get(hdef.to)
        plan = ho_policy.plan_terr_to_sat(
            est.bdp if est else None,
            self.scenario.w_default,
            rtts,
            now,
            fallback_sat_window=self.scenario.sat_default_window,
        )
        ho.chain_violation = plan.chain_violation
        if plan.chain_violation:
            self.trace.emit(now, "warn", self.mn, code=ho_policy.CHAIN_VIOLATION,
                            w_rec=plan.w_rec)
        link = self.topo.access_link(hdef.to)
        if not link.is_available(plan.t_r0):
            self._abort(ho, now)
            return
        demands = [
            ho_policy.FlowDemand(f.name, f.weight, f.min_share)
            for f in self.scenario.flows
        ]
        plan.allocations = ho_policy.allocate_flow_windows(
            demands, plan.w_rec, self.scenario.mss
        )
        ho.timeline["t_a0"] = plan.t_a0
        self.trace.emit(now, "timeline", self.mn, label="t_a0", t=fmt_time(plan.t_a0))
        self.trace.emit(now, "plan", self.mn, direction=plan.direction, w_rec=plan.w_rec,
                        delta=fmt_time(plan.delta), t_r0=fmt_time(plan.t_r0))
        self._ta_handover = ho
        for fid, cap in plan.allocations.items():
            rt = self.flows[fid]
            cap = min(cap, rt.receiver.buffer_capacity)
            self._tag_next_wupd = hdef.name
            rt.receiver.set_window_policy(cap, now)
            self._tag_next_wupd = None
            self.trace.emit(now, "wpolicy", self.mn, flow=fid, cap=cap)
            if hdef.ack_pacing:
                ho_policy.set_ack_pacing(rt.receiver, hdef.ack_pacing)
                self.trace.emit(now, "ack_pacing", self.mn, flow=fid,
                                delay=fmt_time(hdef.ack_pacing))
        self.kernel.schedule(plan.t_r0, lambda: self._execute_t2s(hdef, ho, plan), "t2s-exec")

    def _execute_t2s(self, hdef: HandoverDef, ho: HandoverMetrics, plan) -> None:
        now = self.kernel.now
        link = self.topo.access_link(hdef.to)
        if not link.is_available(now):
            self._abort(ho, now)
            return
        self._attach(hdef.to, now)
        self._send_bu(hdef.to, ho, now)
        self._completed_handover = ho

    def _proactive_s2t(self, hdef: HandoverDef, ho: HandoverMetrics, now: int) -> None:
        sat_kind = self.attachment
        est = self.cache.get(sat_kind)
        sat_bdp = est.bdp if est else (self.scenario.sat_default_window or 0)
        sat_rtt = est.rtt if est else path_rtt(self.topo.route_via_access(self.mn, self.cn, sat_kind))
        terr_route = self.topo.route_via_access(self.mn, self.cn, hdef.to)
        terr_bdp = ho_policy.estimate_bdp(_bottleneck_bw(terr_route), path_rtt(terr_route))
        exec_at = now + hdef.exec_lead
        plans = {}
        for fid, rt in self.flows.items():
            current = rt.receiver.policy_cap
            if current is None:
                current = rt.receiver.advertised()
            plan = ho_policy.plan_sat_to_terr(
                sat_bdp, current, self.scenario.mss, rt.receiver.buffer_capacity,
                terr_bdp, sat_rtt, now, exec_at,
            )
            plans[fid] = plan
            rt.receiver.step_bound = plan.boost_step  # P1 bound, asserted per ACK
            rt.receiver.start_ramp(plan.boost_step, plan.boost_target, now)
            self.trace.emit(now, "boost", self.mn, flow=fid, target=plan.boost_target,
                            step=plan.boost_step)
        self.kernel.schedule(exec_at, lambda: self._execute_s2t(hdef, ho, plans), "s2t-exec")

    def _execute_s2t(self, hdef: HandoverDef, ho: HandoverMetrics, plans) -> None:
        now = self.kernel.now
        link = self.topo.access_link(hdef.to)
        if not link.is_available(now):
            for rt in self.flows.values():
                rt.receiver.ramp_step = 0  # stop boosting; stay on the satellite
                rt.receiver.step_bound = None
            self._abort(ho, now)
            return
        old_kind = self.attachment
        self._attach(hdef.to, now)
        self._send_bu(hdef.to, ho, now)
        self._completed_handover = ho
        ho.timeline["t_a0"] = now
        self.trace.emit(now, "timeline", self.mn, label="t_a0", t=fmt_time(now))
        self._ta_handover = ho
        for fid, rt in self.flows.items():
            plan = plans[fid]
            self._tag_next_wupd = hdef.name
            rt.receiver.set_window_policy(0, now)  # hold the sender while draining
            self._tag_next_wupd = None
            rt.receiver.set_suppress_dupacks(True, now)
            rt.sender.external_congestion_avoidance(now)
            self.trace.emit(now, "wpolicy", self.mn, flow=fid, cap=0)
            self._drain[fid] = {
                "handover": ho,
                "old_kind": old_kind,
                "plan": plan,
                "timeout_event": self.kernel.schedule(
                    plan.observed["drain_timeout"],
                    lambda f=fid: self._drain_timeout(f),
                    "drain-timeout",
                ),
            }
            self._check_drain(rt, now)

    def _check_drain(self, rt: _FlowRuntime, now: int) -> None:
        drain = self._drain.get(rt.spec.name)
        if drain is None:
            return
        ho = drain["handover"]
        if "t_r1" not in ho.timeline:
            return  # satellite stream not sealed until redirection happened
        watermark = self._routed_watermark.get((rt.spec.name, drain["old_kind"]), 0)
        if rt.receiver.rcv_nxt >= watermark:
            self._finish_drain(rt, now, timed_out=False)

    def _drain_timeout(self, fid: str) -> None:
        rt = self.flows[fid]
        if fid in self._drain:
            self._drain[fid]["handover"].drain_timed_out = True
            self._finish_drain(rt, self.kernel.now, timed_out=True)

    def _finish_drain(self, rt: _FlowRuntime, now: int, timed_out: bool) -> None:
        drain = self._drain.pop(rt.spec.name)
        self.kernel.cancel(drain["timeout_event"])
        plan = drain["plan"]
        self.trace.emit(now, "drain_done", self.mn, flow=rt.spec.name,
                        timeout="yes" if timed_out else "no")
        rt.receiver.set_suppress_dupacks(False, now)
        first = min(plan.ramp_step, plan.ramp_target)
        rt.receiver.set_window_policy(first, now)
        rt.receiver.start_ramp(plan.ramp_step, plan.ramp_target, now)
        self.trace.emit(now, "ramp", self.mn, flow=rt.spec.name,
                        target=plan.ramp_target, step=plan.ramp_step)

    def _abort(self, ho: HandoverMetrics, now: int) -> None:
        ho.aborted = True
        self.trace.emit(now, "handover_abort", self.mn, handover=ho.name)

    # ------------------------------------------------------------------

    def run(self) -> RunMetrics:
        self.kernel.run_until(self.scenario.end)
        for rt in self.flows.values():
            fm = rt.metrics
            fm.retransmits = rt.sender.retransmit_count
            fm.rto_count = rt.sender.rto_count
            fm.fast_retransmits = rt.sender.fast_retransmit_count
            fm.max_rwnd_increase = rt.receiver.max_rwnd_increase
            fm.receiver_overflows = rt.receiver.overflow_drops
            fm.bytes_inflight_end = sum(
                size for (fid, _), size in self._inflight.items() if fid == rt.spec.name
            )
        self.metrics.check_conservation()
        return self.metrics


def run(scenario: Scenario, mode: Optional[str] = None, seed: Optional[int] = None,
        trace: bool = False) -> tuple[RunMetrics, Trace]:
    sim = Simulation(scenario, mode=mode, seed=seed, trace=trace)
    metrics = sim.run()
    return metrics, sim.trace


def compare(scenario: Scenario, modes: list[str], seed: int | list[int] = 0) -> list[dict[str, str]]:
    """Side-by-side metrics across modes over one topology and one seed."""
    if len(modes) < 2:
        raise ConfigError("comparison needs at least two modes")
    if len(set(modes)) != len(modes):
        raise ConfigError("duplicate modes in comparison")
    if isinstance(seed, list):
        if len(set(seed)) != 1:
            raise ConfigError("comparison requires one seed across all modes")
        seed = seed[0]
    rows: list[dict[str, str]] = []
    for mode in modes:
        metrics, _ = run(scenario, mode=mode, seed=seed)
        rows.extend(metrics.csv_rows())
    return rows
