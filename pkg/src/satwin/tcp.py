"""Reno-style TCP endpoint pair with an externally steerable receive window.

Sender: slow start / congestion avoidance / fast retransmit / fast recovery,
RFC 6298 RTO estimation with Karn filtering, go-back-N resend after a
timeout. Receiver: cumulative ACKs, out-of-order buffering, duplicate-ACK
generation with an optional suppression mode, and a policy cap on the
advertised window that the handover engine drives.

Connection setup/teardown, SACK, ECN and delayed ACKs are out of scope:
flows are pre-established bulk transfers and every delivery is ACKed.
"""

from __future__ import annotations

from typing import Callable, Optional

from .errors import ConfigError, ProtocolViolation
from .kernel import SEC
from .net import F_ACK, F_DATA, F_REFRESH, F_WUPD, Segment

SLOW_START = "SLOW_START"
CONG_AVOID = "CONG_AVOID"
FAST_RECOVERY = "FAST_RECOVERY"

DUPACK_THRESHOLD = 3
RTO_MIN = 1 * SEC
RTO_MAX = 60 * SEC
REFRESH_INTERVAL = 100_000  # suppressed-mode state refresh: at most one per 100 ms

UNLIMITED = None


class TcpSender:
    """Congestion/flow-control state machine feeding one bulk flow.

    Segments are handed to `send_cb(segment, now)`; the owner wires that to
    the network. `state_cb(sender, now)` fires after any cwnd/ssthresh/phase
    change so traces can record the series.
    """

    def __init__(
        self,
        flow_id: str,
        mss: int = 1460,
        init_ssthresh: int = 65536,
        peer_rwnd: int = 65536,
        volume: Optional[int] = None,
        send_cb: Callable[[Segment, int], None] | None = None,
        state_cb=None,
    ):
        self.flow_id = flow_id
        self.mss = mss
        self.cwnd = 2 * mss  # initial window
        self.ssthresh = max(init_ssthresh, 2 * mss)
        self.snd_una = 0
        self.snd_nxt = 0
        self.peer_rwnd = peer_rwnd
        self.dupacks = 0
        self.srtt: Optional[int] = None
        self.rttvar = 0
        self.rto = RTO_MIN
        self.phase = SLOW_START
        self.recover = 0
        self.rtx_log: dict[int, int] = {}  # seq -> retransmit count
        self.volume = volume  # None = unlimited source
        self.send_cb = send_cb or (lambda seg, now: None)
        self.state_cb = state_cb
        # go-back-N resend window after a timeout
        self._rtx_next: Optional[int] = None
        self._rtx_high = 0
        self._copy = 0
        self.retransmit_count = 0
        self.rto_count = 0
        self.fast_retransmit_count = 0
        # window-update gating: only segments at least as fresh as the one
        # that last set peer_rwnd may change it (stale ACKs still in flight
        # on an abandoned path must not reopen a closed window)
        self._wl_ack = -1
        self._wl_time = -1

    # -- helpers -------------------------------------------------------

    @property
    def flight(self) -> int:
        return self.snd_nxt - self.snd_una

    def _usable_window(self) -> int:
        return min(self.cwnd, self.peer_rwnd)

    def _data_end(self) -> Optional[int]:
        return self.volume

    def _note_state(self, now: int) -> None:
        if self.state_cb is not None:
            self.state_cb(self, now)

    def _set_phase_from_cwnd(self) -> None:
        self.phase = SLOW_START if self.cwnd < self.ssthresh else CONG_AVOID

    # -- transmission --------------------------------------------------

    def _emit(self, seq: int, length: int, now: int, rexmit: bool) -> None:
        self._copy += 1
        seg = Segment(
            flow_id=self.flow_id,
            seq=seq,
            payload_len=length,
            flags=F_DATA,
            sent_at=now,
            rexmit=rexmit,
            copy=self._copy,
        )
        if rexmit:
            self.rtx_log[seq] = self.rtx_log.get(seq, 0) + 1
            self.retransmit_count += 1
        else:
            # the +mss headroom is the fast-retransmit allowance; new data
            # itself never pushes the flight past the usable window
            assert self.flight <= self._usable_window() + self.mss, "flight bound violated"
        self.send_cb(seg, now)

    def try_send(self, now: int) -> int:
        """Send whatever the congestion and flow-control windows allow.

        While the peer advertises a zero window no data segment leaves,
        retransmissions included; the handover engine is responsible for
        reopening the window (probes are out of scope).
        """
        if self.peer_rwnd == 0:
            return 0
        sent = 0
        usable = self._usable_window()
        while True:
            if self._rtx_next is not None and self._rtx_next < self._rtx_high:
                seq = self._rtx_next
                end = min(seq + self.mss, self._rtx_high)
                if end - self.snd_una > usable:
                    break
                self._emit(seq, end - seq, now, rexmit=True)
                self._rtx_next = end
                sent += 1
                continue
            limit = self._data_end()
            if limit is not None and self.snd_nxt >= limit:
                break
            end = self.snd_nxt + self.mss
            if limit is not None:
                end = min(end, limit)
            if end - self.snd_una > usable:
                break
            self._emit(self.snd_nxt, end - self.snd_nxt, now, rexmit=False)
            self.snd_nxt = end
            sent += 1
        return sent

    def retransmit_head(self, now: int) -> None:
        if self.peer_rwnd == 0:
            return
        end = min(self.snd_una + self.mss, self.snd_nxt)
        if end > self.snd_una:
            self._emit(self.snd_una, end - self.snd_una, now, rexmit=True)

    # -- ACK processing --------------------------------------------------

    def on_ack(self, seg: Segment, now: int) -> None:
        """Process one incoming ACK segment per Reno rules."""
        ack, rwnd = seg.ack, seg.rwnd
        if ack > self.snd_nxt:
            raise ProtocolViolation(
                f"flow {self.flow_id}: ack {ack} beyond snd_nxt {self.snd_nxt}"
            )
        if ack < self.snd_una:
            return  # old ACK from a stale path; ignore entirely

        # a duplicate repeats the ack point without growing the window; a
        # shrink still counts because it is the out-of-order buffer filling
        # up at the receiver, not a window update
        is_dup = (
            ack == self.snd_una
            and self.flight > 0
            and rwnd <= self.peer_rwnd
            and not seg.flags & (F_WUPD | F_REFRESH)
        )
        if (ack, seg.sent_at) >= (self._wl_ack, self._wl_time):
            self.peer_rwnd = rwnd
            self._wl_ack = ack
            self._wl_time = seg.sent_at

        if ack > self.snd_una:
            self._on_new_ack(ack, seg, now)
        elif is_dup:
            self._on_dupack(now)
        # pure window updates fall through to the send attempt below
        self.try_send(now)

    def _on_new_ack(self, ack: int, seg: Segment, now: int) -> None:
        prev_una = self.snd_una
        self.snd_una = ack
        self.dupacks = 0
        if self._rtx_next is not None:
            self._rtx_next = max(self._rtx_next, ack)
            if ack >= self._rtx_high:
                self._rtx_next = None
        self._sample_rtt(prev_una, ack, seg, now)
        for seq in [s for s in self.rtx_log if s + self.mss <= ack]:
            del self.rtx_log[seq]

        if self.phase == FAST_RECOVERY:
            # Reno deflates and leaves recovery on the first ACK that moves
            # snd_una; `recover` only gates re-entering fast retransmit.
            self.cwnd = self.ssthresh
            self._set_phase_from_cwnd()
        elif self.cwnd < self.ssthresh:
            self.cwnd += self.mss  # slow start: one MSS per ACK
            self._set_phase_from_cwnd()
        else:
            self.cwnd += self.mss * self.mss // self.cwnd
            self.phase = CONG_AVOID
        self._note_state(now)

    def _on_dupack(self, now: int) -> None:
        if self.phase == FAST_RECOVERY:
            self.cwnd += self.mss  # inflation: the dup signals a departure
            self._note_state(now)
            return
        self.dupacks += 1
        if self.dupacks != DUPACK_THRESHOLD:
            return
        if self.snd_una < self.recover:
            return  # already retransmitted in this window; wait it out
        self.ssthresh = max(self.flight // 2, 2 * self.mss)
        self.retransmit_head(now)
        self.cwnd = self.ssthresh + DUPACK_THRESHOLD * self.mss
        self.phase = FAST_RECOVERY
        self.recover = self.snd_nxt
        self.fast_retransmit_count += 1
        self._note_state(now)

    def _sample_rtt(self, prev_una: int, ack: int, seg: Segment, now: int) -> None:
        if seg.echo is None:
            return
        # Karn: no sample when the newly acked range was ever retransmitted
        if any(prev_una <= s < ack for s in self.rtx_log):
            return
        m = now - seg.echo
        if m < 0:
            return
        if self.srtt is None:
            self.srtt = m
            self.rttvar = m // 2
        else:
            self.rttvar = (3 * self.rttvar + abs(self.srtt - m)) // 4
            self.srtt = (7 * self.srtt + m) // 8
        self.rto = min(max(self.srtt + 4 * self.rttvar, RTO_MIN), RTO_MAX)

    # -- timeout and external steering -----------------------------------

    def on_rto(self, now: int) -> bool:
        """Retransmission timeout: collapse to one segment and go back to
        snd_una. Returns False when the timer was stale (nothing unacked)."""
        if self.flight == 0:
            return False
        self.ssthresh = max(self.flight // 2, 2 * self.mss)
        self.cwnd = self.mss
        self.phase = SLOW_START
        self.dupacks = 0
        self.recover = self.snd_nxt
        self._rtx_next = self.snd_una
        self._rtx_high = self.snd_nxt
        self.rto = min(self.rto * 2, RTO_MAX)
        self.rto_count += 1
        self.try_send(now)
        self._note_state(now)
        return True

    def external_congestion_avoidance(self, now: int) -> None:
        """Force the congestion-avoidance entry the handover engine requests
        at satellite->terrestrial execution: halve into CONG_AVOID."""
        self.ssthresh = max(self.cwnd // 2, 2 * self.mss)
        self.cwnd = self.ssthresh
        self.phase = CONG_AVOID
        self.dupacks = 0
        self._note_state(now)


class TcpReceiver:
    """Receive-side state: cumulative ACKing plus the steerable window.

    Every emitted ACK advertises min(free buffer, policy cap). In-order data
    is consumed immediately (bulk sink), so only out-of-order ranges occupy
    the buffer. `emit_cb(segment, send_at)` hands ACKs to the network;
    emission is shifted by `ack_delay` (ACK-return pacing).
    """

    def __init__(
        self,
        flow_id: str,
        buffer_capacity: int,
        mss: int = 1460,
        policy_cap: Optional[int] = UNLIMITED,
        emit_cb: Callable[[Segment, int], None] | None = None,
    ):
        self.flow_id = flow_id
        self.buffer_capacity = buffer_capacity
        self.mss = mss
        self.rcv_nxt = 0
        self.oob: list[tuple[int, int]] = []  # disjoint (start, end) ranges
        self.oob_bytes = 0
        self.policy_cap = policy_cap
        self.suppress_dupacks = False
        self.ack_delay = 0
        self.emit_cb = emit_cb or (lambda seg, at: None)
        self.last_refresh: Optional[int] = None
        self.last_rwnd: Optional[int] = self.advertised()
        self.max_rwnd_increase = 0
        self.step_bound: Optional[int] = None  # asserted max per-ACK increase
        self.ramp_step = 0
        self.ramp_target = 0
        self.overflow_drops = 0
        self.delivered_inorder = 0
        self.advance_cb: Callable[[TcpReceiver, int], None] | None = None

    # -- window bookkeeping ----------------------------------------------

    def free_buffer(self) -> int:
        return self.buffer_capacity - self.oob_bytes

    def advertised(self) -> int:
        free = self.free_buffer()
        if self.policy_cap is UNLIMITED:
            return free
        return min(free, self.policy_cap)

    def set_window_policy(self, cap: Optional[int], now: int) -> None:
        """Cap the advertised window; an immediate window-update ACK tells
        the sender about any change. UNLIMITED (None) removes the cap."""
        if cap is not UNLIMITED:
            if cap < 0:
                raise ConfigError(f"flow {self.flow_id}: negative window cap")
            if cap > self.buffer_capacity:
                raise ConfigError(
                    f"flow {self.flow_id}: cap {cap} exceeds buffer "
                    f"{self.buffer_capacity}"
                )
        changed = cap != self.policy_cap
        self.policy_cap = cap
        self.ramp_step = 0
        if changed:
            self._emit_ack(now, flags=F_WUPD)

    def start_ramp(self, step: int, target: int, now: int) -> None:
        """Grow the policy cap by `step` on every subsequent ACK emission
        until `target`; self-clocked so the increase cannot outrun the path."""
        self.ramp_step = step
        self.ramp_target = min(target, self.buffer_capacity)

    def set_suppress_dupacks(self, on: bool, now: int) -> None:
        self.suppress_dupacks = on
        self.last_refresh = now if on else None

    # -- data path ---------------------------------------------------------

    def holds_range(self, seq: int, length: int) -> bool:
        """True if [seq, seq+length) is already below rcv_nxt or fully
        covered by buffered out-of-order ranges."""
        end = seq + length
        pos = min(max(seq, self.rcv_nxt), end)
        if pos >= end:
            return True
        for start, stop in self.oob:
            if start > pos:
                return False
            if stop > pos:
                pos = stop
                if pos >= end:
                    return True
        return False

    def on_data(self, seg: Segment, now: int) -> None:
        if not seg.flags & F_DATA:
            raise ProtocolViolation("receiver got a non-data segment")
        seq, end = seg.seq, seg.seq + seg.payload_len
        if self.holds_range(seq, seg.payload_len):
            # stale duplicate: re-ACK so the peer can resynchronize
            self._maybe_dupack(now)
            return
        if seq <= self.rcv_nxt:
            self.rcv_nxt = end
            self._absorb_contiguous()
            if self.advance_cb is not None:
                self.advance_cb(self, now)
            self._emit_ack(now, echo=None if seg.rexmit else seg.sent_at)
            return
        # out of order: buffer if there is room, else model receiver overflow
        if seg.payload_len > self.free_buffer():
            self.overflow_drops += 1
            return
        self._insert_oob(seq, end)
        self._maybe_dupack(now)

    def _insert_oob(self, seq: int, end: int) -> None:
        ranges = self.oob
        i = 0
        while i < len(ranges) and ranges[i][0] < seq:
            i += 1
        ranges.insert(i, (seq, end))
        # merge overlaps conservatively; byte counts track the merged spans
        merged: list[tuple[int, int]] = []
        for start, stop in ranges:
            if merged and start <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], stop))
            else:
                merged.append((start, stop))
        self.oob = merged
        self.oob_bytes = sum(stop - start for start, stop in merged)

    def _absorb_contiguous(self) -> None:
        while self.oob and self.oob[0][0] <= self.rcv_nxt:
            start, stop = self.oob.pop(0)
            self.oob_bytes -= stop - start
            if stop > self.rcv_nxt:
                self.rcv_nxt = stop
        self.delivered_inorder = self.rcv_nxt

    def _maybe_dupack(self, now: int) -> None:
        if not self.suppress_dupacks:
            self._emit_ack(now)
            return
        # withheld; keep the sender's timers alive with a rate-limited,
        # specially flagged state refresh instead
        if self.last_refresh is None or now - self.last_refresh >= REFRESH_INTERVAL:
            self.last_refresh = now
            self._emit_ack(now, flags=F_REFRESH)

    # -- ACK emission -----------------------------------------------------

    def _emit_ack(self, now: int, flags: int = 0, echo=None) -> None:
        if self.ramp_step and not flags & F_REFRESH:
            if self.policy_cap is UNLIMITED or self.policy_cap < self.ramp_target:
                base = 0 if self.policy_cap is UNLIMITED else self.policy_cap
                self.policy_cap = min(base + self.ramp_step, self.ramp_target)
        rwnd = self.advertised()
        if self.last_rwnd is not None and rwnd > self.last_rwnd:
            inc = rwnd - self.last_rwnd
            if inc > self.max_rwnd_increase:
                self.max_rwnd_increase = inc
            assert self.step_bound is None or inc <= self.step_bound, (
                f"flow {self.flow_id}: advertised window grew by {inc} "
                f"(> bound {self.step_bound})"
            )
        self.last_rwnd = rwnd
        seg = Segment(
            flow_id=self.flow_id,
            ack=self.rcv_nxt,
            rwnd=rwnd,
            flags=F_ACK | flags,
            sent_at=now + self.ack_delay,
            echo=echo,
        )
        self.emit_cb(seg, now + self.ack_delay)
