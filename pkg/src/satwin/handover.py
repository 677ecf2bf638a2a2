"""Proactive handover policy: window selection, registration delay, plans.

Two procedures are computed here and executed by the runner:

* terrestrial -> satellite: advertise a reduced window W_REC sized from the
  cached satellite bandwidth-delay product, then hold the registration back
  for a delay chosen so the last full-window segment clears the anchor
  before redirection flips.

* satellite -> terrestrial: pre-grow the advertised window by the satellite
  BDP (two segments per ACK, self-clocked), close the window to zero at
  execution while duplicate ACKs are suppressed and the sender is dropped
  into congestion avoidance, hold until the satellite pipe has drained,
  then reopen gradually toward the terrestrial BDP.

Multi-flow runs share the window budget proportionally to per-flow demand
weights; ACK-return pacing is the complementary rate-shaping knob.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Optional

from .errors import ConfigError
from .kernel import SEC
from .net import RttTable

TERR_TO_SAT = "TERR_TO_SAT"
SAT_TO_TERR = "SAT_TO_TERR"

CHAIN_VIOLATION = "CHAIN_VIOLATION"


@dataclass
class PathEstimate:
    bdp: int
    rtt: int
    measured_at: int


class PathEstimateCache:
    """Per-network-kind cache of the last bandwidth-delay measurement."""

    def __init__(self):
        self._by_kind: dict[str, PathEstimate] = {}

    def observe(self, kind: str, bandwidth: int, rtt: int, at: int) -> PathEstimate:
        est = PathEstimate(bdp=estimate_bdp(bandwidth, rtt), rtt=rtt, measured_at=at)
        self._by_kind[kind] = est
        return est

    def get(self, kind: str) -> Optional[PathEstimate]:
        return self._by_kind.get(kind)


def estimate_bdp(bandwidth: int, rtt: int) -> int:
    """Bytes in flight that fill a path: bandwidth (B/s) x rtt (us), floored
    to a whole byte."""
    if bandwidth <= 0 or rtt <= 0:
        raise ConfigError(f"bandwidth-delay product needs positive inputs, got ({bandwidth}, {rtt})")
    return bandwidth * rtt // SEC


class WRecChoice(NamedTuple):
    value: int
    chain_violation: bool


def compute_w_rec(cache_sat: int, w_default: int) -> WRecChoice:
    """Reduced window to advertise before moving onto the satellite.

    The selection chain requires w_default > cache_sat >= W_REC; when the
    cached satellite estimate is not strictly below the default window the
    chain cannot hold (the full-rate sender would flood the slow network),
    which is reported as a warning, not a failure.
    """
    if cache_sat <= 0 or w_default <= 0:
        raise ConfigError("window selection needs positive inputs")
    return WRecChoice(min(cache_sat, w_default), chain_violation=cache_sat >= w_default)


def compute_delta(rtt_mn_sat_cn: int, rtt_mn_sat_ha: int, rtt_mn_old_ha: int) -> int:
    """Registration hold-back: the boundary value of
    delta <= RTT_sat_cn - (RTT_sat_ha + RTT_old_ha)/2, clamped at zero.

    The half-sum is rounded up so the microsecond result never exceeds the
    exact bound.
    """
    if min(rtt_mn_sat_cn, rtt_mn_sat_ha, rtt_mn_old_ha) < 0:
        raise ConfigError("round-trip times must be non-negative")
    bound = rtt_mn_sat_cn - (rtt_mn_sat_ha + rtt_mn_old_ha + 1) // 2
    return max(0, bound)


@dataclass
class HandoverPlan:
    """Computed schedule for one handover plus the timeline observed while
    executing it (advertisement send/arrival, last old-window data at the
    anchor, registration send/arrival, registration ack arrival)."""

    direction: str
    w_rec: int = 0
    delta: int = 0
    t_a0: int = 0
    t_r0: int = 0
    boost_target: int = 0
    boost_step: int = 0
    ramp_step: int = 0
    ramp_target: int = 0
    chain_violation: bool = False
    allocations: dict[str, int] = field(default_factory=dict)
    observed: dict[str, int] = field(default_factory=dict)

    def observe(self, label: str, at: int) -> None:
        self.observed.setdefault(label, at)


def plan_terr_to_sat(
    cache_sat: Optional[int],
    w_default: int,
    rtts: RttTable,
    t_detect: int,
    fallback_sat_window: Optional[int] = None,
) -> HandoverPlan:
    """Terrestrial->satellite plan: W_REC advertised at t_a0 = t_detect, the
    binding update held until t_r0 = t_a0 + delta.

    Without a prior satellite measurement the configured fallback window
    stands in for the cache (a first-ever handover has nothing cached).
    """
    if cache_sat is None:
        if fallback_sat_window is None:
            raise ConfigError("no cached satellite estimate and no sat_default_window configured")
        cache_sat = fallback_sat_window
    w_rec, violated = compute_w_rec(cache_sat, w_default)
    delta = compute_delta(rtts.mn_sat_cn, rtts.mn_sat_ha, rtts.mn_old_ha)
    return HandoverPlan(
        direction=TERR_TO_SAT,
        w_rec=w_rec,
        delta=delta,
        t_a0=t_detect,
        t_r0=t_detect + delta,
        chain_violation=violated,
    )


def plan_sat_to_terr(
    cache_sat_bdp: int,
    current_win: int,
    mss: int,
    buffer_capacity: int,
    terr_bdp: int,
    sat_rtt: int,
    t_detect: int,
    exec_at: int,
) -> HandoverPlan:
    """Satellite->terrestrial plan: boost toward current + satellite BDP in
    two-segment steps, zero-window drain at execution (timeout 2x satellite
    RTT guards against a lost pipe segment), then ramp toward the
    terrestrial BDP in two-segment steps."""
    boost_step = 2 * mss
    return HandoverPlan(
        direction=SAT_TO_TERR,
        t_a0=exec_at,
        t_r0=exec_at,
        delta=0,
        boost_target=min(current_win + cache_sat_bdp, buffer_capacity),
        boost_step=boost_step,
        ramp_step=2 * mss,
        ramp_target=min(buffer_capacity, terr_bdp),
        observed={"drain_timeout": exec_at + 2 * sat_rtt},
    )


@dataclass(frozen=True)
class FlowDemand:
    flow_id: str
    requirement: Fraction
    min_share: int = 0

    def __post_init__(self):
        if self.requirement <= 0:
            raise ConfigError(f"flow {self.flow_id}: demand weight must be positive")
        if self.min_share < 0:
            raise ConfigError(f"flow {self.flow_id}: negative min_share")


def allocate_flow_windows(demands: list[FlowDemand], capacity: int, mss: int = 1460) -> dict[str, int]:
    """Split a window budget across flows proportionally to their weights.

    Each flow gets max(min_share, floor(capacity * w_i / sum(w))); leftover
    bytes are handed out one MSS at a time in descending fractional
    remainder (ties by ascending flow id). The result never exceeds
    capacity. When minimum shares crowd out the proportional split, flows
    pinned at their minimum are set aside and the rest of the budget is
    re-apportioned among the others.
    """
    if not demands:
        return {}
    ids = [d.flow_id for d in demands]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate flow ids in demand list")
    if capacity < sum(d.min_share for d in demands):
        raise ConfigError(
            f"capacity {capacity} below the sum of minimum shares "
            f"{sum(d.min_share for d in demands)}"
        )

    pinned: dict[str, int] = {}
    active = list(demands)
    budget = capacity
    while True:
        total = sum(d.requirement for d in active)
        shares = {d.flow_id: Fraction(budget) * d.requirement / total for d in active}
        newly_pinned = [d for d in active if shares[d.flow_id] < d.min_share]
        if not newly_pinned:
            break
        for d in newly_pinned:
            pinned[d.flow_id] = d.min_share
            budget -= d.min_share
        active = [d for d in active if d.flow_id not in pinned]
        if not active:
            return {d.flow_id: pinned.get(d.flow_id, 0) for d in demands}

    alloc = {fid: int(share) for fid, share in shares.items()}  # floor
    leftover = budget - sum(alloc.values())
    order = sorted(active, key=lambda d: (-(shares[d.flow_id] - alloc[d.flow_id]), d.flow_id))
    while leftover >= mss:
        progressed = False
        for d in order:
            if leftover < mss:
                break
            alloc[d.flow_id] += mss
            leftover -= mss
            progressed = True
        if not progressed:
            break
    alloc.update(pinned)
    assert sum(alloc.values()) <= capacity
    return {d.flow_id: alloc[d.flow_id] for d in demands}


def set_ack_pacing(receiver, extra_delay: int) -> None:
    """Slow the ACK return path: every subsequently emitted ACK is delayed
    by `extra_delay`; ACKs already in flight are unaffected."""
    if extra_delay < 0:
        raise ConfigError("ACK pacing delay must be non-negative")
    receiver.ack_delay = extra_delay
