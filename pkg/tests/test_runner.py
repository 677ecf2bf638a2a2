import re

from hypothesis import given, settings, strategies as st

from conftest import scenario_path
from satwin.metrics import write_csv
from satwin.runner import run
from satwin.scenario import parse_scenario

SINGLE_LINK = """
[sim]
end = 3.0
attach = WLAN
w_default = 131072

[node.CN]
role = cn
[node.HA]
role = ha
[node.GW]
role = gateway
kind = WLAN
[node.MN]
role = mn

[link.wlan]
a = MN
b = GW
kind = WLAN
bandwidth = 10000000
delay = 0.010
queue = 1000000

[link.gw_cn]
a = GW
b = CN
bandwidth = 100000000
delay = 0.005
queue = 1000000

[link.gw_ha]
a = GW
b = HA
bandwidth = 100000000
delay = 0.005
queue = 1000000

[flow.f1]
src = CN
dst = MN
start = 0.0
volume = 1000000
"""


def test_loss_free_single_path_bulk_transfer():
    metrics, _ = run(parse_scenario(SINGLE_LINK, "single"))
    fm = metrics.flows["f1"]
    assert fm.delivered_inorder == 1_000_000
    assert fm.retransmits == 0 and fm.rto_count == 0
    assert fm.bytes_dropped == 0
    assert 0 < fm.goodput_bps() <= 10_000_000  # within link capacity
    assert fm.conservation_residual() == 0


def test_same_seed_identical_trace_and_metrics():
    scenario = parse_scenario(SINGLE_LINK, "single")
    runs = [run(scenario, seed=5, trace=True) for _ in range(2)]
    assert runs[0][1].text() == runs[1][1].text()
    assert write_csv(runs[0][0].csv_rows()) == write_csv(runs[1][0].csv_rows())


def test_ack_pacing_shifts_every_ack_arrival_exactly():
    # one window's worth of data on an uncontended path: every ACK arrives
    # exactly extra_delay later than in the unpaced run
    volume_two_segments = SINGLE_LINK.replace("volume = 1000000", "volume = 2920")
    paced = volume_two_segments.replace(
        "volume = 2920", "volume = 2920\nack_extra_delay = 0.05"
    )

    def ack_arrivals(text):
        _, trace = run(parse_scenario(text, "pace"), trace=True)
        return [
            int(float(line.split()[0]) * 1_000_000)
            for line in trace.lines
            if " ack_rx " in line
        ]

    base = ack_arrivals(volume_two_segments)
    shifted = ack_arrivals(paced)
    assert len(base) == 2
    assert shifted == [t + 50_000 for t in base]


def test_proactive_s1_redirection_atomicity(shipped_scenarios):
    metrics, trace = run(shipped_scenarios["s1_wlan_to_sat"], mode="PROACTIVE", trace=True)
    ho = metrics.handovers[0]
    t_r1 = ho.timeline["t_r1"]
    assert ho.timeline["t_a2"] < t_r1  # the old-window tail cleared the anchor
    assert ho.old_path_enqueues_after_tr1 == 0

    def deliveries(path):
        return [
            int(float(l.split()[0]) * 1_000_000)
            for l in trace.lines
            if " deliver " in l and f"path={path}" in l
        ]

    # single redirection boundary: nothing arrives over the satellite before
    # t_r1, and the old path finishes before the new one starts (no reorder)
    assert min(deliveries("SAT")) > t_r1
    assert max(deliveries("WLAN")) < min(deliveries("SAT"))


def test_multiflow_allocation_applied_per_flow(shipped_scenarios):
    metrics, trace = run(shipped_scenarios["s3_multiflow"], mode="PROACTIVE", trace=True)
    caps = {}
    for line in trace.lines:
        m = re.search(r"wpolicy MN flow=(\w+) cap=(\d+)", line)
        if m:
            caps[m.group(1)] = int(m.group(2))
    # 2:1 weights over the 63750 B satellite window budget
    assert caps == {"f1": 42_500, "f2": 21_250}
    for fm in metrics.flows.values():
        assert fm.conservation_residual() == 0


def test_handover_gap_shrinks_under_proactive_mode(shipped_scenarios):
    s1 = shipped_scenarios["s1_wlan_to_sat"]
    gaps = {}
    for mode in ("BASELINE", "PROACTIVE"):
        metrics, _ = run(s1, mode=mode)
        row = metrics.csv_rows()[0]
        gaps[mode] = float(row["handover_gap_ms"])
    assert gaps["PROACTIVE"] < gaps["BASELINE"]


def test_reset_cwnd_mode_reseeds_slow_start(shipped_scenarios):
    metrics, trace = run(shipped_scenarios["s1_wlan_to_sat"], mode="RESET_CWND", trace=True)
    after = [l for l in trace.lines if l.startswith("2.500000 cwnd")]
    assert after and "cwnd=1460" in after[-1]
    assert metrics.flows["f1"].conservation_residual() == 0


def test_trace_is_time_ordered(shipped_scenarios):
    _, trace = run(shipped_scenarios["s2_sat_to_wlan"], mode="PROACTIVE", trace=True)
    times = [float(line.split()[0]) for line in trace.lines]
    assert times == sorted(times)


def test_reopen_ramp_is_monotonic_after_drain(shipped_scenarios):
    metrics, trace = run(shipped_scenarios["s2_sat_to_wlan"], mode="PROACTIVE", trace=True)
    assert not metrics.handovers[0].drain_timed_out
    drain_done = next(
        float(l.split()[0]) for l in trace.lines if " drain_done " in l
    )
    rwnds = [
        int(re.search(r"rwnd=(\d+)", l).group(1))
        for l in trace.lines
        if " ack_tx " in l and float(l.split()[0]) >= drain_done
    ]
    assert rwnds and rwnds == sorted(rwnds)
    assert rwnds[0] == 2920  # first reopened window is one ramp step


def test_drain_times_out_when_a_satellite_segment_is_lost():
    text = scenario_path("s2_sat_to_wlan").read_text()
    # a 50 ms satellite outage just before execution punches a hole into
    # the in-flight stream; the drain can then only end by timeout
    text = text.replace(
        "delay = 0.250\nqueue = 65536",
        "delay = 0.250\nqueue = 65536\navailability = 0.0:4.4,4.45:9.1",
    )
    metrics, trace = run(parse_scenario(text, "s2_lossy"), mode="PROACTIVE", trace=True)
    ho = metrics.handovers[0]
    assert metrics.drops_on_kind("SAT", "NO_COVERAGE") >= 1
    assert ho.drain_timed_out
    drain_line = next(l for l in trace.lines if " drain_done " in l)
    assert "timeout=yes" in drain_line
    # ramp begins anyway at 2x the satellite round trip after execution
    # (MN<->CN over the satellite: 2 * (250 ms + 5 ms) measured at attach)
    timeout_at = int(float(drain_line.split()[0]) * 1_000_000)
    assert timeout_at == ho.timeline["t_a0"] + 2 * 510_000
    for fm in metrics.flows.values():
        assert fm.conservation_residual() == 0


def test_engine_applies_handover_ack_pacing():
    from satwin.runner import Simulation

    text = scenario_path("s1_wlan_to_sat").read_text().replace(
        "direction = terr_to_sat", "direction = terr_to_sat\nack_pacing = 0.05"
    )
    sim = Simulation(parse_scenario(text, "s1_paced"), mode="PROACTIVE", trace=True)
    sim.run()
    assert sim.flows["f1"].receiver.ack_delay == 50_000
    assert any(" ack_pacing " in line for line in sim.trace.lines)


@settings(max_examples=20, deadline=None)
@given(
    gap_start=st.integers(min_value=0, max_value=8_600_000),
    gap_len=st.integers(min_value=10_000, max_value=600_000),
    mode=st.sampled_from(["BASELINE", "PROACTIVE", "RESET_CWND"]),
)
def test_conservation_survives_random_satellite_outages(gap_start, gap_len, mode):
    # whole-pipeline stress: an arbitrary satellite outage may drop data,
    # ACKs, registration traffic, or abort the handover outright; byte
    # conservation and the run itself must survive all interleavings
    gap_end = gap_start + gap_len
    windows = []
    if gap_start > 0:
        windows.append(f"0.0:{gap_start / 1e6:.6f}")
    windows.append(f"{gap_end / 1e6:.6f}:9.1")
    text = scenario_path("s2_sat_to_wlan").read_text().replace(
        "delay = 0.250\nqueue = 65536",
        "delay = 0.250\nqueue = 65536\navailability = " + ",".join(windows),
    )
    metrics, _ = run(parse_scenario(text, "s2_outage"), mode=mode)
    for fm in metrics.flows.values():
        assert fm.conservation_residual() == 0


def test_cli_maps_internal_invariant_to_exit_3(tmp_path, monkeypatch, capsys):
    import satwin.cli as cli
    from satwin.kernel import SimError

    scn = tmp_path / "mini.scn"
    scn.write_text(SINGLE_LINK)

    def boom(*args, **kwargs):
        raise SimError("synthetic invariant failure")

    monkeypatch.setattr(cli, "run", boom)
    assert cli.main(["run", "--scenario", str(scn)]) == 3
    capsys.readouterr()
