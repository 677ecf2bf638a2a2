import pytest
from hypothesis import given, strategies as st

from satwin.kernel import Kernel, SchedulingError, fmt_time


def test_min_ordering():
    k = Kernel()
    fired = []
    k.schedule(2, lambda: fired.append("t2"))
    k.schedule(1, lambda: fired.append("t1"))
    k.run_until(10)
    assert fired == ["t1", "t2"]


def test_fifo_tie_break():
    k = Kernel()
    fired = []
    k.schedule(1, lambda: fired.append("A"))
    k.schedule(1, lambda: fired.append("B"))
    k.run_until(1)
    assert fired == ["A", "B"]


def test_schedule_at_now_fires_before_later_events():
    k = Kernel()
    fired = []
    k.schedule(5, lambda: fired.append("later"))
    k.schedule(0, lambda: fired.append("now"))
    k.run_until(5)
    assert fired == ["now", "later"]


def test_schedule_in_past_is_hard_error():
    k = Kernel()
    k.schedule(10, lambda: None)
    k.run_until(10)
    with pytest.raises(SchedulingError):
        k.schedule(5, lambda: None)


def test_handler_scheduling_into_past_aborts_run():
    k = Kernel()
    k.schedule(10, lambda: k.schedule(5, lambda: None))
    with pytest.raises(SchedulingError):
        k.run_until(20)


def test_cancel_semantics():
    k = Kernel()
    fired = []
    eid = k.schedule(3, lambda: fired.append("x"))
    assert k.cancel(eid) is True
    assert k.cancel(eid) is False
    k.run_until(10)
    assert fired == []


def test_cancel_fired_event_returns_false():
    k = Kernel()
    eid = k.schedule(1, lambda: None)
    k.run_until(1)
    assert k.cancel(eid) is False


def test_run_until_empty_queue():
    k = Kernel()
    assert k.run_until(7) == 0
    assert k.now == 7


def test_run_until_boundary():
    k = Kernel()
    for t in (1, 2, 3, 9):
        k.schedule(t, lambda: None)
    assert k.run_until(3) == 3
    assert k.run_until(20) == 1


def test_handler_scheduling_within_run_is_processed():
    k = Kernel()
    fired = []

    def first():
        k.schedule(2, lambda: fired.append("child"))

    k.schedule(1, first)
    assert k.run_until(5) == 2
    assert fired == ["child"]


def test_clock_monotonic_for_handlers():
    k = Kernel()
    seen = []
    for t in (4, 1, 3, 1, 2):
        k.schedule(t, lambda: seen.append(k.now))
    k.run_until(10)
    assert seen == sorted(seen)


@given(st.lists(st.integers(min_value=0, max_value=1000), max_size=50))
def test_events_fire_in_stable_sorted_order(times):
    k = Kernel()
    fired = []
    for i, t in enumerate(times):
        k.schedule(t, lambda i=i, t=t: fired.append((t, i)))
    k.run_until(1000)
    assert fired == sorted(fired)


def test_same_seed_same_prng_stream():
    a, b = Kernel(seed=42), Kernel(seed=42)
    assert [a.rng.random() for _ in range(5)] == [b.rng.random() for _ in range(5)]


def test_fmt_time():
    assert fmt_time(0) == "0.000000"
    assert fmt_time(2_515_036) == "2.515036"
    assert fmt_time(1) == "0.000001"
