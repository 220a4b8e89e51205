import pytest
from hypothesis import given, strategies as st

from underradar.simcore import (MS, SEC, RngStream, RngStreams, SchedulingError, Simulator,
                                TraceAction, Tracer, millis, seconds)


def test_unit_conversions():
    assert seconds(1.5) == 1_500_000_000
    assert millis(200) == 200 * MS
    assert SEC == 1000 * MS


def test_events_fire_in_time_order_and_fifo_on_ties():
    sim = Simulator()
    seen = []
    for t, tag in [(30, "c"), (10, "a"), (10, "b"), (20, "x")]:
        sim.at(t, seen.append, tag)
    sim.run()
    assert seen == ["a", "b", "x", "c"]
    assert sim.now == 30


def test_scheduling_in_the_past_is_rejected():
    sim = Simulator()
    sim.at(100, lambda _: None)
    sim.run()
    with pytest.raises(SchedulingError):
        sim.at(50, lambda _: None)


def test_cancelled_events_never_fire():
    sim = Simulator()
    seen = []
    ev = sim.at(5, seen.append, "gone")
    sim.at(6, seen.append, "kept")
    sim.cancel(ev)
    sim.cancel(ev)
    stats = sim.run()
    assert seen == ["kept"]
    assert stats.cancelled == 1 and stats.pending == 0


def test_run_until_stops_at_horizon():
    sim = Simulator()
    seen = []
    sim.at(10, seen.append, 1)
    sim.at(2_000, seen.append, 2)
    sim.run_until(1_000)
    assert seen == [1] and sim.now == 1_000 and sim.pending == 1


@given(st.integers(0, 2**64 - 1), st.text(min_size=1, max_size=12))
def test_streams_are_reproducible(seed, label):
    a, b = RngStream(seed, label), RngStream(seed, label)
    assert [a.uniform01() for _ in range(5)] == [b.uniform01() for _ in range(5)]


def test_streams_with_different_labels_differ():
    a, b = RngStream(1, "x"), RngStream(1, "y")
    assert [a.uniform01() for _ in range(4)] != [b.uniform01() for _ in range(4)]


def test_stream_factory_caches_by_label():
    s = RngStreams(7)
    assert s["a"] is s["a"]
    assert s["a"] is not s["b"]


def test_rng_argument_checks():
    r = RngStream(1, "t")
    with pytest.raises(ValueError):
        RngStream(-1, "t")
    with pytest.raises(ValueError):
        r.bernoulli(1.5)
    with pytest.raises(ValueError):
        r.exponential(0)
    with pytest.raises(ValueError):
        r.uniform_int(3, 2)
    with pytest.raises(ValueError):
        r.draw("pareto", 1.0)
    assert r.bernoulli(0.0) is False and r.bernoulli(1.0) is True
    assert 0 <= r.draw("uniform_int", 0, 3) <= 3


def test_tracer_counts_attacker_actions():
    tr = Tracer(Simulator(), enabled=True)
    tr.emit("s0", TraceAction.FORWARD, "aa")
    tr.emit("s0", TraceAction.DROP, "bb", "attack:syn_drop")
    tr.emit("s0", TraceAction.DROP, "cc", "queue")
    assert tr.attacker_action_count == 1
    assert len(tr.lines()) == 3
