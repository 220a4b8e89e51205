import pytest
from hypothesis import given, strategies as st

from underradar.dataplane import (BloomFilter, PulseSchedule, RegisterArray, TamperBudget,
                                  TargetSelector, alternate_path)
from underradar.packet import Packet, Proto
from underradar.simcore import MS, SEC
from underradar.topology import build_fat_tree
from underradar.transport import FlowStatus

from test_transport import one_flow


@given(st.lists(st.binary(max_size=16) | st.tuples(st.text(max_size=6), st.integers()),
                max_size=300))
def test_bloom_has_no_false_negatives(items):
    bf = BloomFilter(1024, 3)
    for it in items:
        bf.add(it)
    assert all(it in bf for it in items)


def test_bloom_false_positive_rate_matches_formula():
    bf = BloomFilter(8192, 4)
    for i in range(1000):
        bf.add(("in", i))
    probes = 20_000
    fp = sum(("out", i) in bf for i in range(probes)) / probes
    expect = bf.expected_fp_rate()
    assert abs(fp - expect) < 0.5 * expect + 0.002


def test_bloom_rejects_bad_shape():
    with pytest.raises(ValueError):
        BloomFilter(0, 2)


def test_registers_overwrite_on_collision():
    regs = RegisterArray(1)
    regs.set("a", 1)
    regs.set("b", 2)
    assert regs.get("a") is None and regs.get("b") == 2
    assert regs.evictions == 1 and "b" in regs


@given(st.floats(0.0, 0.5), st.integers(1, 2000))
def test_budget_never_exceeds_fraction(fraction, packets):
    b = TamperBudget(fraction)
    for _ in range(packets):
        b.observe()
        if b.allow():
            b.consume()
    assert b.total_consumed <= fraction * packets + 1e-9


def test_windowed_budget_resets():
    b = TamperBudget(0.5, window=4)
    taken = 0
    for _ in range(12):
        b.observe()
        if b.allow():
            b.consume()
            taken += 1
    assert taken == 6


@pytest.mark.parametrize("pp,on", [(0.0, 0), (1.0, 100), (0.06, 6), (0.5, 50)])
def test_pulse_schedule_duty(pp, on):
    sched = PulseSchedule(pp, period=SEC)
    ticks = [t * 10 * MS for t in range(100)]
    assert sum(sched.active(t) for t in ticks) == on


def test_target_selector_wildcards_and_pods():
    t = build_fat_tree(4)
    pkt = Packet("h1_0_0", "h0_1_1", 1234, 80, Proto.TCP)
    assert TargetSelector().matches(pkt, t)
    assert TargetSelector(dst_pod=0).matches(pkt, t)
    assert not TargetSelector(dst_pod=1).matches(pkt, t)
    assert TargetSelector(src="h1_0_0", dport=80).matches(pkt, t)
    rev = Packet("h0_1_1", "h1_0_0", 80, 1234, Proto.TCP)
    assert TargetSelector(dst="h0_1_1").matches_reverse(rev, t)


def test_alternate_path_avoids_switches():
    t = build_fat_tree(4)
    p = alternate_path(t, "h0_0_0", "h2_0_0", {"core0", "agg0_1"})
    assert p[0] == "h0_0_0" and p[-1] == "h2_0_0"
    assert not {"core0", "agg0_1"} & set(p)
    assert len(p) - 1 == t.distance("h0_0_0", "h2_0_0")
    assert alternate_path(t, "h0_0_0", "h2_0_0", {"tor0_0"}) == []


def test_syn_drop_respects_drop_cap():
    net, rec = one_flow(1000, attack="syn_drop", params={"drops": 2})
    prog = net.switches["s0"].programs[0]
    assert prog.actions == {"drop": 2}
    assert rec.status is FlowStatus.COMPLETED


def test_one_shot_attacks_fire_once_per_flow():
    for kind in ("rst_tinker", "ack_and_drop"):
        net, _ = one_flow(200_000, attack=kind, params={}, horizon=30 * SEC)
        prog = net.switches["s0"].programs[0]
        primary = "modify" if kind == "rst_tinker" else "drop"
        assert prog.actions[primary] == 1


def test_same_seq_drop_hits_only_one_sequence_number():
    net, rec = one_flow(200_000, attack="same_seq_drop", params={"nth": 3, "drops": 4})
    prog = net.switches["s0"].programs[0]
    assert prog.actions == {"drop": 4}
    assert rec.status is FlowStatus.COMPLETED
    assert rec.timeouts >= 3
