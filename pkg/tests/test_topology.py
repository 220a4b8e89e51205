import pytest
from hypothesis import given, strategies as st

from underradar.topology import (EcmpRouter, LinkSpec, Role, TopologyError, build_dumbbell,
                                 build_fat_tree)


@pytest.mark.parametrize("k,switches,hosts", [(4, 20, 16), (6, 45, 54), (8, 80, 128)])
def test_fat_tree_sizes(k, switches, hosts):
    t = build_fat_tree(k)
    assert len(t.switches) == switches == 5 * k * k // 4
    assert len(t.hosts) == hosts == k ** 3 // 4
    assert len(t.of_role(Role.CORE)) == (k // 2) ** 2


@pytest.mark.parametrize("k", [3, 5, 2, 0])
def test_fat_tree_rejects_bad_k(k):
    with pytest.raises(TopologyError):
        build_fat_tree(k)


def test_core_wiring_by_group():
    t = build_fat_tree(4)
    # core j attaches to aggregation switch j // 2 of every pod
    assert sorted(n for n in t.adj["core0"]) == ["agg0_0", "agg1_0", "agg2_0", "agg3_0"]
    assert sorted(n for n in t.adj["core3"]) == ["agg0_1", "agg1_1", "agg2_1", "agg3_1"]


def test_path_lengths():
    t = build_fat_tree(4)
    assert t.distance("h0_0_0", "h0_0_1") == 2
    assert t.distance("h0_0_0", "h0_1_0") == 4
    assert t.distance("h0_0_0", "h3_1_1") == 6
    assert len(t.next_hops("tor0_0", "h3_1_1")) == 2
    assert len(t.next_hops("agg0_0", "h3_1_1")) == 2
    assert t.next_hops("core0", "h3_1_1") == ["agg3_0"]


def test_hosts_never_transit():
    t = build_fat_tree(4)
    for h in t.hosts:
        for dst in t.hosts:
            if dst != h:
                assert all(t.role(n) is not Role.HOST for n in t.next_hops(t.tor_of(h), dst)
                           if n != dst)


def test_dumbbell_chain():
    t = build_dumbbell(n_switches=2)
    assert t.distance("client", "server") == 3
    with pytest.raises(TopologyError):
        build_dumbbell(n_switches=0)


def test_link_spec_serialization():
    spec = LinkSpec(bandwidth_bps=8e6, delay_ns=0, queue_packets=30)
    assert spec.serialization_ns(1000) == 1_000_000
    assert spec.ecn_mark_depth == 10


ports = st.integers(1024, 65535)


@given(st.sampled_from(build_fat_tree(4).hosts), st.sampled_from(build_fat_tree(4).hosts),
       ports, st.integers(0, 10))
def test_ecmp_paths_are_shortest_and_stable(src, dst, sport, salt):
    if src == dst:
        return
    t = build_fat_tree(4)
    r = EcmpRouter(t, salt)
    ft = (src, dst, sport, 80, 6)
    p = r.path(ft)
    assert p[0] == src and p[-1] == dst
    assert len(p) - 1 == t.distance(src, dst)
    assert EcmpRouter(t, salt).path(ft) == p


def test_ecmp_spreads_over_cores():
    t = build_fat_tree(4)
    r = EcmpRouter(t, 0)
    cores = {r.path(("h0_0_0", "h2_0_0", sport, 80, 6))[3] for sport in range(2000, 2200)}
    assert cores == {"core0", "core1", "core2", "core3"}
