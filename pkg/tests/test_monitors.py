import pytest

from underradar.harness import matrix_scenario, run_scenario
from underradar.monitors import (MONITOR_KINDS, Verdict, VerdictClass, _tomography,
                                 build_monitor, classify_verdict, path_links, verdicts_to_csv)


def test_verdict_alarm_matches_blame():
    with pytest.raises(ValueError):
        Verdict("x", alarm=True)
    with pytest.raises(ValueError):
        Verdict("x", alarm=False, blamed={"s": 1.0})


def test_classification_of_switch_and_link_blame():
    comp = {"core0"}
    assert classify_verdict(Verdict("m"), comp) is VerdictClass.UNDETECTED
    assert classify_verdict(Verdict("m", True, {"core1": 1}), comp) is VerdictClass.MISDIRECTED
    assert classify_verdict(Verdict("m", True, {"core0": 1}), comp) is VerdictClass.LOCALIZED
    # a blamed link implicates both of its ends
    assert classify_verdict(Verdict("m", True, {"agg1_0->core0": 1}), comp) \
        is VerdictClass.LOCALIZED
    assert classify_verdict(Verdict("m", True, {"agg1_0->core1": 1, "core1": 2}), comp) \
        is VerdictClass.MISDIRECTED


def test_path_links():
    assert path_links(["a", "b", "c"]) == ["a->b", "b->c"]
    assert path_links(["a"]) == []


def _disjoint_probes(bad_on_first: int, per_path: int = 40):
    """Five node-disjoint paths; the first loses ``bad_on_first`` probes."""
    out = []
    for i in range(5):
        path = [f"h{i}", f"t{i}", f"a{i}", f"u{i}", f"g{i}"]
        out += [(path, i == 0 and j < bad_on_first) for j in range(per_path)]
    return out


def test_tomography_blames_only_the_lossy_links():
    blamed = _tomography(_disjoint_probes(20), min_probes=30, threshold=0.02, factor=3.0,
                         min_bad=5)
    assert set(blamed) == {"h0->t0", "t0->a0", "a0->u0", "u0->g0"}
    assert blamed["t0->a0"] == pytest.approx(0.5)


def test_tomography_needs_enough_bad_probes():
    probes = _disjoint_probes(3)
    assert _tomography(probes, 30, 0.02, 3.0, min_bad=5) == {}
    assert len(_tomography(probes, 30, 0.02, 3.0, min_bad=1)) == 4


def test_tomography_ignores_thinly_probed_links():
    assert _tomography(_disjoint_probes(20, per_path=10), 30, 0.02, 3.0) == {}


def test_monitor_factory():
    for kind in MONITOR_KINDS:
        assert build_monitor(kind).name == kind
    with pytest.raises(ValueError):
        build_monitor("snmp")


def test_verdict_csv():
    rows = [("s", Verdict("007", True, {"b->c": 1.0, "a->b": 1.0}), VerdictClass.MISDIRECTED)]
    text = verdicts_to_csv(rows)
    assert text.splitlines()[1] == "s,007,1,a->b;b->c,Misdirected"


def test_without_misdirection_path_monitors_localize():
    """Same-sequence drop at a core with honest traceroutes and honest path tags."""
    rep = run_scenario(matrix_scenario("same_seq_drop", misdirect=False))
    assert rep.classes["007"] is VerdictClass.LOCALIZED
    assert rep.classes["fbmon"] is VerdictClass.LOCALIZED
    with_kit = run_scenario(matrix_scenario("same_seq_drop"))
    assert with_kit.classes["007"] is VerdictClass.MISDIRECTED
    assert with_kit.classes["fbmon"] is VerdictClass.MISDIRECTED
