import copy
import json

import pytest

from underradar import scenario
from underradar.harness import dumbbell_scenario, incast_scenario, matrix_scenario
from underradar.simcore import MS


@pytest.fixture
def doc():
    return matrix_scenario("ecn_tinker")


def _err(doc):
    with pytest.raises(scenario.ScenarioError) as exc:
        scenario.validate(doc)
    return str(exc.value)


@pytest.mark.parametrize("mutate,path", [
    (lambda d: d["workload"]["poisson"][0].__setitem__("load", -1), "$.workload.poisson[0].load"),
    (lambda d: d["attacks"][0].__setitem__("kind", "teleport"), "$.attacks[0].kind"),
    (lambda d: d["attacks"][0].__setitem__("switches", ["core99"]), "$.attacks[0]"),
    (lambda d: d.pop("version"), "$"),
    (lambda d: d["topology"].__setitem__("k", 5), "$.topology.k"),
    (lambda d: d["monitors"][0].__setitem__("kind", "snmp"), "$.monitors[0].kind"),
    (lambda d: d.__setitem__("colour", "red"), "$"),
    (lambda d: d["attacks"][0]["target"].__setitem__("dst_pod", 9), "$.attacks[0].target.dst_pod"),
])
def test_errors_name_the_offending_field(doc, mutate, path):
    mutate(doc)
    msg = _err(doc)
    assert msg.startswith(path + ":") or msg.startswith(path + "[")


def test_unknown_switch_is_reported(doc):
    doc["attacks"][0]["switches"] = ["core99"]
    assert "core99" in _err(doc)


@pytest.mark.parametrize("build", [lambda: matrix_scenario("syn_flood"),
                                   lambda: incast_scenario(0.2, 0.06),
                                   lambda: dumbbell_scenario("syn_drop", {"drops": 2})])
def test_builtin_scenarios_validate(build):
    assert scenario.validate(build())


def test_load_reads_json_and_rejects_garbage(tmp_path, doc):
    good = tmp_path / "s.json"
    good.write_text(json.dumps(doc))
    assert scenario.load(good)["name"] == doc["name"]
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(scenario.ScenarioError):
        scenario.load(bad)


def test_compromised_set_and_ms_params():
    d = incast_scenario(0.2, 0.06)
    assert scenario.compromised(d) == {f"agg{p}_0" for p in range(1, 6)}
    cfg = scenario.attack_config(d["attacks"][0])
    assert cfg.params["period"] == 1000 * MS


def test_without_attacks_builds_clean_network(doc):
    built = scenario.build_network(scenario.validate(copy.deepcopy(doc)), attacks=False)
    assert built.programs == []
    assert len(built.monitors) == 7
