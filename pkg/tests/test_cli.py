import json
from pathlib import Path

import pytest

from underradar import cli

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def test_parser_knows_every_verb():
    p = cli.build_parser()
    for verb in ("run x.json", "matrix", "incast-sweep", "coflow-sweep", "dump-topology"):
        args = p.parse_args(verb.split() + ["--seed", "3", "--parallel", "2"])
        assert args.seed == 3 and args.parallel == 2


def test_parser_rejects_unknown_verb():
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args(["fly"])


def test_run_writes_reports(tmp_path, capsys):
    rc = cli.main(["run", str(SCENARIOS / "syn_drop_dumbbell.json"), "--out", str(tmp_path),
                   "--trace"])
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    assert report["multipliers"]["establishment_mean"] > 60
    for name in ("flows_baseline.csv", "flows_attack.csv", "verdicts.csv", "report.json",
                 "trace_attack.tsv"):
        assert (tmp_path / name).exists()


def test_run_reports_invalid_scenario(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"version": 1, "topology": {"kind": "ring"}}))
    assert cli.main(["run", str(bad)]) == 2
    assert "$" in capsys.readouterr().err


def test_dump_topology(tmp_path, capsys):
    assert cli.main(["dump-topology", "--k", "6", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "# nodes 99 hosts 54 switches 45" in out
    assert (tmp_path / "topology.tsv").read_text() == out


def test_dump_topology_from_scenario(capsys):
    assert cli.main(["dump-topology", str(SCENARIOS / "syn_drop_dumbbell.json")]) == 0
    assert "link\tclient\ts0" in capsys.readouterr().out


def test_coflow_sweep(tmp_path, capsys):
    rc = cli.main(["coflow-sweep", "--n", "300", "--trials", "2", "--pmc", "0,1",
                   "--out", str(tmp_path)])
    assert rc == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == \
        ["coflow_vary_F.csv", "coflow_vary_m.csv", "coflow_vary_r.csv"]
    assert "# vary_m" in capsys.readouterr().out


def test_incast_sweep_small(tmp_path, capsys):
    rc = cli.main(["incast-sweep", "--k", "4", "--loads", "0.2", "--pps", "0,0.5",
                   "--out", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "incast.csv").read_text().splitlines()
    assert lines[0].startswith("load,pp,flows")
    assert len(lines) == 3
    assert lines[1].split(",")[5] == "1"  # pp=0 is the baseline itself


@pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.json")), ids=lambda p: p.name)
def test_shipped_scenarios_validate(path):
    from underradar import scenario
    assert scenario.load(path)["version"] == 1
