"""Experiment execution: baseline/attacked run pairs, damage multipliers,
the evasion matrix, the incast sweep and the coflow sweep."""

from __future__ import annotations

import json
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import coflow, scenario
from .monitors import (MONITOR_KINDS, Verdict, VerdictClass, classify_verdict,
                       verdicts_to_csv)
from .transport import FlowRecord, FlowStatus, flows_to_csv


@dataclass
class RunResult:
    flows: list[FlowRecord]
    verdicts: list[Verdict]
    attack_actions: dict[str, dict[str, int]]
    attacker_trace_actions: int
    transited: int
    events: int
    open_flows: int
    trace: list[str] | None = None


def run_once(doc: dict, *, attacks: bool = True, trace: bool = False,
             seed: int | None = None) -> RunResult:
    built = scenario.build_network(doc, attacks=attacks, trace=trace, seed=seed)
    net = built.net
    net.run(built.horizon)
    actions = {f"{p.switch}/{p.name}": dict(p.actions) for p in built.programs}
    return RunResult(
        flows=net.flows,
        verdicts=[m.verdict() for m in built.monitors],
        attack_actions=actions,
        attacker_trace_actions=net.tracer.attacker_action_count,
        transited=net.total_transited(),
        events=net.sim.stats().processed,
        open_flows=sum(1 for f in net.flows if f.status is FlowStatus.OPEN),
        trace=net.tracer.lines() if trace else None,
    )


def _ratio(a: float, b: float) -> float:
    if b == 0:
        return 1.0 if a == 0 else float("inf")
    return a / b


def damage(baseline: list[FlowRecord], attacked: list[FlowRecord],
           select: Callable[[FlowRecord], bool] = lambda f: True) -> dict[str, Any]:
    """Attack/baseline multipliers over flows paired by id.

    ``fct_*`` use flows that completed in both runs. ``fct_mean_lb`` also
    counts flows the attack kept from completing, at their elapsed time (a
    lower bound on their true completion time).
    """
    pairs = [(b, a) for b, a in zip(baseline, attacked) if select(b)]
    both = [(b.fct, a.fct) for b, a in pairs if b.fct is not None and a.fct is not None]
    out: dict[str, Any] = {"flows": len(pairs), "paired_completed": len(both)}
    if both:
        bf = np.array([x for x, _ in both], dtype=float)
        af = np.array([y for _, y in both], dtype=float)
        out["fct_mean"] = _ratio(float(af.mean()), float(bf.mean()))
        out["fct_median"] = _ratio(float(np.median(af)), float(np.median(bf)))
        out["fct_p99"] = _ratio(float(np.percentile(af, 99)), float(np.percentile(bf, 99)))
        out["baseline_fct_mean_s"] = float(bf.mean()) / 1e9
        out["attack_fct_mean_s"] = float(af.mean()) / 1e9
    lb_b, lb_a = [], []
    for b, a in pairs:
        if b.fct is None:
            continue
        lb_b.append(b.fct)
        lb_a.append(a.fct if a.fct is not None else (a.end_time or 0) - a.start)
    if lb_b:
        out["fct_mean_lb"] = _ratio(statistics.fmean(lb_a), statistics.fmean(lb_b))
    est = [(b.establishment_time, a.establishment_time) for b, a in pairs
           if b.establishment_time is not None and a.establishment_time is not None]
    if est:
        out["establishment_mean"] = _ratio(statistics.fmean(a for _, a in est),
                                           statistics.fmean(b for b, _ in est))
    status: dict[str, int] = {}
    for _, a in pairs:
        status[a.status.value] = status.get(a.status.value, 0) + 1
    out["attack_status"] = status
    return out


def metric_selector(doc: dict) -> Callable[[FlowRecord], bool]:
    m = doc.get("metrics", {})
    topo = scenario.build_topology(doc)
    ids = set(m.get("flows", []))
    pod = m.get("dst_pod")
    dst = m.get("dst")

    def select(f: FlowRecord) -> bool:
        if ids and f.flow_id not in ids:
            return False
        if pod is not None and topo.pod(f.dst) != pod:
            return False
        if dst is not None and f.dst != dst:
            return False
        return True
    return select


@dataclass
class RunReport:
    name: str
    compromised: set[str]
    baseline: RunResult
    attacked: RunResult
    multipliers: dict[str, Any]
    classes: dict[str, VerdictClass] = field(default_factory=dict)
    partial: bool = False

    def verdict_rows(self) -> list[tuple[str, Verdict, VerdictClass]]:
        return [(self.name, v, self.classes[v.monitor]) for v in self.attacked.verdicts]

    def to_json(self) -> dict:
        return {
            "scenario": self.name,
            "compromised": sorted(self.compromised),
            "partial": self.partial,
            "multipliers": self.multipliers,
            "attack_actions": self.attacked.attack_actions,
            "baseline_attacker_actions": self.baseline.attacker_trace_actions,
            "verdicts": [
                {"monitor": v.monitor, "alarm": v.alarm, "blamed": v.blamed,
                 "class": self.classes[v.monitor].value}
                for v in self.attacked.verdicts
            ],
            "baseline_alarms": [v.monitor for v in self.baseline.verdicts if v.alarm],
        }


def run_scenario(doc_or_path: dict | str | Path, *, seed: int | None = None,
                 trace: bool = False, out: str | Path | None = None) -> RunReport:
    doc = (scenario.load(doc_or_path) if not isinstance(doc_or_path, dict)
           else scenario.validate(doc_or_path))
    base = run_once(doc, attacks=False, trace=trace, seed=seed)
    att = run_once(doc, attacks=True, trace=trace, seed=seed)
    comp = scenario.compromised(doc)
    report = RunReport(
        name=doc.get("name", "scenario"),
        compromised=comp,
        baseline=base,
        attacked=att,
        multipliers=damage(base.flows, att.flows, metric_selector(doc)),
        classes={v.monitor: classify_verdict(v, comp) for v in att.verdicts},
        partial=att.open_flows > 0,
    )
    if out is not None:
        write_report(report, Path(out))
    return report


def write_report(report: RunReport, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "flows_baseline.csv").write_text(flows_to_csv(report.baseline.flows))
    (out / "flows_attack.csv").write_text(flows_to_csv(report.attacked.flows))
    (out / "verdicts.csv").write_text(verdicts_to_csv(report.verdict_rows()))
    (out / "report.json").write_text(json.dumps(report.to_json(), indent=2, sort_keys=True,
                                                default=str) + "\n")
    if report.attacked.trace is not None:
        (out / "trace_baseline.tsv").write_text("\n".join(report.baseline.trace) + "\n")
        (out / "trace_attack.tsv").write_text("\n".join(report.attacked.trace) + "\n")


# -- single-flow link experiments ---------------------------------------------

def dumbbell_scenario(kind: str | None = None, params: dict | None = None, *,
                      size: int = 1_000_000, horizon_ms: float = 60_000, seed: int = 1,
                      flows: int = 1) -> dict:
    """client - s0 - s1 - server over 5 Mbps links, 2 ms RTT; s0 runs ``kind``."""
    doc = {
        "version": scenario.SCHEMA_VERSION,
        "name": f"dumbbell-{kind or 'clean'}",
        "seed": seed,
        "horizon_ms": horizon_ms,
        "topology": {"kind": "dumbbell"},
        "workload": {"flows": [{"src": "client", "dst": "server", "bytes": size,
                                "start_ms": 10 * i} for i in range(flows)]},
    }
    if kind is not None:
        doc["attacks"] = [{"switch": "s0", "kind": kind, "target": {"dst": "server"},
                           "params": dict(params or {})}]
    return doc


def single_flow_ratio(kind: str, params: dict, *, size: int = 1_000_000,
                      horizon_ms: float = 60_000, seed: int = 1,
                      stat: str = "fct_median") -> float:
    rep = run_scenario(dumbbell_scenario(kind, params, size=size, horizon_ms=horizon_ms,
                                         seed=seed))
    return float(rep.multipliers.get(stat, float("inf")))


# -- evasion matrix ------------------------------------------------------------

ATTACK_ROWS = ("syn_drop", "same_seq_drop", "syn_flood", "rst_tinker", "ack_and_drop",
               "ecn_tinker", "cwnd_tinker", "incast")
ROW_LABELS = {
    "syn_drop": "SYN Drop", "same_seq_drop": "Same Sequence Drop", "syn_flood": "SYN Flood",
    "rst_tinker": "RST Tinker", "ack_and_drop": "ACK and Drop", "ecn_tinker": "ECN Tinker",
    "cwnd_tinker": "CWND Tinker", "incast": "Coordinated Incast",
}
COLUMN_LABELS = {"sflow": "sFlow", "netflow": "NetFlow", "007": "007",
                 "netbouncer": "NetBouncer", "pingmesh": "Pingmesh", "fbmon": "FB-Mon",
                 "everflow": "Everflow"}

# True = the attack is effective despite the monitor (Undetected or
# Misdirected); False = the monitor localizes a compromised switch.
EXPECTED = {row: {col: True for col in MONITOR_KINDS} for row in ATTACK_ROWS}
for _row in ("syn_drop", "syn_flood", "rst_tinker"):
    EXPECTED[_row]["everflow"] = False


def base_scenario(name: str, *, load: float = 0.2, stop_ms: float = 3000,
              horizon_ms: float = 8000, seed: int = 1) -> dict:
    """k=4 fat-tree, websearch traffic, every monitor, no attacks yet."""
    return {
        "version": scenario.SCHEMA_VERSION,
        "name": name,
        "seed": seed,
        "horizon_ms": horizon_ms,
        "topology": {"kind": "fat_tree", "k": 4},
        "workload": {"poisson": [{"load": load, "sizes": "websearch", "size_scale": 0.1,
                                  "start_ms": 0, "stop_ms": stop_ms}]},
        "monitors": [{"kind": k} for k in MONITOR_KINDS],
        "attacks": [],
    }


def _evasion(switches: list[str], fake: str) -> list[dict]:
    """Misdirection kit carried by every on-path attacker."""
    return [
        {"switches": switches, "kind": "core_id_rewrite", "params": {"fake": fake}},
        {"switches": switches, "kind": "traceroute_spoof", "params": {"mode": "knowledge"}},
    ]


def matrix_scenario(attack: str, *, seed: int = 1, misdirect: bool = True) -> dict:
    """Canonical k=4 scenario for one row of the evasion matrix.

    On-path attacks sit on core0 and target flows into pod 1; the flood sits
    on the victim's ToR; the incast steers pod-0-bound traffic from the
    agg*_0 switches of pods 1-3 onto core0.
    """
    doc = base_scenario(f"matrix-{attack}", seed=seed)
    target = {"dst_pod": 1}
    sw = ["core0"]
    if attack == "syn_drop":
        doc["attacks"].append({"switches": sw, "kind": "syn_drop", "target": target,
                               "params": {"drops": 6}})
        doc["horizon_ms"] = 20000
    elif attack == "same_seq_drop":
        doc["attacks"].append({"switches": sw, "kind": "same_seq_drop", "target": target,
                               "params": {"drops": 6}})
        doc["horizon_ms"] = 20000
    elif attack == "rst_tinker":
        doc["attacks"].append({"switches": sw, "kind": "rst_tinker", "target": target})
    elif attack == "ack_and_drop":
        doc["attacks"].append({"switches": sw, "kind": "ack_and_drop", "target": target})
    elif attack == "ecn_tinker":
        doc["attacks"].append({"switches": sw, "kind": "ecn_tinker", "target": target,
                               "params": {"f": 0.3}})
    elif attack == "cwnd_tinker":
        doc["attacks"].append({"switches": sw, "kind": "cwnd_tinker", "target": target,
                               "params": {"W": 1}})
    elif attack == "syn_flood":
        sw = ["tor1_0"]
        doc["server"] = {"syn_cookies": True}
        doc["attacks"].append({"switches": sw, "kind": "syn_flood",
                               "params": {"victim": "h1_0_0", "rate": 2000, "start_ms": 200}})
        doc["metrics"] = {"dst": "h1_0_0"}
    elif attack == "incast":
        sw = ["agg1_0", "agg2_0", "agg3_0"]
        doc["workload"]["poisson"][0]["load"] = 0.45
        doc["attacks"].append({"switches": sw, "kind": "incast",
                               "params": {"victim_pod": 0, "core": "core0", "pp": 0.5,
                                          "period_ms": 500}})
        doc["metrics"] = {"dst_pod": 0}
        target = {"dst_pod": 0}
    else:
        raise ValueError(f"unknown attack {attack!r}")
    if misdirect and attack != "incast":
        evasion = _evasion(sw, "core1" if "core1" not in sw else "core2")
        for e in evasion:
            e["target"] = target
        doc["attacks"] += evasion
    return doc


@dataclass
class MatrixResult:
    cells: dict[str, dict[str, VerdictClass]]
    reports: dict[str, RunReport]

    def mismatches(self) -> list[tuple[str, str, VerdictClass]]:
        out = []
        for row in ATTACK_ROWS:
            for col in MONITOR_KINDS:
                got = self.cells[row][col]
                effective = got is not VerdictClass.LOCALIZED
                if effective != EXPECTED[row][col]:
                    out.append((row, col, got))
        return out

    def render(self) -> str:
        mark = {VerdictClass.UNDETECTED: "ok(U)", VerdictClass.MISDIRECTED: "ok(M)",
                VerdictClass.LOCALIZED: "X(L)"}
        w0 = max(len(v) for v in ROW_LABELS.values()) + 2
        cols = [COLUMN_LABELS[c] for c in MONITOR_KINDS]
        widths = [max(len(c), 7) + 2 for c in cols]
        lines = ["".ljust(w0) + "".join(c.ljust(w) for c, w in zip(cols, widths)) + "Damage"]
        for row in ATTACK_ROWS:
            cells = []
            for col, w in zip(MONITOR_KINDS, widths):
                txt = mark[self.cells[row][col]]
                if (self.cells[row][col] is not VerdictClass.LOCALIZED) != EXPECTED[row][col]:
                    txt += "!"
                cells.append(txt.ljust(w))
            lines.append(ROW_LABELS[row].ljust(w0) + "".join(cells)
                         + damage_summary(row, self.reports[row]))
        lines.append("ok = attack effective (U undetected, M misdirected); "
                     "X = compromised switch localized; ! = differs from expected")
        return "\n".join(lines) + "\n"


def damage_summary(row: str, rep: RunReport) -> str:
    m = rep.multipliers
    st = m.get("attack_status", {})
    if row == "syn_drop":
        return f"{m.get('establishment_mean', 1.0):.1f}x conn. est. time"
    if row == "syn_flood":
        return f"DoS: {st.get('failed', 0)} of {m['flows']} flows to victim failed"
    if row in ("rst_tinker",):
        return f"{st.get('disconnected', 0)} flows disconnected"
    if row == "ack_and_drop":
        return f"{st.get('open', 0) + st.get('timeout', 0)} flows stalled"
    return f"{m.get('fct_mean_lb', 1.0):.1f}x FCT (mean, lower bound)"


def _matrix_row(args: tuple[str, int]) -> tuple[str, RunReport]:
    row, seed = args
    return row, run_scenario(matrix_scenario(row, seed=seed))


def run_matrix(*, seed: int = 1, parallel: int = 1, out: str | Path | None = None) -> MatrixResult:
    jobs = [(row, seed) for row in ATTACK_ROWS]
    if parallel > 1:
        with ProcessPoolExecutor(parallel) as ex:
            results = dict(ex.map(_matrix_row, jobs))
    else:
        results = dict(map(_matrix_row, jobs))
    cells = {row: dict(results[row].classes) for row in ATTACK_ROWS}
    res = MatrixResult(cells, results)
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        rows = [r for row in ATTACK_ROWS for r in results[row].verdict_rows()]
        (out / "verdicts.csv").write_text(verdicts_to_csv(rows))
        (out / "matrix.txt").write_text(res.render())
        (out / "matrix.json").write_text(json.dumps(
            {row: {col: c.value for col, c in cells[row].items()} for row in ATTACK_ROWS},
            indent=2) + "\n")
    return res


# -- coordinated incast sweep ----------------------------------------------------

INCAST_LOADS = (0.2, 0.8)
INCAST_PPS = (0.0, 0.06, 0.15, 0.3)


def incast_scenario(load: float, pp: float, *, seed: int = 1, k: int = 6,
                    stop_ms: float = 4000, horizon_ms: float = 12000,
                    period_ms: float = 1000, victim_pod: int = 0,
                    group: int = 0, queue_packets: int = 100, size_scale: float = 0.01,
                    ecn: bool = False) -> dict:
    """k-ary fat-tree, websearch traffic, and the coordinated incast.

    The compromised switches are aggregation switch ``group`` of every
    non-victim pod; during pulses they hand every victim-pod-bound packet to
    the first core of their group, which is innocent. Flow sizes are scaled
    so that flow durations on the slow simulated links stay comparable to the
    pulse period and the minimum retransmission timeout.
    """
    half = k // 2
    comp = [f"agg{p}_{group}" for p in range(k) if p != victim_pod]
    core = f"core{group * half}"
    doc = {
        "version": scenario.SCHEMA_VERSION,
        "name": f"incast-load{load:g}-pp{pp:g}",
        "seed": seed,
        "horizon_ms": horizon_ms,
        "topology": {"kind": "fat_tree", "k": k, "link": {"queue_packets": queue_packets}},
        "tcp": {"ecn": ecn},
        "workload": {"poisson": [{"load": load, "sizes": "websearch", "size_scale": size_scale,
                                  "start_ms": 0, "stop_ms": stop_ms}]},
        "attacks": [{"switches": comp, "kind": "incast",
                     "params": {"victim_pod": victim_pod, "core": core, "pp": pp,
                                "period_ms": period_ms}}],
        "metrics": {"dst_pod": victim_pod},
    }
    return doc


INCAST_CSV_COLUMNS = ["load", "pp", "flows", "baseline_mean_fct_s", "attack_mean_fct_s",
                      "mean_ratio", "p99_ratio"]


def _incast_run(args: tuple[float, float, bool, int, dict]) -> RunResult:
    load, pp, attacks, seed, kw = args
    return run_once(scenario.validate(incast_scenario(load, pp, seed=seed, **kw)),
                    attacks=attacks)


def run_incast_sweep(loads=INCAST_LOADS, pps=INCAST_PPS, *, seed: int = 1,
                     parallel: int = 1, out: str | Path | None = None, **kw) -> list[dict]:
    """Victim-pod FCT ratio per (load, pp); one baseline run serves every pp of a load."""
    jobs = [(load, 0.0, False, seed, kw) for load in loads]
    jobs += [(load, pp, True, seed, kw) for load in loads for pp in pps]
    if parallel > 1:
        with ProcessPoolExecutor(parallel) as ex:
            results = list(ex.map(_incast_run, jobs))
    else:
        results = [_incast_run(j) for j in jobs]
    baselines = dict(zip(loads, results[:len(loads)]))
    select = metric_selector(incast_scenario(loads[0], 0.0, seed=seed, **kw))
    rows = []
    for (load, pp, _, _, _), att in zip(jobs[len(loads):], results[len(loads):]):
        m = damage(baselines[load].flows, att.flows, select)
        rows.append({"load": load, "pp": pp, "flows": m["flows"],
                     "baseline_mean_fct_s": m.get("baseline_fct_mean_s", 0.0),
                     "attack_mean_fct_s": m.get("attack_fct_mean_s", 0.0),
                     "mean_ratio": m.get("fct_mean_lb", 1.0), "p99_ratio": m.get("fct_p99", 1.0)})
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "incast.csv").write_text(_csv(rows, INCAST_CSV_COLUMNS))
    return rows


def _csv(rows: list[dict], cols: list[str]) -> str:
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join(f"{r[c]:.6g}" if isinstance(r[c], float) else str(r[c])
                              for c in cols))
    return "\n".join(lines) + "\n"


# -- coflow figures ----------------------------------------------------------------

def coflow_figures(*, n: int = 10_000, trials: int = 30, seed: int = 1,
                   pmc_grid: list[float] | None = None) -> dict[str, list[dict]]:
    pmc = pmc_grid if pmc_grid is not None else [round(0.1 * i, 1) for i in range(11)]
    base = coflow.CoflowConfig(n=n, m=500, r=1, F=1, D=1e-4, trials=trials, seed=seed)
    vary_r = coflow.sweep(base, pmc, rs=[1, 2], Fs=[1], ms=[500])
    vary_F = coflow.sweep(base, pmc, rs=[2], Fs=[1, 2, 5, 10], ms=[500])
    vary_m = coflow.sweep(base, pmc, rs=[2], Fs=[1], ms=[250, 500, 1000, 2000])
    return {"vary_r": vary_r, "vary_F": vary_F, "vary_m": vary_m}


def run_coflow_sweep(*, n: int = 10_000, trials: int = 30, seed: int = 1,
                     out: str | Path | None = None,
                     pmc_grid: list[float] | None = None) -> dict[str, list[dict]]:
    figs = coflow_figures(n=n, trials=trials, seed=seed, pmc_grid=pmc_grid)
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        for name, rows in figs.items():
            (out / f"coflow_{name}.csv").write_text(coflow.rows_to_csv(rows))
    return figs
