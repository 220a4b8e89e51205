"""Scenario files: JSON documents with a versioned schema.

A scenario names a topology, a workload, the compromised switches with their
attack programs, the monitors, and the run horizon. ``build_network`` turns a
validated scenario into a ready-to-run :class:`Network`; the same scenario
built with ``attacks=False`` is the baseline twin (identical workload, ECMP
salt and seeds).
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema

from .dataplane import AttackConfig, AttackKind, AttackProgram, TargetSelector, install_attack
from .monitors import MONITOR_KINDS, Monitor, build_monitor
from .network import APP_PORT, FlowSpec, Network
from .simcore import MS, US
from .topology import (DUMBBELL_LINK, LinkSpec, Topology, build_dumbbell, build_fat_tree)
from .transport import TcpConfig
from .workload import poisson_flows, size_dist

SCHEMA_VERSION = 1

# Fat-tree default: slow enough that a laptop simulates seconds of loaded
# traffic in seconds of wall time; every link identical.
FATTREE_LINK = LinkSpec(bandwidth_bps=10e6, delay_ns=5 * US, queue_packets=100)

_LINK = {
    "type": "object",
    "properties": {
        "bandwidth_bps": {"type": "number", "exclusiveMinimum": 0},
        "delay_us": {"type": "number", "minimum": 0},
        "queue_packets": {"type": "integer", "minimum": 1},
        "ecn_threshold": {"type": ["integer", "null"], "minimum": 1},
    },
    "additionalProperties": False,
}

_TARGET = {
    "type": "object",
    "properties": {
        "src": {"type": "string"},
        "dst": {"type": "string"},
        "sport": {"type": "integer"},
        "dport": {"type": "integer"},
        "dst_pod": {"type": "integer", "minimum": 0},
        "src_pod": {"type": "integer", "minimum": 0},
    },
    "additionalProperties": False,
}

SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["version", "topology"],
    "properties": {
        "version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "ecmp_salt": {"type": "integer"},
        "horizon_ms": {"type": "number", "exclusiveMinimum": 0},
        "topology": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["fat_tree", "dumbbell"]},
                "k": {"type": "integer"},
                "switches": {"type": "integer", "minimum": 1},
                "link": _LINK,
            },
            "additionalProperties": False,
        },
        "tcp": {
            "type": "object",
            "properties": {
                "mss": {"type": "integer", "minimum": 1},
                "rto_min_ms": {"type": "number", "exclusiveMinimum": 0},
                "rto_max_ms": {"type": "number", "exclusiveMinimum": 0},
                "syn_retries": {"type": "integer", "minimum": 0},
                "data_retries": {"type": "integer", "minimum": 0},
                "synack_retries": {"type": "integer", "minimum": 0},
                "init_cwnd": {"type": "integer", "minimum": 1},
                "wscale": {"type": "integer", "minimum": 1},
                "rcv_buffer": {"type": "integer", "minimum": 1},
                "ecn": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "server": {
            "type": "object",
            "properties": {
                "syn_cookies": {"type": "boolean"},
                "syn_backlog": {"type": "integer", "minimum": 1},
                "max_connections": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "server_overrides": {"type": "object", "additionalProperties": {"type": "object"}},
        "workload": {
            "type": "object",
            "properties": {
                "flows": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["src", "dst", "bytes"],
                        "properties": {
                            "src": {"type": "string"},
                            "dst": {"type": "string"},
                            "bytes": {"type": "integer", "minimum": 1},
                            "start_ms": {"type": "number", "minimum": 0},
                            "dport": {"type": "integer"},
                        },
                        "additionalProperties": False,
                    },
                },
                "poisson": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["load"],
                        "properties": {
                            "load": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                            "sizes": {"type": ["string", "integer"]},
                            "size_scale": {"type": "number", "exclusiveMinimum": 0},
                            "start_ms": {"type": "number", "minimum": 0},
                            "stop_ms": {"type": "number", "exclusiveMinimum": 0},
                            "sources": {"type": "array", "items": {"type": "string"}},
                            "destinations": {"type": "array", "items": {"type": "string"}},
                            "dst_pod": {"type": "integer", "minimum": 0},
                        },
                        "additionalProperties": False,
                    },
                },
            },
            "additionalProperties": False,
        },
        "attacks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["kind"],
                "properties": {
                    "switch": {"type": "string"},
                    "switches": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                    "kind": {"enum": [k.value for k in AttackKind]},
                    "target": _TARGET,
                    "params": {"type": "object"},
                    "budget": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
                    "budget_window": {"type": ["integer", "null"], "minimum": 1},
                },
                "oneOf": [{"required": ["switch"]}, {"required": ["switches"]}],
                "additionalProperties": False,
            },
        },
        "monitors": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["kind"],
                "properties": {
                    "kind": {"enum": list(MONITOR_KINDS)},
                    "params": {"type": "object"},
                },
                "additionalProperties": False,
            },
        },
        "metrics": {
            "type": "object",
            "properties": {
                "dst_pod": {"type": "integer", "minimum": 0},
                "dst": {"type": "string"},
                "flows": {"type": "array", "items": {"type": "integer", "minimum": 0}},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


class ScenarioError(ValueError):
    """Validation failure; the message names the offending field path."""


def _path(parts) -> str:
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def validate(doc: dict) -> dict:
    """Check ``doc`` against the schema and the topology; return it unchanged."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        msgs = [f"{_path(e.absolute_path)}: {e.message}" for e in errors]
        raise ScenarioError("; ".join(msgs))
    topo = build_topology(doc)
    switches = set(topo.switches)
    nodes = set(topo.nodes)
    pods = {topo.pod(n) for n in topo.nodes} - {None}

    def check_pod(where: str, pod: int | None) -> None:
        if pod is not None and pod not in pods:
            raise ScenarioError(f"{where}: pod {pod} does not exist")

    for i, a in enumerate(doc.get("attacks", [])):
        for sw in attack_switches(a):
            if sw not in switches:
                raise ScenarioError(f"$.attacks[{i}]: {sw!r} is not a switch of the topology")
        tgt = a.get("target", {})
        check_pod(f"$.attacks[{i}].target.dst_pod", tgt.get("dst_pod"))
        check_pod(f"$.attacks[{i}].target.src_pod", tgt.get("src_pod"))
        for key in ("src", "dst"):
            if key in tgt and tgt[key] not in nodes:
                raise ScenarioError(f"$.attacks[{i}].target.{key}: unknown node {tgt[key]!r}")
        params = a.get("params", {})
        check_pod(f"$.attacks[{i}].params.victim_pod", params.get("victim_pod"))
        for key in ("victim", "core", "fake"):
            if key in params and params[key] not in nodes:
                raise ScenarioError(f"$.attacks[{i}].params.{key}: unknown node {params[key]!r}")
    wl = doc.get("workload", {})
    for i, f in enumerate(wl.get("flows", [])):
        for key in ("src", "dst"):
            if f[key] not in topo.hosts:
                raise ScenarioError(f"$.workload.flows[{i}].{key}: unknown host {f[key]!r}")
    for i, p in enumerate(wl.get("poisson", [])):
        check_pod(f"$.workload.poisson[{i}].dst_pod", p.get("dst_pod"))
        for key in ("sources", "destinations"):
            for h in p.get(key, []):
                if h not in topo.hosts:
                    raise ScenarioError(f"$.workload.poisson[{i}].{key}: unknown host {h!r}")
    check_pod("$.metrics.dst_pod", doc.get("metrics", {}).get("dst_pod"))
    for h in doc.get("server_overrides", {}):
        if h not in topo.hosts:
            raise ScenarioError(f"$.server_overrides: unknown host {h!r}")
    return doc


def load(path: str | Path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON ({exc})") from exc
    return validate(doc)


def attack_switches(entry: dict) -> list[str]:
    return list(entry["switches"]) if "switches" in entry else [entry["switch"]]


def compromised(doc: dict) -> set[str]:
    return {sw for a in doc.get("attacks", []) for sw in attack_switches(a)}


def link_spec(d: dict | None, default: LinkSpec) -> LinkSpec:
    if not d:
        return default
    return LinkSpec(
        bandwidth_bps=float(d.get("bandwidth_bps", default.bandwidth_bps)),
        delay_ns=int(round(d["delay_us"] * US)) if "delay_us" in d else default.delay_ns,
        queue_packets=int(d.get("queue_packets", default.queue_packets)),
        ecn_threshold=d.get("ecn_threshold", default.ecn_threshold),
    )


def build_topology(doc: dict) -> Topology:
    t = doc["topology"]
    if t["kind"] == "fat_tree":
        try:
            return build_fat_tree(t.get("k", 4), link_spec(t.get("link"), FATTREE_LINK))
        except ValueError as exc:
            raise ScenarioError(f"$.topology.k: {exc}") from exc
    return build_dumbbell(link_spec(t.get("link"), DUMBBELL_LINK), t.get("switches", 2))


def tcp_config(doc: dict) -> TcpConfig:
    t = dict(doc.get("tcp", {}))
    kw: dict[str, Any] = {}
    for key in ("rto_min", "rto_max"):
        if f"{key}_ms" in t:
            kw[key] = int(round(t.pop(f"{key}_ms") * MS))
    kw.update(t)
    return TcpConfig(**kw)


def _ms_params(params: dict) -> dict:
    """``*_ms`` keys become nanosecond values under the bare key."""
    out = {}
    for k, v in params.items():
        if k.endswith("_ms") and isinstance(v, (int, float)):
            out[k[:-3]] = int(round(v * MS))
        else:
            out[k] = v
    return out


def workload_flows(doc: dict, net: Network) -> list[FlowSpec]:
    wl = doc.get("workload", {})
    flows = [FlowSpec(f["src"], f["dst"], f["bytes"], int(round(f.get("start_ms", 0) * MS)),
                      f.get("dport", APP_PORT)) for f in wl.get("flows", [])]
    topo = net.topo
    for i, p in enumerate(wl.get("poisson", [])):
        hosts = p.get("sources") or topo.hosts
        dests = p.get("destinations")
        if "dst_pod" in p:
            dests = [h for h in topo.hosts if topo.pod(h) == p["dst_pod"]]
        sizes = size_dist(p.get("sizes", "websearch"), p.get("size_scale", 1.0))
        src_link = topo.links[(hosts[0], topo.tor_of(hosts[0]))]
        flows += poisson_flows(
            hosts, net.rng[f"workload/{i}"], load=p["load"], link_bps=src_link.bandwidth_bps,
            sizes=sizes, start=int(round(p.get("start_ms", 0) * MS)),
            stop=int(round(p.get("stop_ms", 1000) * MS)), destinations=dests)
    flows.sort(key=lambda f: (f.start, f.src, f.dst))
    return flows


def attack_config(entry: dict) -> AttackConfig:
    return AttackConfig(
        kind=AttackKind(entry["kind"]),
        target=TargetSelector(**entry.get("target", {})),
        params=_ms_params(entry.get("params", {})),
        budget=entry.get("budget"),
        budget_window=entry.get("budget_window"),
    )


@dataclass
class Built:
    net: Network
    monitors: list[Monitor] = field(default_factory=list)
    programs: list[AttackProgram] = field(default_factory=list)
    horizon: int = 0


def build_network(doc: dict, *, attacks: bool = True, monitors: bool = True,
                  trace: bool = False, seed: int | None = None) -> Built:
    seed = doc.get("seed", 1) if seed is None else seed
    topo = build_topology(doc)
    net = Network(topo, seed=seed, ecmp_salt=doc.get("ecmp_salt"), tcp=tcp_config(doc),
                  trace=trace)
    server = doc.get("server", {})
    overrides = doc.get("server_overrides", {})
    for name, host in net.hosts.items():
        host.listen(APP_PORT, **{**server, **overrides.get(name, {})})
    built = Built(net, horizon=int(round(doc.get("horizon_ms", 10_000) * MS)))
    if monitors:
        for m in doc.get("monitors", []):
            mon = build_monitor(m["kind"], _ms_params(m.get("params", {})))
            mon.attach(net)
            built.monitors.append(mon)
    if attacks:
        for entry in doc.get("attacks", []):
            for sw in attack_switches(entry):
                built.programs.append(install_attack(net, sw, attack_config(entry)))
    for spec in workload_flows(doc, net):
        net.add_flow(spec)
    return built


def without_attacks(doc: dict) -> dict:
    out = copy.deepcopy(doc)
    out["attacks"] = []
    return out
