"""Monitoring systems and the verdict engine.

Monitors only observe: they read packets through taps and inject their own
probe traffic (always as shadow packets, so probes never load queues).
Blamed entities are switch names or directed links written ``a->b``.
"""

from __future__ import annotations

import csv
import enum
import io
import statistics
from dataclasses import dataclass, field
from typing import Any

from .network import Host, Network
from .packet import FIN, RST, SYN, Kind, Packet, Proto
from .simcore import MS, EventKind
from .topology import EnqueueResult, Role
from .transport import FlowRecord, FlowStatus, TcpSender


class VerdictClass(enum.Enum):
    UNDETECTED = "Undetected"
    MISDIRECTED = "Misdirected"
    LOCALIZED = "Localized"


@dataclass
class Verdict:
    monitor: str
    alarm: bool = False
    blamed: dict[str, float] = field(default_factory=dict)
    detail: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.alarm != bool(self.blamed):
            raise ValueError("a verdict raises an alarm exactly when it blames something")


def link_id(a: str, b: str) -> str:
    return f"{a}->{b}"


def entity_nodes(entity: str) -> set[str]:
    return set(entity.split("->"))


def classify_verdict(v: Verdict, compromised: set[str]) -> VerdictClass:
    """A blamed link implicates both of its endpoints."""
    if not v.alarm:
        return VerdictClass.UNDETECTED
    for ent in v.blamed:
        if entity_nodes(ent) & compromised:
            return VerdictClass.LOCALIZED
    return VerdictClass.MISDIRECTED


def path_links(path: list[str]) -> list[str]:
    return [link_id(a, b) for a, b in zip(path, path[1:])]


class Monitor:
    name = "monitor"

    def attach(self, net: Network) -> None:
        self.net = net

    def verdict(self) -> Verdict:
        raise NotImplementedError


# -- sampling --------------------------------------------------------------


class Sampler(Monitor):
    """Packet sampling at every switch with a loss and volume anomaly check.

    ``method="random"`` samples each packet independently with probability
    1/N (sFlow style). ``method="systematic"`` takes every N-th packet and
    folds samples into per-flow records (sampled NetFlow style). Each sampled
    packet's fate at the sampling switch (forwarded or not) feeds a per-switch
    loss estimate; sampled bytes feed per-link volume estimates.
    """

    def __init__(self, name: str = "sflow", N: int = 1000, method: str = "random",
                 factor: float = 3.0, min_samples: int = 50, loss_floor: float = 0.02,
                 volume_factor: float | None = 3.0):
        self.name = name
        self.N = N
        self.method = method
        self.factor = factor
        self.min_samples = min_samples
        self.loss_floor = loss_floor
        self.volume_factor = volume_factor
        self.sampled: dict[str, int] = {}
        self.forwarded: dict[str, int] = {}
        self.link_bytes: dict[tuple[str, str], int] = {}
        self.link_samples: dict[tuple[str, str], int] = {}
        self.flow_records: dict[tuple, dict] = {}
        self._pending: dict[int, str] = {}
        self._counter: dict[str, int] = {}

    def attach(self, net: Network) -> None:
        super().attach(net)
        if self.N < 1:
            raise ValueError("sampling rate 1/N needs N >= 1")
        self.rng = net.rng[f"monitor/{self.name}"]
        net.ingress_taps.append(self._ingress)
        net.egress_taps.append(self._egress)

    def _take(self, switch: str) -> bool:
        if self.method == "systematic":
            c = self._counter.get(switch, 0) + 1
            self._counter[switch] = c
            return c % self.N == 0
        return self.rng.uniform01() * self.N < 1.0

    def _ingress(self, switch: str, pkt: Packet, prev: str | None) -> None:
        if pkt.shadow or not self._take(switch):
            return
        self.sampled[switch] = self.sampled.get(switch, 0) + 1
        self._pending[pkt.uid] = switch
        if self.method == "systematic":
            rec = self.flow_records.setdefault((switch,) + pkt.five_tuple, {"packets": 0, "bytes": 0, "flags": 0})
            rec["packets"] += 1
            rec["bytes"] += pkt.size
            rec["flags"] |= pkt.flags

    def _egress(self, node: str, nxt: str, pkt: Packet, result: EnqueueResult) -> None:
        sw = self._pending.pop(pkt.uid, None)
        if sw is None or sw != node:
            return
        if result is not EnqueueResult.DROPPED:
            self.forwarded[node] = self.forwarded.get(node, 0) + 1
            key = (node, nxt)
            self.link_bytes[key] = self.link_bytes.get(key, 0) + pkt.size * self.N
            self.link_samples[key] = self.link_samples.get(key, 0) + 1

    def loss_estimates(self) -> dict[str, float]:
        return {
            s: 1.0 - self.forwarded.get(s, 0) / n
            for s, n in self.sampled.items() if n >= self.min_samples
        }

    def verdict(self) -> Verdict:
        blamed: dict[str, float] = {}
        loss = self.loss_estimates()
        if loss:
            med = statistics.median(loss.values())
            limit = self.factor * max(med, self.loss_floor)
            for s, est in loss.items():
                if est > limit:
                    blamed[s] = est
        if self.volume_factor is not None:
            topo = self.net.topo
            groups: dict[tuple, list[tuple[str, str]]] = {}
            for key, n in self.link_samples.items():
                if n >= self.min_samples:
                    groups.setdefault((topo.role(key[0]), topo.role(key[1])), []).append(key)
            for keys in groups.values():
                if len(keys) < 3:
                    continue
                med = statistics.median(self.link_bytes[k] for k in keys)
                for k in keys:
                    if self.link_bytes[k] > self.volume_factor * med:
                        blamed[link_id(*k)] = self.link_bytes[k] / med
        return Verdict(self.name, bool(blamed), blamed,
                       {"switches_with_support": len(loss), "sampled": sum(self.sampled.values())})


# -- mirroring -------------------------------------------------------------


class Mirror(Monitor):
    """Match-and-mirror at every switch ingress, reconciled per packet.

    A matched packet that enters a switch and is never seen again (and that
    switch is not its last hop) counts as vanished there. A matched packet
    whose first sighting is not at its source's first-hop switch was created
    by the upstream neighbor. A header change between consecutive sightings
    is charged to the earlier switch.
    """

    def __init__(self, name: str = "everflow", flags: int = SYN | RST | FIN,
                 mirror_data: bool = False, capacity: int = 200_000, min_vanished: int = 3):
        self.name = name
        self.flags = flags
        self.mirror_data = mirror_data
        self.capacity = capacity
        self.min_vanished = min_vanished
        self.sightings: dict[int, list[tuple[str, str | None, str, Packet]]] = {}
        self.mirrored = 0
        self.truncated = False

    def attach(self, net: Network) -> None:
        super().attach(net)
        net.ingress_taps.append(self._ingress)

    def _match(self, pkt: Packet) -> bool:
        if pkt.kind is not Kind.APP or pkt.proto is not Proto.TCP:
            return False
        if pkt.flags & self.flags:
            return True
        return self.mirror_data

    def _ingress(self, switch: str, pkt: Packet, prev: str | None) -> None:
        if self.truncated or not self._match(pkt):
            return
        if self.mirrored >= self.capacity:
            self.truncated = True
            return
        self.mirrored += 1
        meta = (pkt.src, pkt.dst)
        self.sightings.setdefault(pkt.uid, []).append((switch, prev, pkt.digest(), meta))

    def verdict(self) -> Verdict:
        topo = self.net.topo
        vanished: dict[str, int] = {}
        originated: dict[str, int] = {}
        modified: dict[str, int] = {}
        for seen in self.sightings.values():
            first_sw, first_prev, _, (src, dst) = seen[0]
            if first_prev is not None and not topo.nodes[first_prev].is_host:
                originated[first_prev] = originated.get(first_prev, 0) + 1
            elif first_prev is not None and first_prev != src:
                originated[first_sw] = originated.get(first_sw, 0) + 1
            for (a, _, da, _), (b, pb, db, _) in zip(seen, seen[1:]):
                if da != db and pb == a:
                    modified[a] = modified.get(a, 0) + 1
            last = seen[-1][0]
            if dst in topo.nodes and dst not in topo.adj[last]:
                vanished[last] = vanished.get(last, 0) + 1
        blamed: dict[str, float] = {}
        for s, n in originated.items():
            blamed[s] = blamed.get(s, 0) + n
        for s, n in modified.items():
            blamed[s] = blamed.get(s, 0) + n
        for s, n in vanished.items():
            if n >= self.min_vanished:
                blamed[s] = blamed.get(s, 0) + n
        detail = {"mirrored": self.mirrored, "truncated": self.truncated,
                  "vanished": vanished, "originated": originated, "modified": modified}
        return Verdict(self.name, bool(blamed), blamed, detail)


# -- active probing --------------------------------------------------------


def _tomography(probe_paths: list[tuple[list[str], bool]], min_probes: int,
                threshold: float, factor: float, min_bad: int = 1) -> dict[str, float]:
    """Per-link bad-probe fraction; blame links well above the typical link."""
    total: dict[str, int] = {}
    bad: dict[str, int] = {}
    for path, is_bad in probe_paths:
        for lk in path_links(path):
            total[lk] = total.get(lk, 0) + 1
            if is_bad:
                bad[lk] = bad.get(lk, 0) + 1
    frac = {lk: bad.get(lk, 0) / n for lk, n in total.items() if n >= min_probes}
    if not frac:
        return {}
    med = statistics.median(frac.values())
    limit = max(threshold, factor * med)
    return {lk: f for lk, f in frac.items() if f > limit and bad.get(lk, 0) >= min_bad}


class Prober(Monitor):
    """End-host probing.

    ``mode="pingmesh"``: TCP-ping between hosts under different ToRs, with a
    fresh source port per probe so probes spread over ECMP paths.
    ``mode="netbouncer"``: each host bounces probes off every core switch, so
    each probe exercises one known up-down path.
    A probe is bad when it is lost or its RTT exceeds ``timeout``.
    """

    def __init__(self, name: str = "pingmesh", mode: str = "pingmesh", period: int = 100 * MS,
                 timeout: int = 200 * MS, loss_threshold: float = 0.02,
                 min_probes: int = 30, min_bad: int = 5, link_factor: float = 3.0,
                 start: int = 0, stop: int | None = None):
        if mode not in ("pingmesh", "netbouncer"):
            raise ValueError(f"unknown probing mode {mode!r}")
        self.name = name
        self.mode = mode
        self.period = period
        self.timeout = timeout
        self.loss_threshold = loss_threshold
        self.min_probes = min_probes
        self.min_bad = min_bad
        self.link_factor = link_factor
        self.start = start
        self.stop = stop
        self.sent: dict[int, tuple[int, list[str]]] = {}
        self.rtt: dict[int, int] = {}
        self._next_id = 0

    def attach(self, net: Network) -> None:
        super().attach(net)
        self.rng = net.rng[f"monitor/{self.name}"]
        topo = net.topo
        self.tors = topo.of_role(Role.TOR) or topo.switches
        self.cores = topo.of_role(Role.CORE)
        kind = Kind.PING if self.mode == "pingmesh" else Kind.BOUNCE
        for h in net.hosts.values():
            h.handlers[kind] = self._on_host
        if self.mode == "netbouncer":
            for c in self.cores:
                net.switches[c].local_handlers.append(self._bounce_at(c))
        net.sim.at(self.start, self._round, None, None, EventKind.PROBE_LAUNCH)

    def _pairs(self) -> list[tuple[str, str]]:
        topo = self.net.topo
        hosts_by_tor: dict[str, list[str]] = {}
        for h in topo.hosts:
            hosts_by_tor.setdefault(topo.tor_of(h), []).append(h)
        tors = sorted(hosts_by_tor)
        if self.mode == "netbouncer":
            return [(h, c) for t in tors for h in hosts_by_tor[t] for c in self.cores]
        pairs = []
        for a in tors:
            for b in tors:
                if a != b:
                    pairs.append((self.rng.choice(hosts_by_tor[a]), self.rng.choice(hosts_by_tor[b])))
        return pairs

    def _round(self, _=None) -> None:
        net = self.net
        now = net.sim.now
        if self.stop is not None and now >= self.stop:
            return
        kind = Kind.PING if self.mode == "pingmesh" else Kind.BOUNCE
        for src, dst in self._pairs():
            pid = self._next_id
            self._next_id += 1
            sport = self.rng.uniform_int(1024, 65535)
            pkt = Packet(src, dst, sport, 7, Proto.TCP, kind=kind, shadow=True,
                         meta={"id": pid, "reply": False})
            if self.mode == "netbouncer":
                path = net.router.path(pkt.five_tuple, src, dst)
                back = net.router.path((dst, src, 7, sport, int(Proto.TCP)), dst, src)
                path = path + back[1:]
            else:
                path = net.router.path(pkt.five_tuple, src, dst)
            self.sent[pid] = (now, path)
            net.host_send(src, pkt)
        net.sim.after(self.period, self._round, None, None, EventKind.PROBE_LAUNCH)

    def _bounce_at(self, core: str):
        def handler(pkt: Packet) -> bool:
            if pkt.kind is not Kind.BOUNCE:
                return False
            back = Packet(core, pkt.src, 7, pkt.sport, Proto.TCP, kind=Kind.BOUNCE,
                          shadow=True, meta={"id": pkt.meta["id"], "reply": True})
            self.net.switches[core].originate(back)
            return True
        return handler

    def _on_host(self, host: Host, pkt: Packet) -> None:
        meta = pkt.meta
        if meta["reply"]:
            sent = self.sent.get(meta["id"])
            if sent is not None and meta["id"] not in self.rtt:
                self.rtt[meta["id"]] = host.sim.now - sent[0]
            return
        echo = Packet(host.name, pkt.src, pkt.dport, pkt.sport, Proto.TCP, kind=pkt.kind,
                      shadow=True, meta={"id": meta["id"], "reply": True})
        host.transmit(echo)

    def probe_outcomes(self) -> list[tuple[list[str], bool]]:
        horizon = self.net.sim.now - self.timeout
        out = []
        for pid, (t, path) in self.sent.items():
            if t > horizon or not path:
                continue
            r = self.rtt.get(pid)
            out.append((path, r is None or r > self.timeout))
        return out

    def verdict(self) -> Verdict:
        outcomes = self.probe_outcomes()
        n_bad = sum(1 for _, b in outcomes if b)
        detail = {"probes": len(outcomes), "bad": n_bad}
        if not n_bad:
            return Verdict(self.name, False, {}, detail)
        blamed = _tomography(outcomes, self.min_probes, self.loss_threshold, self.link_factor,
                              self.min_bad)
        return Verdict(self.name, bool(blamed), blamed, detail)


# -- traceroute tomography ---------------------------------------------------


class Tomography007(Monitor):
    """Traceroute every flow that retransmits; vote on the links it reports.

    A link's score is its votes divided by the number of monitored flows
    whose ECMP path crosses it. Links with the top score are blamed when
    that score reaches ``threshold`` with at least ``min_votes`` votes.
    """

    def __init__(self, name: str = "007", max_ttl: int = 8, threshold: float = 0.3,
                 min_votes: int = 3):
        self.name = name
        self.max_ttl = max_ttl
        self.threshold = threshold
        self.min_votes = min_votes
        self.traced: dict[int, FlowRecord] = {}
        self.replies: dict[int, dict[int, str]] = {}
        self.discarded = 0

    def attach(self, net: Network) -> None:
        super().attach(net)
        net.on_flow_start.append(self._watch)
        for h in net.hosts.values():
            h.handlers[Kind.ICMP_REPLY] = self._on_reply
            h.handlers[Kind.TRACEROUTE] = self._on_arrival

    def _watch(self, rec: FlowRecord, snd: TcpSender) -> None:
        snd.on_retransmit = self._on_retransmit

    def _on_retransmit(self, snd: TcpSender, pkt: Packet) -> None:
        rec = snd.rec
        if rec.flow_id in self.traced:
            return
        self.traced[rec.flow_id] = rec
        self.replies[rec.flow_id] = {}
        host = snd.host
        for ttl in range(1, self.max_ttl + 1):
            probe = Packet(rec.src, rec.dst, rec.sport, rec.dport, Proto.TCP, ttl=ttl,
                           kind=Kind.TRACEROUTE, shadow=True,
                           meta={"tid": rec.flow_id, "ttl0": ttl})
            host.transmit(probe)

    def _on_arrival(self, host: Host, pkt: Packet) -> None:
        reply = Packet(host.name, pkt.src, pkt.dport, pkt.sport, Proto.ICMP,
                       kind=Kind.ICMP_REPLY, shadow=True,
                       meta={"hop": host.name, "probe": pkt.meta})
        host.transmit(reply)

    def _on_reply(self, host: Host, pkt: Packet) -> None:
        probe = (pkt.meta or {}).get("probe") or {}
        tid = probe.get("tid")
        if tid in self.replies:
            self.replies[tid].setdefault(probe["ttl0"], pkt.meta["hop"])

    def reported_paths(self) -> dict[int, list[str]]:
        topo = self.net.topo
        paths = {}
        self.discarded = 0
        for tid, hops in self.replies.items():
            rec = self.traced[tid]
            path = [rec.src]
            ok = False
            for ttl in range(1, self.max_ttl + 1):
                hop = hops.get(ttl)
                if hop is None:
                    break
                path.append(hop)
                if hop == rec.dst:
                    ok = True
                    break
            contiguous = all(b in topo.adj.get(a, ()) for a, b in zip(path, path[1:]))
            if ok and contiguous:
                paths[tid] = path
            else:
                self.discarded += 1
        return paths

    def scores(self) -> dict[str, tuple[float, int]]:
        net = self.net
        traversals: dict[str, int] = {}
        for rec in net.flows:
            if rec.sport == 0:
                continue
            for lk in path_links(net.router.path(rec.five_tuple)):
                traversals[lk] = traversals.get(lk, 0) + 1
        votes: dict[str, int] = {}
        for path in self.reported_paths().values():
            for lk in path_links(path):
                votes[lk] = votes.get(lk, 0) + 1
        return {lk: (v / max(traversals.get(lk, 0), v), v) for lk, v in votes.items()}

    def verdict(self) -> Verdict:
        sc = self.scores()
        eligible = {lk: s for lk, (s, v) in sc.items() if v >= self.min_votes}
        blamed = {}
        if eligible:
            top = max(eligible.values())
            if top >= self.threshold:
                blamed = {lk: s for lk, s in eligible.items() if s >= top - 1e-12}
        detail = {"traceroutes": len(self.replies), "discarded": self.discarded}
        return Verdict(self.name, bool(blamed), blamed, detail)


# -- path statistics ---------------------------------------------------------


def _quartiles(xs: list[float]) -> tuple[float, float, float]:
    if len(xs) < 2:
        return (xs[0], xs[0], xs[0])
    q = statistics.quantiles(xs, n=4, method="inclusive")
    return q[0], q[1], q[2]


class PathStats(Monitor):
    """Compare live-traffic TCP statistics across path tags.

    Flows are grouped by the path tag their data packets carried on arrival
    (flows without a tag are skipped). For each tier of tags, a tag whose
    retransmission rate or mean slowdown sits above median + ``iqr_factor``
    x IQR (and above the absolute floors) is blamed.
    """

    def __init__(self, name: str = "fbmon", iqr_factor: float = 3.0, min_flows: int = 3,
                 retrans_floor: float = 0.02, slowdown_floor: float = 2.0,
                 link_bps: float | None = None):
        self.name = name
        self.iqr_factor = iqr_factor
        self.min_flows = min_flows
        self.retrans_floor = retrans_floor
        self.slowdown_floor = slowdown_floor
        self.link_bps = link_bps

    def _slowdown(self, rec: FlowRecord) -> float | None:
        if rec.fct is None or not rec.rtt_samples:
            return None
        bps = self.link_bps
        if bps is None:
            spec = self.net.topo.links[(rec.src, self.net.topo.tor_of(rec.src))]
            bps = spec.bandwidth_bps
        base = min(rec.rtt_samples)
        ideal = base + rec.size * 8 * 1e9 / bps
        return rec.fct / ideal

    def per_tag(self) -> dict[str, dict[str, float]]:
        groups: dict[str, list[FlowRecord]] = {}
        for rec in self.net.flows:
            if rec.fwd_tag is None:
                continue
            groups.setdefault(rec.fwd_tag, []).append(rec)
        out = {}
        for tag, recs in groups.items():
            if len(recs) < self.min_flows:
                continue
            sent = sum(r.segments_sent for r in recs)
            rtx = sum(r.retransmissions for r in recs)
            slows = [s for s in (self._slowdown(r) for r in recs) if s is not None]
            out[tag] = {
                "flows": len(recs),
                "retrans_rate": rtx / sent if sent else 0.0,
                "slowdown": statistics.fmean(slows) if slows else 1.0,
                "disconnects": sum(1 for r in recs if r.status is FlowStatus.DISCONNECTED),
            }
        return out

    def verdict(self) -> Verdict:
        stats = self.per_tag()
        topo = self.net.topo
        tiers: dict[Role, list[str]] = {}
        for tag in stats:
            role = topo.role(tag) if tag in topo.nodes else Role.SWITCH
            tiers.setdefault(role, []).append(tag)
        blamed: dict[str, float] = {}
        for tags in tiers.values():
            if len(tags) < 3:
                continue
            for metric, floor in (("retrans_rate", self.retrans_floor),
                                  ("slowdown", self.slowdown_floor)):
                vals = [stats[t][metric] for t in tags]
                q1, med, q3 = _quartiles(vals)
                limit = max(med + self.iqr_factor * (q3 - q1), floor)
                for t in tags:
                    if stats[t][metric] > limit:
                        blamed[t] = max(blamed.get(t, 0.0), stats[t][metric])
        return Verdict(self.name, bool(blamed), blamed, {"tags": len(stats)})


# -- factory and output ------------------------------------------------------

MONITOR_KINDS = ("sflow", "netflow", "007", "netbouncer", "pingmesh", "fbmon", "everflow")


def build_monitor(kind: str, params: dict | None = None) -> Monitor:
    p = dict(params or {})
    if kind == "sflow":
        return Sampler("sflow", method="random", **p)
    if kind == "netflow":
        return Sampler("netflow", method="systematic", **p)
    if kind == "everflow":
        return Mirror("everflow", **p)
    if kind == "pingmesh":
        return Prober("pingmesh", mode="pingmesh", **p)
    if kind == "netbouncer":
        return Prober("netbouncer", mode="netbouncer", **p)
    if kind == "007":
        return Tomography007("007", **p)
    if kind == "fbmon":
        return PathStats("fbmon", **p)
    raise ValueError(f"unknown monitor kind {kind!r}")


VERDICT_CSV_COLUMNS = ["scenario", "monitor", "alarm", "blamed", "verdict"]


def verdicts_to_csv(rows: list[tuple[str, Verdict, VerdictClass]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(VERDICT_CSV_COLUMNS)
    for scenario, v, cls in rows:
        w.writerow([scenario, v.monitor, int(v.alarm), ";".join(sorted(v.blamed)), cls.value])
    return buf.getvalue()
