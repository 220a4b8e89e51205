"""Runtime wiring: hosts, switches running pipeline programs, ports and monitor taps."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Protocol

from .packet import ACK, RST, SYN, Kind, Packet, Proto
from .simcore import EventKind, RngStreams, Simulator, TraceAction, Tracer
from .topology import EcmpRouter, EnqueueResult, Port, Role, Topology
from .transport import FlowRecord, FlowStatus, Listener, TcpConfig, TcpReceiver, TcpSender

APP_PORT = 80


class Action(enum.Enum):
    FORWARD = "forward"
    DROP = "drop"
    CONSUME = "consume"  # absorbed by the program (it may have emitted replacements)


@dataclass
class SwitchContext:
    switch: Switch
    prev: str | None
    egress: str | None
    net: Network

    @property
    def now(self) -> int:
        return self.net.sim.now


class Program(Protocol):
    name: str

    def process(self, pkt: Packet, ctx: SwitchContext) -> Action: ...


class Switch:
    def __init__(self, net: Network, name: str, role: Role):
        self.net = net
        self.name = name
        self.role = role
        self.programs: list[Program] = []
        self.transited = 0
        self.forwarded = 0
        self.dropped = 0
        self.ctx = SwitchContext(self, None, None, net)
        self.local_handlers: list[Callable[[Packet], bool]] = []

    def install(self, program: Program) -> None:
        self.programs.append(program)

    def _stamp(self, pkt: Packet, prev: str | None, egress: str | None) -> None:
        # The highest switch on the path records its identity.
        role = self.role
        if role is Role.CORE:
            pkt.core_id = self.name
        elif role is Role.AGG and egress is not None and prev is not None:
            topo = self.net.topo
            if topo.role(prev) is Role.TOR and topo.role(egress) is Role.TOR:
                pkt.core_id = self.name
        elif role is Role.TOR and egress is not None and prev is not None:
            topo = self.net.topo
            if topo.role(prev) is Role.HOST and topo.role(egress) is Role.HOST:
                pkt.core_id = self.name

    def receive(self, pkt: Packet, prev: str | None) -> None:
        net = self.net
        if pkt.dst == self.name:
            for h in self.local_handlers:
                if h(pkt):
                    return
            return
        self.transited += 1
        for tap in net.ingress_taps:
            tap(self.name, pkt, prev)
        egress = net.router.next_hop(self.name, pkt.five_tuple, pkt.dst)
        self._stamp(pkt, prev, egress)
        if self.programs:
            ctx = self.ctx
            ctx.prev = prev
            ctx.egress = egress
            for prog in self.programs:
                act = prog.process(pkt, ctx)
                if act is Action.DROP:
                    self.dropped += 1
                    return
                if act is Action.CONSUME:
                    return
            egress = ctx.egress
        pkt.ttl -= 1
        if pkt.ttl <= 0:
            net.time_exceeded(self.name, pkt)
            return
        if egress is None:
            self.dropped += 1
            net.tracer.emit(self.name, TraceAction.DROP, pkt.digest(), "no-route")
            return
        self.forwarded += 1
        net.forward(self.name, egress, pkt)

    def originate(self, pkt: Packet, cause: str = "") -> None:
        """Send a switch-generated packet (ICMP replies, forged segments)."""
        egress = self.net.router.next_hop(self.name, pkt.five_tuple, pkt.dst)
        if egress is None:
            return
        if cause:
            self.net.tracer.emit(self.name, TraceAction.CLONE, pkt.digest(), cause)
        self.net.forward(self.name, egress, pkt)


class Host:
    def __init__(self, net: Network, name: str, cfg: TcpConfig):
        self.net = net
        self.sim = net.sim
        self.name = name
        self.cfg = cfg
        self.conns: dict[tuple, TcpSender | TcpReceiver] = {}
        self.listeners: dict[int, Listener] = {}
        self.handlers: dict[Kind, Callable[[Host, Packet], None]] = {}
        self._next_port = 10000
        self.rst_sent = 0

    def ephemeral_port(self) -> int:
        p = self._next_port
        self._next_port = 10000 + (self._next_port - 9999) % 50000
        return p

    def listen(self, port: int = APP_PORT, **kw) -> Listener:
        lst = Listener(self, port, self.cfg, **kw)
        self.listeners[port] = lst
        return lst

    def transmit(self, pkt: Packet) -> None:
        self.net.host_send(self.name, pkt)

    def forget(self, ep: TcpSender) -> None:
        rec = ep.rec
        self.conns.pop((rec.sport, rec.dst, rec.dport), None)

    def connect(self, rec: FlowRecord, cfg: TcpConfig | None = None) -> TcpSender:
        rec.sport = self.ephemeral_port()
        snd = TcpSender(self, rec, cfg or self.cfg)
        self.conns[(rec.sport, rec.dst, rec.dport)] = snd
        snd.connect()
        return snd

    def receive(self, pkt: Packet) -> None:
        if pkt.kind is not Kind.APP:
            h = self.handlers.get(pkt.kind)
            if h is not None:
                h(self, pkt)
            return
        if pkt.proto is not Proto.TCP:
            return
        key = (pkt.dport, pkt.src, pkt.sport)
        ep = self.conns.get(key)
        if ep is not None:
            ep.receive(pkt)
            return
        flags = pkt.flags
        lst = self.listeners.get(pkt.dport)
        if lst is not None:
            if flags & SYN and not flags & ACK:
                lst.on_syn(pkt)
                return
            if flags & ACK and not flags & (SYN | RST) and lst.on_stray_ack(pkt):
                return
        if not flags & RST and not flags & SYN:
            self.rst_sent += 1
            self.transmit(Packet(self.name, pkt.src, pkt.dport, pkt.sport, Proto.TCP,
                                 seq=pkt.ack, ack=0, flags=RST))


@dataclass
class FlowSpec:
    src: str
    dst: str
    size: int
    start: int
    dport: int = APP_PORT


@dataclass
class Notes:
    counts: dict = field(default_factory=dict)

    def add(self, node: str, what: str) -> None:
        k = (node, what)
        self.counts[k] = self.counts.get(k, 0) + 1


class Network:
    """Everything one simulation run needs: clock, topology, ports, endpoints."""

    def __init__(self, topo: Topology, *, seed: int = 1, ecmp_salt: int | None = None,
                 tcp: TcpConfig | None = None, trace: bool = False):
        self.sim = Simulator()
        self.topo = topo
        self.seed = seed
        self.rng = RngStreams(seed)
        salt = seed if ecmp_salt is None else ecmp_salt
        self.router = EcmpRouter(topo, salt)
        self.tracer = Tracer(self.sim, trace)
        self.tcp = tcp or TcpConfig()
        self.notes = Notes()
        self.ingress_taps: list[Callable[[str, Packet, str | None], None]] = []
        self.egress_taps: list[Callable[[str, str, Packet, EnqueueResult], None]] = []
        self.host_taps: list[Callable[[str, Packet], None]] = []
        self.ports: dict[tuple[str, str], Port] = {}
        for (a, b), spec in topo.links.items():
            self.ports[(a, b)] = Port(self.sim, a, b, spec, self._deliver)
        self.hosts: dict[str, Host] = {h: Host(self, h, self.tcp) for h in topo.hosts}
        self.switches: dict[str, Switch] = {
            s: Switch(self, s, topo.role(s)) for s in topo.switches
        }
        self.flows: list[FlowRecord] = []
        self._flow_index: dict[tuple, FlowRecord] = {}
        self.senders: dict[int, TcpSender] = {}
        self.on_flow_start: list[Callable[[FlowRecord, TcpSender], None]] = []

    # -- packet movement -------------------------------------------------

    def _deliver(self, dst: str, src: str, pkt: Packet) -> None:
        sw = self.switches.get(dst)
        if sw is not None:
            sw.receive(pkt, src)
            return
        host = self.hosts[dst]
        if pkt.dst != dst:
            return
        for tap in self.host_taps:
            tap(dst, pkt)
        host.receive(pkt)

    def host_send(self, host: str, pkt: Packet) -> None:
        pkt.sent_at = self.sim.now
        for tap in self.host_taps:
            tap(host, pkt)
        self.forward(host, self.topo.tor_of(host), pkt)

    def forward(self, node: str, nxt: str, pkt: Packet) -> None:
        port = self.ports[(node, nxt)]
        if pkt.shadow:
            ok = port.shadow(pkt)
            result = EnqueueResult.ACCEPTED if ok else EnqueueResult.DROPPED
        else:
            result = port.enqueue(pkt)
        tracer = self.tracer
        if result is EnqueueResult.DROPPED:
            tracer.emit(node, TraceAction.DROP, pkt.digest(), "queue-full")
        elif tracer.enabled:
            tracer.emit(node, TraceAction.FORWARD, pkt.digest())
            if result is EnqueueResult.ACCEPTED_WITH_CE:
                tracer.emit(node, TraceAction.MARK, pkt.digest(), "ecn-threshold")
        for tap in self.egress_taps:
            tap(node, nxt, pkt, result)

    def time_exceeded(self, node: str, pkt: Packet) -> None:
        self.tracer.emit(node, TraceAction.DROP, pkt.digest(), "ttl-expired")
        if pkt.kind is not Kind.TRACEROUTE:
            return
        self.switches[node].originate(self.icmp_reply(node, pkt, node))

    def icmp_reply(self, origin: str, probe: Packet, claimed: str) -> Packet:
        """Time-exceeded reply sent from ``origin`` claiming to be ``claimed``."""
        reply = Packet(origin, probe.src, probe.dport, probe.sport, Proto.ICMP,
                       kind=Kind.ICMP_REPLY, shadow=True,
                       meta={"hop": claimed, "probe": probe.meta})
        return reply

    def note(self, node: str, what: str, pkt: Packet | None = None) -> None:
        self.notes.add(node, what)

    # -- workload --------------------------------------------------------

    def listen_all(self, **kw) -> None:
        for h in self.hosts.values():
            if APP_PORT not in h.listeners:
                h.listen(APP_PORT, **kw)

    def add_flow(self, spec: FlowSpec, cfg: TcpConfig | None = None) -> FlowRecord:
        rec = FlowRecord(len(self.flows), spec.src, spec.dst, spec.size, spec.start,
                         dport=spec.dport)
        self.flows.append(rec)
        dst = self.hosts[spec.dst]
        if spec.dport not in dst.listeners:
            dst.listen(spec.dport)

        def start(_):
            snd = self.hosts[spec.src].connect(rec, cfg)
            self._flow_index[rec.five_tuple] = rec
            self.senders[rec.flow_id] = snd
            for cb in self.on_flow_start:
                cb(rec, snd)

        self.sim.at(spec.start, start, None, spec.src, EventKind.APP_SEND)
        return rec

    def flow_for(self, pkt: Packet) -> FlowRecord | None:
        """Record of the flow a server-side packet belongs to (by client five-tuple)."""
        return self._flow_index.get((pkt.src, pkt.dst, pkt.sport, pkt.dport, int(pkt.proto)))

    def run(self, horizon: int) -> None:
        self.sim.run_until(horizon)
        for rec in self.flows:
            if rec.status is FlowStatus.PENDING:
                rec.finish(FlowStatus.OPEN, self.sim.now)
                rec.tags["elapsed_lower_bound"] = self.sim.now - rec.start

    def install(self, switch: str, program: Program) -> None:
        self.switches[switch].install(program)

    def total_transited(self) -> int:
        return sum(s.transited for s in self.switches.values())
