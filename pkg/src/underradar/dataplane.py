"""Compromised-switch programs: line-rate primitives and the attacks built from them.

Every program sees each transiting packet once, does a bounded amount of
work (a predicate, a couple of register or bloom operations, field
rewrites, at most one clone) and returns FORWARD, DROP or CONSUME.
"""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field
from typing import Any

from .network import Action, Network, SwitchContext
from .packet import ACK, FIN, RST, SYN, Ecn, Kind, Packet, Proto
from .simcore import SEC, EventKind, RngStream, TraceAction
from .topology import Role, Topology


def _hashes(key: bytes, h: int, m: int) -> list[int]:
    # Kirsch-Mitzenmacher double hashing from one 128-bit digest
    d = hashlib.blake2b(key, digest_size=16).digest()
    a = int.from_bytes(d[:8], "big")
    b = int.from_bytes(d[8:], "big") | 1
    return [(a + i * b) % m for i in range(h)]


class BloomFilter:
    def __init__(self, m_bits: int = 8192, h: int = 4):
        if m_bits <= 0 or h <= 0:
            raise ValueError("bloom filter needs positive size and hash count")
        self.m_bits = m_bits
        self.h = h
        self.bits = bytearray((m_bits + 7) // 8)
        self.count = 0

    @staticmethod
    def _key(item: Any) -> bytes:
        return item if isinstance(item, bytes) else repr(item).encode()

    def add(self, item: Any) -> None:
        for i in _hashes(self._key(item), self.h, self.m_bits):
            self.bits[i >> 3] |= 1 << (i & 7)
        self.count += 1

    def __contains__(self, item: Any) -> bool:
        bits = self.bits
        return all(bits[i >> 3] >> (i & 7) & 1 for i in _hashes(self._key(item), self.h, self.m_bits))

    def expected_fp_rate(self, n: int | None = None) -> float:
        n = self.count if n is None else n
        return (1.0 - math.exp(-self.h * n / self.m_bits)) ** self.h


class RegisterArray:
    """Fixed-size per-flow state; a colliding flow overwrites the slot."""

    def __init__(self, size: int = 4096):
        self.size = size
        self.keys: list[Any] = [None] * size
        self.values: list[Any] = [None] * size
        self.evictions = 0

    def index(self, key: Any) -> int:
        d = hashlib.blake2b(repr(key).encode(), digest_size=8).digest()
        return int.from_bytes(d, "big") % self.size

    def get(self, key: Any, default: Any = None) -> Any:
        i = self.index(key)
        return self.values[i] if self.keys[i] == key else default

    def set(self, key: Any, value: Any) -> None:
        i = self.index(key)
        if self.keys[i] is not None and self.keys[i] != key:
            self.evictions += 1
        self.keys[i] = key
        self.values[i] = value

    def __contains__(self, key: Any) -> bool:
        return self.keys[self.index(key)] == key


@dataclass
class TamperBudget:
    """Caps tampering at a fraction ``fraction`` of packets seen in the window.

    ``fraction=None`` means unlimited. ``window`` counts packets; ``None``
    accounts over the whole run.
    """

    fraction: float | None = None
    window: int | None = None
    observed: int = 0
    consumed: int = 0
    refused: int = 0
    total_consumed: int = 0

    def observe(self) -> None:
        if self.window is not None and self.observed >= self.window:
            self.observed = 0
            self.consumed = 0
        self.observed += 1

    def allow(self) -> bool:
        if self.fraction is None:
            return True
        if self.consumed + 1 <= self.fraction * self.observed:
            return True
        self.refused += 1
        return False

    def consume(self) -> None:
        self.consumed += 1
        self.total_consumed += 1


class AttackKind(enum.Enum):
    SYN_DROP = "syn_drop"
    SAME_SEQ_DROP = "same_seq_drop"
    SYN_FLOOD = "syn_flood"
    RST_TINKER = "rst_tinker"
    ACK_AND_DROP = "ack_and_drop"
    ECN_TINKER = "ecn_tinker"
    CWND_TINKER = "cwnd_tinker"
    INCAST = "incast"
    CORE_ID_REWRITE = "core_id_rewrite"
    TRACEROUTE_SPOOF = "traceroute_spoof"


@dataclass(frozen=True)
class TargetSelector:
    """Matches the forward direction of target flows; ``None`` fields are wildcards."""

    src: str | None = None
    dst: str | None = None
    sport: int | None = None
    dport: int | None = None
    dst_pod: int | None = None
    src_pod: int | None = None

    def matches(self, pkt: Packet, topo: Topology | None = None) -> bool:
        if self.src is not None and pkt.src != self.src:
            return False
        if self.dst is not None and pkt.dst != self.dst:
            return False
        if self.sport is not None and pkt.sport != self.sport:
            return False
        if self.dport is not None and pkt.dport != self.dport:
            return False
        if self.dst_pod is not None and (topo is None or topo.pod(pkt.dst) != self.dst_pod):
            return False
        if self.src_pod is not None and (topo is None or topo.pod(pkt.src) != self.src_pod):
            return False
        return True

    def matches_reverse(self, pkt: Packet, topo: Topology | None = None) -> bool:
        """True when ``pkt`` travels from a target flow's receiver back to its sender."""
        if self.src is not None and pkt.dst != self.src:
            return False
        if self.dst is not None and pkt.src != self.dst:
            return False
        if self.sport is not None and pkt.dport != self.sport:
            return False
        if self.dport is not None and pkt.sport != self.dport:
            return False
        if self.dst_pod is not None and (topo is None or topo.pod(pkt.src) != self.dst_pod):
            return False
        if self.src_pod is not None and (topo is None or topo.pod(pkt.dst) != self.src_pod):
            return False
        return True

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


@dataclass
class AttackConfig:
    kind: AttackKind
    target: TargetSelector = field(default_factory=TargetSelector)
    params: dict = field(default_factory=dict)
    budget: float | None = None
    budget_window: int | None = None


# Control segments are what mirroring monitors watch; header-rewriting
# attacks leave them alone.
CONTROL = SYN | RST | FIN


def _is_app_tcp(pkt: Packet) -> bool:
    return pkt.kind is Kind.APP and pkt.proto is Proto.TCP


def flow_key(pkt: Packet) -> tuple:
    return (pkt.src, pkt.dst, pkt.sport, pkt.dport)


def reverse_key(pkt: Packet) -> tuple:
    return (pkt.dst, pkt.src, pkt.dport, pkt.sport)


class AttackProgram:
    """Shared plumbing: target matching, registers, bloom, budget and accounting."""

    kind: AttackKind
    budgeted = False

    def __init__(self, cfg: AttackConfig, rng: RngStream, *, registers: int = 4096,
                 bloom_bits: int = 8192, bloom_hashes: int = 4):
        self.cfg = cfg
        self.name = cfg.kind.value
        self.target = cfg.target
        self.params = dict(cfg.params)
        self.rng = rng
        self.registers = RegisterArray(self.params.pop("registers", registers))
        self.bloom = BloomFilter(bloom_bits, bloom_hashes)
        self.budget = TamperBudget(cfg.budget, cfg.budget_window)
        self.actions: dict[str, int] = {}
        self.net: Network | None = None
        self.switch: str | None = None

    def attach(self, net: Network, switch: str) -> None:
        self.net = net
        self.switch = switch

    def _tamper(self, ctx: SwitchContext, pkt: Packet, action: TraceAction) -> None:
        self.budget.consume()
        self.actions[action.value] = self.actions.get(action.value, 0) + 1
        ctx.net.tracer.emit(ctx.switch.name, action, pkt.digest(), "attack:" + self.name)

    def _permitted(self) -> bool:
        return not self.budgeted or self.budget.allow()

    def process(self, pkt: Packet, ctx: SwitchContext) -> Action:
        self.budget.observe()
        return self.handle(pkt, ctx)

    def handle(self, pkt: Packet, ctx: SwitchContext) -> Action:
        return Action.FORWARD

    @property
    def tamper_count(self) -> int:
        return sum(self.actions.values())


class SynDrop(AttackProgram):
    """Drop the SYNs of target flows. ``drops`` caps drops per flow (None: forever)."""

    kind = AttackKind.SYN_DROP
    budgeted = True

    def handle(self, pkt: Packet, ctx: SwitchContext) -> Action:
        if not (pkt.flags & SYN) or pkt.flags & ACK or not _is_app_tcp(pkt):
            return Action.FORWARD
        key = flow_key(pkt)
        if key not in self.bloom:
            if not self.target.matches(pkt, ctx.net.topo):
                return Action.FORWARD
            self.bloom.add(key)
        limit = self.params.get("drops")
        done = self.registers.get(key, 0)
        if limit is not None and done >= limit:
            return Action.FORWARD
        if not self._permitted():
            return Action.FORWARD
        self.registers.set(key, done + 1)
        self._tamper(ctx, pkt, TraceAction.DROP)
        return Action.DROP


class SameSeqDrop(AttackProgram):
    """Remember the sequence number of a target flow's ``nth`` data segment and
    drop that segment and every retransmission of it (up to ``drops``)."""

    kind = AttackKind.SAME_SEQ_DROP
    budgeted = True

    def handle(self, pkt: Packet, ctx: SwitchContext) -> Action:
        if pkt.payload_len == 0 or not _is_app_tcp(pkt):
            return Action.FORWARD
        key = flow_key(pkt)
        state = self.registers.get(key)
        if state is None:
            if not self.target.matches(pkt, ctx.net.topo):
                return Action.FORWARD
            state = [0, None, 0]  # data segments seen, stored seq, drops
            self.registers.set(key, state)
        if state[1] is None:
            state[0] += 1
            if state[0] < self.params.get("nth", 1):
                return Action.FORWARD
            state[1] = pkt.seq
        if pkt.seq != state[1]:
            return Action.FORWARD
        limit = self.params.get("drops")
        if limit is not None and state[2] >= limit:
            return Action.FORWARD
        if not self._permitted():
            return Action.FORWARD
        state[2] += 1
        self._tamper(ctx, pkt, TraceAction.DROP)
        return Action.DROP


class RstTinker(AttackProgram):
    """Set RST on one data segment of each target flow (the ``nth``, default 5)."""

    kind = AttackKind.RST_TINKER
    budgeted = True

    def handle(self, pkt: Packet, ctx: SwitchContext) -> Action:
        if pkt.payload_len == 0 or not _is_app_tcp(pkt):
            return Action.FORWARD
        key = flow_key(pkt)
        seen = self.registers.get(key)
        if seen is None:
            if not self.target.matches(pkt, ctx.net.topo):
                return Action.FORWARD
            seen = 0
        if seen < 0:
            return Action.FORWARD  # already fired
        seen += 1
        if seen >= self.params.get("nth", 5) and self._permitted():
            pkt.flags |= RST
            self.registers.set(key, -1)
            self._tamper(ctx, pkt, TraceAction.MODIFY)
        else:
            self.registers.set(key, seen)
        return Action.FORWARD


class AckAndDrop(AttackProgram):
    """Drop the ``nth`` data segment of a target flow and forge its ACK to the sender."""

    kind = AttackKind.ACK_AND_DROP
    budgeted = True

    def handle(self, pkt: Packet, ctx: SwitchContext) -> Action:
        if not _is_app_tcp(pkt):
            return Action.FORWARD
        topo = ctx.net.topo
        if pkt.payload_len == 0:
            # remember the receiver's latest ACK fields for a plausible forgery
            if pkt.flags & ACK and self.target.matches_reverse(pkt, topo):
                self.registers.set(("rev",) + reverse_key(pkt), (pkt.seq, pkt.rwnd))
            return Action.FORWARD
        if pkt.flags & CONTROL:
            return Action.FORWARD
        key = flow_key(pkt)
        seen = self.registers.get(key)
        if seen is None:
            if not self.target.matches(pkt, topo):
                return Action.FORWARD
            seen = 0
        if seen < 0:
            return Action.FORWARD
        seen += 1
        if seen < self.params.get("nth", 10) or not self._permitted():
            self.registers.set(key, seen)
            return Action.FORWARD
        self.registers.set(key, -1)
        rseq, rwnd = self.registers.get(("rev",) + key, (pkt.ack, pkt.rwnd))
        forged = Packet(pkt.dst, pkt.src, pkt.dport, pkt.sport, Proto.TCP,
                        seq=rseq, ack=pkt.seq + pkt.payload_len, flags=ACK, rwnd=rwnd)
        self._tamper(ctx, pkt, TraceAction.DROP)
        self.actions[TraceAction.CLONE.value] = self.actions.get(TraceAction.CLONE.value, 0) + 1
        ctx.switch.originate(forged, "attack:" + self.name)
        return Action.DROP


class EcnTinker(AttackProgram):
    """CE-mark each ECN-capable data segment of target flows with probability ``f``."""

    kind = AttackKind.ECN_TINKER
    budgeted = True

    def handle(self, pkt: Packet, ctx: SwitchContext) -> Action:
        if pkt.payload_len == 0 or pkt.ecn is Ecn.NOT_ECT or not _is_app_tcp(pkt):
            return Action.FORWARD
        if pkt.flags & CONTROL:
            return Action.FORWARD
        if not self.target.matches(pkt, ctx.net.topo):
            return Action.FORWARD
        u = self.rng.uniform01()  # one draw per segment keeps f-sweeps coupled
        if u < self.params.get("f", 0.0) and pkt.ecn is not Ecn.CE and self._permitted():
            pkt.ecn = Ecn.CE
            self._tamper(ctx, pkt, TraceAction.MODIFY)
        return Action.FORWARD


class CwndTinker(AttackProgram):
    """Rewrite the advertised window of target flows' ACKs to ``W``."""

    kind = AttackKind.CWND_TINKER
    budgeted = True

    def handle(self, pkt: Packet, ctx: SwitchContext) -> Action:
        if not pkt.flags & ACK or pkt.flags & CONTROL or not _is_app_tcp(pkt):
            return Action.FORWARD
        if not self.target.matches_reverse(pkt, ctx.net.topo):
            return Action.FORWARD
        w = self.params.get("W", 1)
        if pkt.rwnd != w and self._permitted():
            pkt.rwnd = w
            pkt.valid = True  # checksum fixed up along with the field
            self._tamper(ctx, pkt, TraceAction.MODIFY)
        return Action.FORWARD


class SynFlood(AttackProgram):
    """Emit spoofed SYNs toward a victim and, optionally, answer its SYN-ACKs.

    Installed at the victim's ToR so the victim's SYN-ACKs pass through it.
    Answering them with ack = seq + 1 completes handshakes even when the
    victim uses SYN cookies.
    """

    kind = AttackKind.SYN_FLOOD

    def attach(self, net: Network, switch: str) -> None:
        super().attach(net, switch)
        self.victim = self.params.get("victim") or self.target.dst
        if self.victim is None:
            raise ValueError("syn flood needs a victim host")
        hosts = [h for h in net.topo.hosts if h != self.victim]
        self.spoof_pool = hosts or ["spoofed"]
        self.rate = float(self.params.get("rate", 2000.0))
        self.start = int(self.params.get("start", 0))
        self.stop = self.params.get("stop")
        self.cookie_ack = bool(self.params.get("cookie_ack", True))
        self.max_syns = self.params.get("max_syns")
        self.sent = 0
        self.spoofed: set[tuple] = set()
        self._port = 20000
        net.sim.at(self.start, self._tick, None, switch, EventKind.PROBE_LAUNCH)

    def _tick(self, _=None) -> None:
        net = self.net
        if self.stop is not None and net.sim.now >= self.stop:
            return
        if self.max_syns is not None and self.sent >= self.max_syns:
            return
        src = self.rng.choice(self.spoof_pool)
        self._port = 20000 + (self._port - 19999) % 40000
        syn = Packet(src, self.victim, self._port, self.params.get("dport", 80), Proto.TCP,
                     seq=0, flags=SYN)
        self.spoofed.add((syn.src, syn.sport))
        self.sent += 1
        self.actions["clone"] = self.actions.get("clone", 0) + 1
        net.tracer.emit(self.switch, TraceAction.CLONE, syn.digest(), "attack:" + self.name)
        egress = net.router.next_hop(self.switch, syn.five_tuple, syn.dst)
        if egress is not None:
            net.forward(self.switch, egress, syn)
        gap = max(1, int(SEC / self.rate))
        net.sim.after(gap, self._tick, None, self.switch, EventKind.PROBE_LAUNCH)

    def handle(self, pkt: Packet, ctx: SwitchContext) -> Action:
        if not (pkt.flags & SYN and pkt.flags & ACK) or pkt.src != self.victim:
            return Action.FORWARD
        if (pkt.dst, pkt.dport) not in self.spoofed:
            return Action.FORWARD
        if self.cookie_ack:
            ack = Packet(pkt.dst, pkt.src, pkt.dport, pkt.sport, Proto.TCP,
                         seq=pkt.ack, ack=pkt.seq + 1, flags=ACK, rwnd=pkt.rwnd)
            self.actions["clone"] = self.actions.get("clone", 0) + 1
            ctx.net.tracer.emit(ctx.switch.name, TraceAction.CLONE, ack.digest(),
                                "attack:" + self.name)
            egress = ctx.net.router.next_hop(ctx.switch.name, ack.five_tuple, ack.dst)
            if egress is not None:
                ctx.net.forward(ctx.switch.name, egress, ack)
        # the spoofed source would answer with RST; swallow the SYN-ACK instead
        self.actions["drop"] = self.actions.get("drop", 0) + 1
        ctx.net.tracer.emit(ctx.switch.name, TraceAction.DROP, pkt.digest(), "attack:" + self.name)
        return Action.DROP


@dataclass(frozen=True)
class PulseSchedule:
    """Shared on/off schedule: on during the first ``pp`` of every period."""

    pp: float
    period: int = SEC
    epoch: int = 0

    def active(self, now: int) -> bool:
        if self.pp <= 0:
            return False
        if self.pp >= 1:
            return True
        return (now - self.epoch) % self.period < self.pp * self.period


class IncastRoute(AttackProgram):
    """During pulses, steer traffic for the victim pod through one chosen core."""

    kind = AttackKind.INCAST

    def attach(self, net: Network, switch: str) -> None:
        super().attach(net, switch)
        p = self.params
        self.victim_pod = int(p.get("victim_pod", self.target.dst_pod or 0))
        self.core = p["core"]
        self.schedule = PulseSchedule(float(p.get("pp", 0.0)), int(p.get("period", SEC)),
                                      int(p.get("epoch", 0)))
        self.toward = self._steering_hop(net.topo, switch)
        self.steered = 0

    def _steering_hop(self, topo: Topology, switch: str) -> str | None:
        if self.core in topo.adj[switch]:
            return self.core
        # one level lower: an aggregation neighbor that reaches the core
        for n in topo.adj[switch]:
            if topo.role(n) is Role.AGG and self.core in topo.adj[n]:
                return n
        return None

    def handle(self, pkt: Packet, ctx: SwitchContext) -> Action:
        if self.toward is None or ctx.egress is None:
            return Action.FORWARD
        topo = ctx.net.topo
        if topo.pod(pkt.dst) != self.victim_pod or topo.pod(ctx.switch.name) == self.victim_pod:
            return Action.FORWARD
        role = topo.role(ctx.egress)
        if role is Role.HOST or role is Role.TOR:
            return Action.FORWARD  # already heading down
        if not self.schedule.active(ctx.now):
            return Action.FORWARD
        if ctx.egress != self.toward:
            ctx.egress = self.toward
            self.steered += 1
            self._tamper(ctx, pkt, TraceAction.MODIFY)
        return Action.FORWARD


class CoreIdRewrite(AttackProgram):
    """Overwrite the path tag of target flows with an innocent switch's name."""

    kind = AttackKind.CORE_ID_REWRITE

    def handle(self, pkt: Packet, ctx: SwitchContext) -> Action:
        if pkt.core_id is None or pkt.kind is not Kind.APP:
            return Action.FORWARD
        topo = ctx.net.topo
        if not (self.target.matches(pkt, topo) or self.target.matches_reverse(pkt, topo)):
            return Action.FORWARD
        fake = self.params["fake"]
        if pkt.core_id != fake:
            pkt.core_id = fake
            self._tamper(ctx, pkt, TraceAction.MODIFY)
        return Action.FORWARD


def alternate_path(topo: Topology, src: str, dst: str, avoid: set[str], salt: int = 0) -> list[str]:
    """A shortest src->dst path avoiding ``avoid`` (deterministic; empty when none)."""
    path = [src]
    node = src
    while node != dst:
        hops = [h for h in topo.next_hops(node, dst) if h not in avoid]
        if not hops:
            return []
        node = hops[(salt + len(path)) % len(hops)]
        path.append(node)
    return path


class TracerouteSpoof(AttackProgram):
    """Hide this switch from traceroutes.

    ``mode="knowledge"``: absorb every traceroute probe and answer as the hop
    the probe would have expired at on an innocent path the attacker knows.
    ``mode="relay"``: re-launch the probe from here through an alternate next
    hop and pass the genuine reply back, so every reported address is a real,
    reachable switch.
    """

    kind = AttackKind.TRACEROUTE_SPOOF

    def attach(self, net: Network, switch: str) -> None:
        super().attach(net, switch)
        self.mode = self.params.get("mode", "knowledge")
        self.avoid = set(self.params.get("avoid", [])) | {switch}
        self._fake: dict[tuple, list[str]] = {}
        self.spoofed = 0
        net.switches[switch].local_handlers.append(self._on_local)

    def _fake_path(self, probe: Packet, prev: str | None) -> list[str]:
        """Real path up to ``prev``, then an innocent detour from ``prev`` onward."""
        key = (probe.five_tuple, prev)
        p = self._fake.get(key)
        if p is None:
            real = self.net.router.path(probe.five_tuple)
            if prev in real:
                head = real[:real.index(prev)]
                tail = alternate_path(self.net.topo, prev, probe.dst, self.avoid, salt=probe.sport)
                p = head + tail if tail else []
            else:
                p = alternate_path(self.net.topo, probe.src, probe.dst, self.avoid,
                                   salt=probe.sport)
            self._fake[key] = p
        return p

    def handle(self, pkt: Packet, ctx: SwitchContext) -> Action:
        if pkt.kind is not Kind.TRACEROUTE:
            return Action.FORWARD
        meta = pkt.meta or {}
        if meta.get("relay_from") is not None:
            return Action.FORWARD
        ttl0 = meta.get("ttl0", pkt.ttl)
        expire_idx = ttl0  # the probe expires at path[ttl0]
        net = ctx.net
        sw = ctx.switch
        if self.mode == "relay":
            if ctx.egress is None:
                return Action.FORWARD
            alts = [h for h in net.topo.next_hops(sw.name, pkt.dst) if h != ctx.egress]
            if pkt.ttl == 1:
                # our own hop: report an equal-cost sibling of ours instead
                prev = ctx.prev
                sib = [h for h in net.topo.next_hops(prev, pkt.dst) if h not in self.avoid] if prev else []
                if not sib:
                    return Action.FORWARD
                sw.originate(net.icmp_reply(sw.name, pkt, sib[0]))
                self.spoofed += 1
                return Action.CONSUME
            if not alts:
                return Action.FORWARD
            relay = Packet(sw.name, pkt.dst, pkt.sport, pkt.dport, pkt.proto,
                           ttl=pkt.ttl - 1, kind=Kind.TRACEROUTE, shadow=True,
                           meta={"relay_from": pkt.src, "probe": pkt.meta, "ttl0": ttl0})
            net.forward(sw.name, alts[0], relay)
            self.spoofed += 1
            return Action.CONSUME
        fake = self._fake_path(pkt, ctx.prev)
        if not fake:
            return Action.FORWARD
        if expire_idx >= len(fake) - 1:
            return Action.FORWARD  # reaches the destination: nothing to hide
        sw.originate(net.icmp_reply(sw.name, pkt, fake[expire_idx]))
        self.spoofed += 1
        return Action.CONSUME

    def _on_local(self, pkt: Packet) -> bool:
        """Relay genuine replies addressed to this switch back to the prober."""
        if pkt.kind is not Kind.ICMP_REPLY:
            return False
        inner = (pkt.meta or {}).get("probe")
        if not isinstance(inner, dict) or "relay_from" not in inner:
            return False
        reply = Packet(self.switch, inner["relay_from"], pkt.sport, pkt.dport, Proto.ICMP,
                       kind=Kind.ICMP_REPLY, shadow=True,
                       meta={"hop": pkt.meta["hop"], "probe": inner.get("probe")})
        self.net.switches[self.switch].originate(reply)
        return True


PROGRAMS: dict[AttackKind, type[AttackProgram]] = {
    AttackKind.SYN_DROP: SynDrop,
    AttackKind.SAME_SEQ_DROP: SameSeqDrop,
    AttackKind.SYN_FLOOD: SynFlood,
    AttackKind.RST_TINKER: RstTinker,
    AttackKind.ACK_AND_DROP: AckAndDrop,
    AttackKind.ECN_TINKER: EcnTinker,
    AttackKind.CWND_TINKER: CwndTinker,
    AttackKind.INCAST: IncastRoute,
    AttackKind.CORE_ID_REWRITE: CoreIdRewrite,
    AttackKind.TRACEROUTE_SPOOF: TracerouteSpoof,
}


def build_program(cfg: AttackConfig, rng: RngStream) -> AttackProgram:
    return PROGRAMS[cfg.kind](cfg, rng)


def install_attack(net: Network, switch: str, cfg: AttackConfig) -> AttackProgram:
    if switch not in net.switches:
        raise ValueError(f"{switch} is not a switch")
    prog = build_program(cfg, net.rng[f"attacker/{switch}/{cfg.kind.value}"])
    prog.attach(net, switch)
    net.install(switch, prog)
    return prog
