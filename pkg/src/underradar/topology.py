"""Fat-tree and dumbbell topologies, drop-tail ECN queues and ECMP routing."""

from __future__ import annotations

import enum
import hashlib
from collections import deque
from dataclasses import dataclass
from typing import Callable

from .packet import Ecn, Packet
from .simcore import MS, SEC, US, EventKind, Simulator


class Role(enum.Enum):
    HOST = "host"
    TOR = "tor"
    AGG = "agg"
    CORE = "core"
    SWITCH = "switch"


@dataclass(frozen=True)
class LinkSpec:
    bandwidth_bps: float
    delay_ns: int
    queue_packets: int = 100
    ecn_threshold: int | None = None  # defaults to a third of the queue

    @property
    def ecn_mark_depth(self) -> int:
        if self.ecn_threshold is not None:
            return self.ecn_threshold
        return max(1, self.queue_packets // 3)

    def serialization_ns(self, nbytes: int) -> int:
        return -(-nbytes * 8 * SEC // int(self.bandwidth_bps))


# single-path setup for the per-flow attack experiments: 5 Mbps, 2 ms RTT
DUMBBELL_LINK = LinkSpec(bandwidth_bps=5e6, delay_ns=MS // 3, queue_packets=100)
DATACENTER_LINK = LinkSpec(bandwidth_bps=1e9, delay_ns=5 * US, queue_packets=100)


@dataclass(frozen=True)
class Node:
    name: str
    role: Role
    pod: int | None = None
    index: int = 0

    @property
    def is_host(self) -> bool:
        return self.role is Role.HOST


class TopologyError(ValueError):
    pass


class Topology:
    def __init__(self, name: str = "custom"):
        self.name = name
        self.nodes: dict[str, Node] = {}
        self.adj: dict[str, list[str]] = {}
        self.links: dict[tuple[str, str], LinkSpec] = {}
        self.k: int | None = None
        self._dist: dict[str, dict[str, int]] = {}
        self._hops: dict[tuple[str, str], list[str]] = {}

    def add_node(self, node: Node) -> None:
        if node.name in self.nodes:
            raise TopologyError(f"duplicate node {node.name}")
        self.nodes[node.name] = node
        self.adj[node.name] = []

    def add_link(self, a: str, b: str, spec: LinkSpec) -> None:
        for n in (a, b):
            if n not in self.nodes:
                raise TopologyError(f"unknown node {n}")
        self.adj[a].append(b)
        self.adj[b].append(a)
        self.links[(a, b)] = spec
        self.links[(b, a)] = spec
        self._dist.clear()
        self._hops.clear()

    @property
    def hosts(self) -> list[str]:
        return [n for n, v in self.nodes.items() if v.role is Role.HOST]

    @property
    def switches(self) -> list[str]:
        return [n for n, v in self.nodes.items() if v.role is not Role.HOST]

    def of_role(self, role: Role) -> list[str]:
        return [n for n, v in self.nodes.items() if v.role is role]

    def role(self, name: str) -> Role:
        return self.nodes[name].role

    def pod(self, name: str) -> int | None:
        node = self.nodes.get(name)
        return node.pod if node else None

    def tor_of(self, host: str) -> str:
        return self.adj[host][0]

    def _distances(self, dst: str) -> dict[str, int]:
        d = self._dist.get(dst)
        if d is None:
            d = {dst: 0}
            frontier = deque([dst])
            while frontier:
                u = frontier.popleft()
                for v in self.adj[u]:
                    if v not in d:
                        d[v] = d[u] + 1
                        # hosts are leaves: never expand through them
                        if not self.nodes[v].is_host:
                            frontier.append(v)
            self._dist[dst] = d
        return d

    def next_hops(self, node: str, dst: str) -> list[str]:
        """Equal-cost next hops from ``node`` toward ``dst`` (sorted, may be empty)."""
        key = (node, dst)
        hops = self._hops.get(key)
        if hops is None:
            hops = []
            if dst in self.nodes:
                d = self._distances(dst)
                here = d.get(node)
                if here:
                    hops = sorted(v for v in self.adj[node] if d.get(v) == here - 1)
            self._hops[key] = hops
        return list(hops)

    def distance(self, a: str, b: str) -> int:
        return self._distances(b)[a]

    def dump(self) -> str:
        lines = [f"# topology {self.name}" + (f" k={self.k}" if self.k else "")]
        lines.append(f"# nodes {len(self.nodes)} hosts {len(self.hosts)} switches {len(self.switches)}")
        for name, node in self.nodes.items():
            pod = "-" if node.pod is None else node.pod
            lines.append(f"node\t{name}\t{node.role.value}\t{pod}\t{node.index}")
        seen = set()
        for (a, b), spec in self.links.items():
            if (b, a) in seen:
                continue
            seen.add((a, b))
            lines.append(
                f"link\t{a}\t{b}\t{spec.bandwidth_bps:g}bps\t{spec.delay_ns}ns\t"
                f"q={spec.queue_packets}\tecn={spec.ecn_mark_depth}"
            )
        return "\n".join(lines) + "\n"


def core_name(i: int) -> str:
    return f"core{i}"


def agg_name(pod: int, i: int) -> str:
    return f"agg{pod}_{i}"


def tor_name(pod: int, i: int) -> str:
    return f"tor{pod}_{i}"


def host_name(pod: int, tor: int, i: int) -> str:
    return f"h{pod}_{tor}_{i}"


def build_fat_tree(k: int, link: LinkSpec = DATACENTER_LINK) -> Topology:
    """k-ary fat-tree: core j attaches to aggregation switch j // (k/2) of every pod."""
    if not isinstance(k, int) or k < 4 or k % 2:
        raise TopologyError(f"fat-tree arity must be an even integer >= 4, got {k!r}")
    half = k // 2
    topo = Topology(f"fat-tree-k{k}")
    topo.k = k
    for c in range(half * half):
        topo.add_node(Node(core_name(c), Role.CORE, None, c))
    for p in range(k):
        for i in range(half):
            topo.add_node(Node(agg_name(p, i), Role.AGG, p, i))
            topo.add_node(Node(tor_name(p, i), Role.TOR, p, i))
    for p in range(k):
        for t in range(half):
            for h in range(half):
                topo.add_node(Node(host_name(p, t, h), Role.HOST, p, h))
                topo.add_link(host_name(p, t, h), tor_name(p, t), link)
        for t in range(half):
            for a in range(half):
                topo.add_link(tor_name(p, t), agg_name(p, a), link)
        for a in range(half):
            for j in range(half):
                topo.add_link(agg_name(p, a), core_name(a * half + j), link)
    return topo


def build_dumbbell(link: LinkSpec = DUMBBELL_LINK, n_switches: int = 2) -> Topology:
    """client - s0 - ... - s{n-1} - server, every link identical."""
    if n_switches < 1:
        raise TopologyError("dumbbell needs at least one switch")
    topo = Topology(f"dumbbell-{n_switches}")
    topo.add_node(Node("client", Role.HOST))
    topo.add_node(Node("server", Role.HOST))
    names = [f"s{i}" for i in range(n_switches)]
    for i, n in enumerate(names):
        topo.add_node(Node(n, Role.SWITCH, None, i))
    chain = ["client", *names, "server"]
    for a, b in zip(chain, chain[1:]):
        topo.add_link(a, b, link)
    return topo


def ecmp_hash(five_tuple: tuple, salt: int, node: str = "") -> int:
    h = hashlib.blake2b(repr((salt, node, five_tuple)).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "big")


class EcmpRouter:
    """Per-switch flow hashing over equal-cost next hops.

    The switch name is mixed into the hash so consecutive tiers do not
    polarize onto the same port index.
    """

    def __init__(self, topo: Topology, salt: int = 0):
        self.topo = topo
        self.salt = salt
        self._cache: dict[tuple, str | None] = {}

    def next_hop(self, node: str, five_tuple: tuple, dst: str | None = None) -> str | None:
        dst = five_tuple[1] if dst is None else dst
        key = (node, dst, five_tuple)
        try:
            return self._cache[key]
        except KeyError:
            pass
        hops = self.topo.next_hops(node, dst)
        if not hops:
            choice = None
        elif len(hops) == 1:
            choice = hops[0]
        else:
            choice = hops[ecmp_hash(five_tuple, self.salt, node) % len(hops)]
        self._cache[key] = choice
        return choice

    def path(self, five_tuple: tuple, src: str | None = None, dst: str | None = None) -> list[str]:
        """Nominal ECMP path (node list, endpoints included)."""
        src = five_tuple[0] if src is None else src
        dst = five_tuple[1] if dst is None else dst
        path = [src]
        node = src
        while node != dst:
            nxt = self.next_hop(node, five_tuple, dst)
            if nxt is None or len(path) > 32:
                return []
            path.append(nxt)
            node = nxt
        return path


def ecmp_next_hop(router: EcmpRouter, packet: Packet, node: str) -> str | None:
    return router.next_hop(node, packet.five_tuple, packet.dst)


class EnqueueResult(enum.Enum):
    ACCEPTED = "accepted"
    DROPPED = "dropped"
    ACCEPTED_WITH_CE = "accepted_with_ce"


class Port:
    """One direction of a link: FIFO drop-tail queue plus a serializing transmitter.

    ``depth`` counts queued packets including the one on the wire.
    """

    __slots__ = ("sim", "src", "dst", "spec", "deliver", "queue", "busy",
                 "enqueued", "delivered", "dropped", "marked", "bits_per_ns",
                 "queued_bytes", "tx_end", "ecn_depth", "capacity", "delay")

    def __init__(self, sim: Simulator, src: str, dst: str, spec: LinkSpec,
                 deliver: Callable[[str, str, Packet], None]):
        self.sim = sim
        self.src = src
        self.dst = dst
        self.spec = spec
        self.deliver = deliver
        self.queue: deque[Packet] = deque()
        self.busy = False
        self.enqueued = 0
        self.delivered = 0
        self.dropped = 0
        self.marked = 0
        self.queued_bytes = 0
        self.tx_end = 0
        self.ecn_depth = spec.ecn_mark_depth
        self.capacity = spec.queue_packets
        self.delay = spec.delay_ns

    @property
    def depth(self) -> int:
        return len(self.queue) + (1 if self.busy else 0)

    def enqueue(self, pkt: Packet) -> EnqueueResult:
        depth = len(self.queue) + (1 if self.busy else 0)
        if depth >= self.capacity:
            self.dropped += 1
            return EnqueueResult.DROPPED
        result = EnqueueResult.ACCEPTED
        if depth >= self.ecn_depth and pkt.ecn is not Ecn.NOT_ECT:
            if pkt.ecn is not Ecn.CE:
                self.marked += 1
            pkt.ecn = Ecn.CE
            result = EnqueueResult.ACCEPTED_WITH_CE
        self.enqueued += 1
        if self.busy:
            self.queue.append(pkt)
            self.queued_bytes += pkt.payload_len + 40
        else:
            self._transmit(pkt)
        return result

    def _transmit(self, pkt: Packet) -> None:
        self.busy = True
        ser = self.spec.serialization_ns(pkt.payload_len + 40)
        self.tx_end = self.sim.now + ser
        self.sim.at(self.tx_end, self._tx_done, pkt, self.src)

    def _tx_done(self, pkt: Packet) -> None:
        self.sim.at(self.sim.now + self.delay, self._arrive, pkt, self.dst,
                    EventKind.PACKET_ARRIVAL)
        if self.queue:
            nxt = self.queue.popleft()
            self.queued_bytes -= nxt.payload_len + 40
            self._transmit(nxt)
        else:
            self.busy = False

    def _arrive(self, pkt: Packet) -> None:
        self.delivered += 1
        self.deliver(self.dst, self.src, pkt)

    def shadow(self, pkt: Packet) -> bool:
        """Send a negligible-load probe: it sees the current backlog but does not join it."""
        if len(self.queue) + (1 if self.busy else 0) >= self.capacity:
            return False
        wait = self.tx_end - self.sim.now if self.busy else 0
        t = (self.sim.now + wait + self.spec.serialization_ns(self.queued_bytes)
             + self.spec.serialization_ns(pkt.payload_len + 40) + self.delay)
        self.sim.at(t, self._shadow_arrive, pkt, self.dst, EventKind.PACKET_ARRIVAL)
        return True

    def _shadow_arrive(self, pkt: Packet) -> None:
        self.deliver(self.dst, self.src, pkt)
