"""Simulated packet headers."""

from __future__ import annotations

import enum
import itertools
import zlib

SYN = 0x01
ACK = 0x02
RST = 0x04
FIN = 0x08
ECE = 0x10
CWR = 0x20

_FLAG_NAMES = ((SYN, "S"), (ACK, "A"), (RST, "R"), (FIN, "F"), (ECE, "E"), (CWR, "C"))

HEADER_BYTES = 40


class Proto(enum.IntEnum):
    TCP = 6
    UDP = 17
    ICMP = 1


class Ecn(enum.IntEnum):
    NOT_ECT = 0
    ECT = 1
    CE = 3


class Kind(enum.IntEnum):
    """What produced a packet. Monitors use this to tell their own probes apart."""

    APP = 0
    PING = 1
    BOUNCE = 2
    TRACEROUTE = 3
    ICMP_REPLY = 4


_uid = itertools.count(1)


def flag_str(flags: int) -> str:
    return "".join(ch for bit, ch in _FLAG_NAMES if flags & bit) or "."


class Packet:
    """Header bundle. Sequence numbers are plain ints; 32-bit wrap is not modeled."""

    __slots__ = (
        "src", "dst", "sport", "dport", "proto", "seq", "ack", "flags", "ecn",
        "rwnd", "ttl", "core_id", "payload_len", "valid", "uid", "kind",
        "shadow", "meta", "sent_at",
    )

    def __init__(self, src: str, dst: str, sport: int, dport: int,
                 proto: Proto = Proto.TCP, seq: int = 0, ack: int = 0, flags: int = 0,
                 ecn: Ecn = Ecn.NOT_ECT, rwnd: int = 0, ttl: int = 64,
                 core_id: str | None = None, payload_len: int = 0,
                 kind: Kind = Kind.APP, shadow: bool = False, meta=None):
        self.src = src
        self.dst = dst
        self.sport = sport
        self.dport = dport
        self.proto = proto
        self.seq = seq
        self.ack = ack
        self.flags = flags
        self.ecn = ecn
        self.rwnd = rwnd
        self.ttl = ttl
        self.core_id = core_id
        self.payload_len = payload_len
        self.valid = True
        self.uid = next(_uid)
        self.kind = kind
        self.shadow = shadow
        self.meta = meta
        self.sent_at = 0

    @property
    def five_tuple(self) -> tuple[str, str, int, int, int]:
        return (self.src, self.dst, self.sport, self.dport, int(self.proto))

    @property
    def size(self) -> int:
        return self.payload_len + HEADER_BYTES

    def has(self, flag: int) -> bool:
        return bool(self.flags & flag)

    def copy(self) -> Packet:
        p = Packet.__new__(Packet)
        for name in Packet.__slots__:
            setattr(p, name, getattr(self, name))
        p.uid = next(_uid)
        return p

    def reply_tuple(self) -> tuple[str, str, int, int]:
        return (self.dst, self.src, self.dport, self.sport)

    def digest(self) -> str:
        """Stable header digest, excluding per-hop fields (TTL, core tag)."""
        key = (self.src, self.dst, self.sport, self.dport, int(self.proto), self.seq,
               self.ack, self.flags, int(self.ecn), self.rwnd, self.payload_len)
        return f"{zlib.crc32(repr(key).encode()):08x}"

    def __repr__(self) -> str:
        return (f"Packet({self.src}:{self.sport}->{self.dst}:{self.dport} {self.proto.name} "
                f"[{flag_str(self.flags)}] seq={self.seq} ack={self.ack} len={self.payload_len} "
                f"ecn={self.ecn.name} rwnd={self.rwnd} ttl={self.ttl} core={self.core_id})")
