"""A small TCP-like transport: just the behaviors the attacks lean on.

NewReno-style AIMD without SACK, RFC 6298 RTO with exponential backoff,
RFC 3168 ECN echo, scaled receive windows with a persist timer, RST
teardown and optional SYN cookies. ACKs are sent immediately (no delayed
ACK timer). Sequence numbers are relative: the SYN occupies seq 0 and the
first data byte is seq 1.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import io
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable

from .packet import ACK, CWR, ECE, FIN, RST, SYN, Ecn, Packet, Proto
from .simcore import MS, SEC, Event, EventKind, Simulator

if TYPE_CHECKING:
    from .network import Host


class ConnState(enum.Enum):
    CLOSED = "CLOSED"
    SYN_SENT = "SYN_SENT"
    SYN_RCVD = "SYN_RCVD"
    ESTABLISHED = "ESTABLISHED"
    CLOSING = "CLOSING"
    TERMINATED = "TERMINATED"


class FlowStatus(enum.Enum):
    PENDING = "pending"
    COMPLETED = "completed"
    FAILED = "failed"              # handshake never completed
    DISCONNECTED = "disconnected"  # torn down by RST
    TIMEOUT = "timeout"            # data retransmissions exhausted
    OPEN = "open"                  # still connected when the run horizon hit


@dataclass(frozen=True)
class TcpConfig:
    mss: int = 1460
    rto_min: int = 200 * MS
    rto_max: int = 120 * SEC
    rto_initial: int | None = None   # first SYN timeout; rto_min when unset
    syn_retries: int = 6
    data_retries: int = 15
    synack_retries: int = 5
    init_cwnd: int = 2
    wscale: int = 512
    rcv_buffer: int = 256 * 1024
    ecn: bool = True
    dupack_threshold: int = 3

    @property
    def first_rto(self) -> int:
        return self.rto_min if self.rto_initial is None else self.rto_initial

    @property
    def rwnd_field(self) -> int:
        return min(0xFFFF, self.rcv_buffer // self.wscale)


@dataclass
class FlowRecord:
    flow_id: int
    src: str
    dst: str
    size: int
    start: int
    sport: int = 0
    dport: int = 80
    establishment_time: int | None = None
    fct: int | None = None
    status: FlowStatus = FlowStatus.PENDING
    end_time: int | None = None
    bytes_delivered: int = 0
    syn_sent: int = 0
    retransmissions: int = 0
    timeouts: int = 0
    fast_retransmits: int = 0
    ece_reductions: int = 0
    persist_probes: int = 0
    segments_sent: int = 0
    fwd_tag: str | None = None
    rev_tag: str | None = None
    rtt_samples: list[int] = field(default_factory=list)
    tags: dict = field(default_factory=dict)

    @property
    def five_tuple(self) -> tuple:
        return (self.src, self.dst, self.sport, self.dport, int(Proto.TCP))

    @property
    def done(self) -> bool:
        return self.status is not FlowStatus.PENDING

    def fct_or_inf(self) -> float:
        return float("inf") if self.fct is None else self.fct

    def finish(self, status: FlowStatus, now: int) -> None:
        if self.status is FlowStatus.PENDING:
            self.status = status
            self.end_time = now


FLOW_CSV_COLUMNS = ["flow_id", "src", "dst", "bytes", "start", "establishment_time", "fct", "status"]


def flows_to_csv(flows: list[FlowRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FLOW_CSV_COLUMNS)
    for f in flows:
        w.writerow([
            f.flow_id, f.src, f.dst, f.size, f.start,
            "" if f.establishment_time is None else f.establishment_time,
            "inf" if f.fct is None else f.fct,
            f.status.value,
        ])
    return buf.getvalue()


class TcpSender:
    """Active opener that pushes ``record.size`` bytes to the peer."""

    def __init__(self, host: Host, record: FlowRecord, cfg: TcpConfig):
        self.host = host
        self.sim: Simulator = host.sim
        self.rec = record
        self.cfg = cfg
        self.mss = cfg.mss
        self.wscale = cfg.wscale
        self.rto_min = cfg.rto_min
        self.syn_retries = cfg.syn_retries

        self.state = ConnState.CLOSED
        self.iss = 0
        self.snd_una = 0
        self.snd_nxt = 0
        self.snd_max = 0
        self.end_seq = 1 + record.size
        self.rcv_nxt = 0  # peer's sequence space (for ACK numbers we emit)

        self.cwnd = float(cfg.init_cwnd)
        self.ssthresh = float("inf")
        self.peer_rwnd = cfg.rcv_buffer
        self.dup_ack_count = 0
        self.in_recovery = False
        self.recover = 0
        self.cwr_until = -1
        self.send_cwr = False

        self.rto = cfg.first_rto
        self.srtt: int | None = None
        self.rttvar = 0
        self.backoff = 0
        self.consecutive_timeouts = 0
        self.syn_attempts = 0
        self._timing: tuple[int, int] | None = None  # (seq end, send time)
        self._rto_timer: Event | None = None
        self._persist_timer: Event | None = None
        self.fin_sent = False
        self.max_in_flight = 0
        self.on_retransmit: Callable[[TcpSender, Packet], None] | None = None

    # -- helpers ---------------------------------------------------------

    @property
    def in_flight(self) -> int:
        return self.snd_nxt - self.snd_una

    @property
    def effective_window(self) -> int:
        return min(max(1, int(self.cwnd)) * self.mss, self.peer_rwnd)

    def _packet(self, seq: int, flags: int, length: int = 0) -> Packet:
        rec = self.rec
        pkt = Packet(rec.src, rec.dst, rec.sport, rec.dport, Proto.TCP, seq=seq,
                     ack=self.rcv_nxt, flags=flags, rwnd=self.cfg.rwnd_field,
                     payload_len=length)
        if self.cfg.ecn and length > 0:
            pkt.ecn = Ecn.ECT
        return pkt

    def _arm_rto(self) -> None:
        self.sim.cancel(self._rto_timer)
        self._rto_timer = self.sim.after(self.rto, self.on_rto_expiry, None, self.host.name)

    def _stop_rto(self) -> None:
        self.sim.cancel(self._rto_timer)
        self._rto_timer = None

    def _rtt_sample(self, sample: int) -> None:
        # RFC 6298 with alpha=1/8, beta=1/4
        if self.srtt is None:
            self.srtt = sample
            self.rttvar = sample // 2
        else:
            self.rttvar = (3 * self.rttvar + abs(self.srtt - sample)) // 4
            self.srtt = (7 * self.srtt + sample) // 8
        self.rto = min(self.cfg.rto_max, max(self.rto_min, self.srtt + 4 * self.rttvar))
        self.backoff = 0
        self.rec.rtt_samples.append(sample)

    # -- connection setup ------------------------------------------------

    def connect(self) -> None:
        self.state = ConnState.SYN_SENT
        self.snd_una = self.iss
        self.snd_nxt = self.iss + 1
        self.snd_max = self.snd_nxt
        self._send_syn()

    def _send_syn(self) -> None:
        self.syn_attempts += 1
        self.rec.syn_sent += 1
        pkt = self._packet(self.iss, SYN)
        if self.cfg.ecn:
            pkt.flags |= ECE | CWR  # ECN-setup SYN
        if self.syn_attempts == 1:
            self._timing = (self.iss + 1, self.sim.now)
        else:
            self._timing = None
        self.host.transmit(pkt)
        self._arm_rto()

    # -- timers ----------------------------------------------------------

    def on_rto_expiry(self, _=None) -> None:
        """Retransmit the oldest outstanding segment (or the SYN) and back off."""
        self._rto_timer = None
        if self.state is ConnState.SYN_SENT:
            if self.syn_attempts > self.syn_retries:
                self._fail(FlowStatus.FAILED)
                return
            self.rto = min(self.cfg.rto_max, self.rto * 2)
            self.backoff += 1
            self.rec.retransmissions += 1
            self._send_syn()
            return
        if self.state is not ConnState.ESTABLISHED or self.snd_una >= self.snd_max:
            return
        self.consecutive_timeouts += 1
        self.rec.timeouts += 1
        if self.consecutive_timeouts > self.cfg.data_retries:
            self._fail(FlowStatus.TIMEOUT)
            return
        self.ssthresh = max(self.in_flight / self.mss / 2, 2.0)
        self.cwnd = 1.0
        self.in_recovery = False
        self.dup_ack_count = 0
        self.rto = min(self.cfg.rto_max, self.rto * 2)
        self.backoff += 1
        self._timing = None
        self.snd_nxt = self.snd_una
        self._send_data(limit_one=True)
        self._arm_rto()

    def _arm_persist(self) -> None:
        if self._persist_timer is not None:
            return
        interval = min(self.cfg.rto_max, self.rto << min(self.backoff, 16))
        self._persist_timer = self.sim.after(interval, self._on_persist, None, self.host.name)

    def _on_persist(self, _=None) -> None:
        self._persist_timer = None
        if self.state is not ConnState.ESTABLISHED or self.snd_nxt >= self.end_seq:
            return
        if self.in_flight > 0:
            return
        seg = min(self.mss, self.end_seq - self.snd_nxt)
        room = self.peer_rwnd - self.in_flight
        if seg <= room:
            self._try_send()
            return
        # window probe carrying as much data as the peer admits
        length = max(1, min(seg, room))
        self.rec.persist_probes += 1
        self.backoff += 1
        self._emit_segment(self.snd_nxt, length)
        self.snd_nxt += length
        self.snd_max = max(self.snd_max, self.snd_nxt)
        if self._rto_timer is None:
            self._arm_rto()

    # -- sending ---------------------------------------------------------

    def _emit_segment(self, seq: int, length: int) -> None:
        retrans = seq < self.snd_max
        self.rec.segments_sent += 1
        pkt = self._packet(seq, ACK, length)
        if self.send_cwr and not retrans:
            pkt.flags |= CWR
            self.send_cwr = False
        if retrans:
            self.rec.retransmissions += 1
            if self._timing is not None and self._timing[0] > seq:
                self._timing = None
            if self.on_retransmit is not None:
                self.on_retransmit(self, pkt)
        elif self._timing is None:
            self._timing = (seq + length, self.sim.now)
        self.host.transmit(pkt)

    def _send_data(self, limit_one: bool = False) -> int:
        sent = 0
        window = self.effective_window
        while self.snd_nxt < self.end_seq:
            seg = min(self.mss, self.end_seq - self.snd_nxt)
            if self.snd_nxt + seg > self.snd_una + window:
                break
            self._emit_segment(self.snd_nxt, seg)
            self.snd_nxt += seg
            sent += 1
            if limit_one:
                break
        if self.snd_nxt > self.snd_max:
            self.snd_max = self.snd_nxt
        fl = self.snd_nxt - self.snd_una
        if fl > self.max_in_flight:
            self.max_in_flight = fl
        return sent

    def _try_send(self) -> None:
        if self.state is not ConnState.ESTABLISHED:
            return
        sent = self._send_data()
        if sent and self._rto_timer is None:
            self._arm_rto()
        if self.snd_nxt < self.end_seq and self.in_flight == 0 and not sent:
            self._arm_persist()
        elif self._persist_timer is not None and self.in_flight > 0:
            self.sim.cancel(self._persist_timer)
            self._persist_timer = None
        if self.snd_una >= self.end_seq and not self.fin_sent:
            self.fin_sent = True
            self.state = ConnState.CLOSING
            self._stop_rto()
            self.host.transmit(self._packet(self.end_seq, FIN | ACK))

    # -- receiving -------------------------------------------------------

    def receive(self, pkt: Packet) -> None:
        if pkt.flags & RST:
            self.on_rst(pkt)
            return
        if pkt.core_id is not None:
            self.rec.rev_tag = pkt.core_id
        if self.state is ConnState.SYN_SENT:
            if pkt.flags & SYN and pkt.flags & ACK and pkt.ack == self.iss + 1:
                self._on_synack(pkt)
            return
        if self.state in (ConnState.ESTABLISHED, ConnState.CLOSING) and pkt.flags & ACK:
            self.on_ack(pkt)

    def _on_synack(self, pkt: Packet) -> None:
        now = self.sim.now
        if self._timing is not None:
            self._rtt_sample(now - self._timing[1])
        self._timing = None
        self._stop_rto()
        self.state = ConnState.ESTABLISHED
        self.rcv_nxt = pkt.seq + 1
        self.snd_una = self.iss + 1
        self.peer_rwnd = pkt.rwnd * self.wscale
        self.backoff = 0
        self.rec.establishment_time = now - self.rec.start
        self.host.transmit(self._packet(self.snd_nxt, ACK))
        self._try_send()

    def on_ack(self, pkt: Packet) -> None:
        ack = pkt.ack
        if ack > self.snd_max:
            self.host.net.note(self.host.name, "ack-beyond-sent", pkt)
            return
        if ack < self.snd_una:
            return
        if self.state is ConnState.CLOSING:
            if ack > self.end_seq:
                self.state = ConnState.CLOSED
            return
        self.peer_rwnd = pkt.rwnd * self.wscale
        ece_cut = False
        if pkt.flags & ECE and ack > self.cwr_until and not self.in_recovery:
            self.cwnd = max(self.cwnd / 2.0, 1.0)
            self.ssthresh = max(self.cwnd, 1.0)
            self.cwr_until = self.snd_max
            self.send_cwr = True
            self.rec.ece_reductions += 1
            ece_cut = True

        if ack > self.snd_una:
            acked = ack - self.snd_una
            if self._timing is not None and ack >= self._timing[0]:
                self._rtt_sample(self.sim.now - self._timing[1])
                self._timing = None
            self.snd_una = ack
            if self.snd_nxt < self.snd_una:
                self.snd_nxt = self.snd_una
            self.consecutive_timeouts = 0
            self.dup_ack_count = 0
            if self.in_recovery:
                if ack >= self.recover:
                    self.in_recovery = False
                    self.cwnd = max(self.ssthresh, 1.0)
                else:
                    # NewReno partial ACK: resend the next hole, deflate
                    self.cwnd = max(self.cwnd - acked / self.mss + 1, 1.0)
                    self._emit_segment(self.snd_una, min(self.mss, self.end_seq - self.snd_una))
            elif not ece_cut:
                if self.cwnd < self.ssthresh:
                    self.cwnd += 1.0
                else:
                    self.cwnd += 1.0 / self.cwnd
            if self.snd_una >= self.snd_max:
                self._stop_rto()
            else:
                self._arm_rto()
        elif (ack == self.snd_una and pkt.payload_len == 0 and self.snd_max > self.snd_una
              and not pkt.flags & (SYN | FIN)):
            self.dup_ack_count += 1
            if self.dup_ack_count == self.cfg.dupack_threshold and not self.in_recovery:
                self.rec.fast_retransmits += 1
                self.ssthresh = max(self.in_flight / self.mss / 2.0, 2.0)
                self.cwnd = max(self.ssthresh + self.cfg.dupack_threshold, 1.0)
                self.recover = self.snd_max
                self.in_recovery = True
                self._timing = None
                self._emit_segment(self.snd_una, min(self.mss, self.end_seq - self.snd_una))
                self._arm_rto()
            elif self.in_recovery:
                self.cwnd += 1.0
        self._try_send()

    def on_rst(self, pkt: Packet) -> None:
        if self.state in (ConnState.CLOSED, ConnState.TERMINATED):
            return
        if self.state is not ConnState.SYN_SENT and not (
            self.rcv_nxt <= pkt.seq < self.rcv_nxt + self.cfg.rcv_buffer
        ):
            return
        self._fail(FlowStatus.DISCONNECTED)

    def _fail(self, status: FlowStatus) -> None:
        self.state = ConnState.TERMINATED
        self._stop_rto()
        self.sim.cancel(self._persist_timer)
        self._persist_timer = None
        self.rec.finish(status, self.sim.now)
        self.host.forget(self)


class TcpReceiver:
    """Passive side: cumulative ACKs, out-of-order buffering, ECN echo."""

    def __init__(self, host: Host, listener: Listener, key: tuple, cfg: TcpConfig,
                 rcv_nxt: int, iss: int, record: FlowRecord | None):
        self.host = host
        self.sim = host.sim
        self.listener = listener
        self.key = key  # (local port, remote host, remote port)
        self.cfg = cfg
        self.state = ConnState.SYN_RCVD
        self.rcv_nxt = rcv_nxt
        self.iss = iss
        self.snd_nxt = iss + 1
        self.ooo: dict[int, int] = {}
        self.delivered = 0
        self.ece_pending = False
        self.rec = record
        self.synack_attempts = 0
        self._timer: Event | None = None

    def _ack_packet(self, flags: int = ACK) -> Packet:
        local_port, remote, remote_port = self.key
        pkt = Packet(self.host.name, remote, local_port, remote_port, Proto.TCP,
                     seq=self.snd_nxt, ack=self.rcv_nxt, flags=flags,
                     rwnd=self.cfg.rwnd_field)
        if self.ece_pending:
            pkt.flags |= ECE
        return pkt

    def send_synack(self, _=None) -> None:
        self._timer = None
        if self.state is not ConnState.SYN_RCVD:
            return
        if self.synack_attempts > self.cfg.synack_retries:
            self.listener.drop_half_open(self)
            return
        self.synack_attempts += 1
        local_port, remote, remote_port = self.key
        pkt = Packet(self.host.name, remote, local_port, remote_port, Proto.TCP,
                     seq=self.iss, ack=self.rcv_nxt, flags=SYN | ACK,
                     rwnd=self.cfg.rwnd_field)
        self.host.transmit(pkt)
        delay = min(self.cfg.rto_max, self.cfg.rto_min << (self.synack_attempts - 1))
        self._timer = self.sim.after(delay, self.send_synack, None, self.host.name)

    def establish(self) -> None:
        self.sim.cancel(self._timer)
        self._timer = None
        self.state = ConnState.ESTABLISHED

    def receive(self, pkt: Packet) -> None:
        if pkt.flags & RST:
            self.on_rst(pkt)
            return
        if self.state is ConnState.SYN_RCVD:
            if pkt.flags & SYN and not pkt.flags & ACK:
                return  # duplicate SYN; the SYN-ACK timer handles it
            if pkt.flags & ACK and pkt.ack == self.iss + 1:
                self.listener.promote(self)
            else:
                return
        if self.state is not ConnState.ESTABLISHED:
            return
        if pkt.core_id is not None and self.rec is not None:
            self.rec.fwd_tag = pkt.core_id
        if pkt.flags & FIN:
            self.rcv_nxt = max(self.rcv_nxt, pkt.seq + 1) if pkt.seq == self.rcv_nxt else self.rcv_nxt
            self.host.transmit(self._ack_packet())
            if pkt.seq + 0 <= self.rcv_nxt:
                self.state = ConnState.CLOSED
                self.listener.release(self)
            return
        if pkt.payload_len > 0:
            self.host.transmit(self.on_receive_data(pkt))

    def on_receive_data(self, pkt: Packet) -> Packet:
        """Accept a data segment and return the cumulative ACK to send."""
        if pkt.flags & CWR:
            self.ece_pending = False
        if pkt.ecn is Ecn.CE:
            self.ece_pending = True
        seq, length = pkt.seq, pkt.payload_len
        if seq == self.rcv_nxt:
            self.rcv_nxt += length
            self.delivered += length
            while self.rcv_nxt in self.ooo:
                n = self.ooo.pop(self.rcv_nxt)
                self.rcv_nxt += n
                self.delivered += n
            if self.rec is not None:
                self._progress()
        elif seq > self.rcv_nxt:
            if self.ooo.get(seq, 0) < length:
                self.ooo[seq] = length
        # seq < rcv_nxt: old duplicate, just re-ACK
        return self._ack_packet()

    def _progress(self) -> None:
        rec = self.rec
        rec.bytes_delivered = self.delivered
        if self.delivered >= rec.size and rec.fct is None:
            rec.fct = self.sim.now - rec.start
            rec.finish(FlowStatus.COMPLETED, self.sim.now)

    def on_rst(self, pkt: Packet) -> None:
        if self.state in (ConnState.CLOSED, ConnState.TERMINATED):
            return
        if not (self.rcv_nxt <= pkt.seq < self.rcv_nxt + self.cfg.rcv_buffer):
            return
        self.state = ConnState.TERMINATED
        self.sim.cancel(self._timer)
        if self.rec is not None:
            self.rec.finish(FlowStatus.DISCONNECTED, self.sim.now)
        self.listener.release(self)


def cookie_value(secret: int, key: tuple) -> int:
    h = hashlib.blake2b(repr((secret, key)).encode(), digest_size=4)
    return int.from_bytes(h.digest(), "big") & 0x7FFFFFFF


@dataclass
class SynCookieState:
    enabled: bool = False
    secret: int = 0x5EED
    issued: int = 0
    accepted: int = 0
    rejected: int = 0

    def cookie(self, key: tuple) -> int:
        return cookie_value(self.secret, key)

    def verify(self, key: tuple, ack: int) -> bool:
        ok = ack - 1 == self.cookie(key)
        if ok:
            self.accepted += 1
        else:
            self.rejected += 1
        return ok


class Listener:
    """Server socket: bounded SYN backlog, bounded connection table, optional cookies."""

    def __init__(self, host: Host, port: int, cfg: TcpConfig, *, syn_cookies: bool = False,
                 syn_backlog: int = 128, max_connections: int = 128):
        self.host = host
        self.port = port
        self.cfg = cfg
        self.cookies = SynCookieState(enabled=syn_cookies)
        self.syn_backlog = syn_backlog
        self.max_connections = max_connections
        self.half_open: dict[tuple, TcpReceiver] = {}
        self.connections: dict[tuple, TcpReceiver] = {}
        self.syn_drops = 0
        self.peak_connections = 0

    @property
    def state_entries(self) -> int:
        return len(self.half_open) + len(self.connections)

    def _key(self, pkt: Packet) -> tuple:
        return (pkt.dport, pkt.src, pkt.sport)

    def on_syn(self, pkt: Packet) -> Packet | None:
        """Handle a SYN; returns the SYN-ACK sent (None when dropped)."""
        key = self._key(pkt)
        if key in self.half_open:
            return None
        if len(self.connections) >= self.max_connections:
            self.syn_drops += 1
            return None
        if self.cookies.enabled:
            return self.syn_cookie_handshake(pkt)
        if len(self.half_open) >= self.syn_backlog:
            self.syn_drops += 1
            return None
        rec = self.host.net.flow_for(pkt)
        iss = cookie_value(0xBEEF, key) % 100000
        rx = TcpReceiver(self.host, self, key, self.cfg, pkt.seq + 1, iss, rec)
        self.half_open[key] = rx
        self.host.conns[key] = rx
        rx.send_synack()
        return None

    def syn_cookie_handshake(self, syn: Packet) -> Packet:
        key = self._key(syn)
        self.cookies.issued += 1
        pkt = Packet(self.host.name, syn.src, syn.dport, syn.sport, Proto.TCP,
                     seq=self.cookies.cookie(key), ack=syn.seq + 1, flags=SYN | ACK,
                     rwnd=self.cfg.rwnd_field)
        self.host.transmit(pkt)
        return pkt

    def verify_cookie(self, ack: Packet) -> bool:
        key = self._key(ack)
        if not self.cookies.verify(key, ack.ack):
            return False
        if len(self.connections) >= self.max_connections:
            return False
        rx = TcpReceiver(self.host, self, key, self.cfg, ack.seq, ack.ack - 1,
                         self.host.net.flow_for(ack))
        rx.state = ConnState.ESTABLISHED
        self.connections[key] = rx
        self.host.conns[key] = rx
        self.peak_connections = max(self.peak_connections, len(self.connections))
        return True

    def on_stray_ack(self, pkt: Packet) -> bool:
        if self.cookies.enabled and self.verify_cookie(pkt):
            rx = self.connections[self._key(pkt)]
            if pkt.payload_len > 0 or pkt.flags & FIN:
                rx.receive(pkt)
            return True
        return False

    def promote(self, rx: TcpReceiver) -> None:
        self.half_open.pop(rx.key, None)
        if len(self.connections) >= self.max_connections:
            self.host.conns.pop(rx.key, None)
            rx.state = ConnState.CLOSED
            return
        rx.establish()
        self.connections[rx.key] = rx
        self.peak_connections = max(self.peak_connections, len(self.connections))

    def drop_half_open(self, rx: TcpReceiver) -> None:
        self.half_open.pop(rx.key, None)
        self.host.conns.pop(rx.key, None)
        rx.state = ConnState.CLOSED

    def release(self, rx: TcpReceiver) -> None:
        self.connections.pop(rx.key, None)
        self.half_open.pop(rx.key, None)
        self.host.conns.pop(rx.key, None)
