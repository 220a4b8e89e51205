"""Discrete-event engine, named RNG streams and trace recording.

Time is an integer count of nanoseconds. Events at equal times fire in the
order they were scheduled.
"""

from __future__ import annotations

import enum
import hashlib
import heapq
import math
import random
import zlib
from dataclasses import dataclass
from typing import Any, Callable, Iterable, TextIO

import numpy as np

NS = 1
US = 1_000
MS = 1_000_000
SEC = 1_000_000_000


def seconds(t: float) -> int:
    return int(round(t * SEC))


def millis(t: float) -> int:
    return int(round(t * MS))


def to_seconds(t: int) -> float:
    return t / SEC


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled before the current clock."""


class EventKind(enum.Enum):
    PACKET_ARRIVAL = "packet-arrival"
    TIMER_EXPIRY = "timer-expiry"
    PROBE_LAUNCH = "probe-launch"
    APP_SEND = "app-send"


class Event:
    __slots__ = ("fire_time", "target", "kind", "payload", "action", "cancelled")

    def __init__(
        self,
        fire_time: int,
        action: Callable[[Any], None],
        payload: Any = None,
        target: str | None = None,
        kind: EventKind = EventKind.TIMER_EXPIRY,
    ):
        self.fire_time = fire_time
        self.action = action
        self.payload = payload
        self.target = target
        self.kind = kind
        self.cancelled = False

    def __repr__(self) -> str:
        return f"Event(t={self.fire_time}, kind={self.kind.value}, target={self.target})"


@dataclass
class RunStats:
    processed: int
    pending: int
    cancelled: int
    scheduled: int
    clock: int


class Simulator:
    """Single-threaded event loop over a binary heap."""

    def __init__(self) -> None:
        self.now = 0
        self._heap: list[tuple[int, int, Event]] = []
        self._seq = 0
        self.scheduled = 0
        self.processed = 0
        self.cancelled = 0
        self._cancelled_pending = 0

    def schedule(self, event: Event) -> Event:
        if event.fire_time < self.now:
            raise SchedulingError(
                f"event at t={event.fire_time} scheduled in the past (now={self.now})"
            )
        self._seq += 1
        heapq.heappush(self._heap, (event.fire_time, self._seq, event))
        self.scheduled += 1
        return event

    def at(self, time: int, action: Callable[[Any], None], payload: Any = None,
           target: str | None = None, kind: EventKind = EventKind.TIMER_EXPIRY) -> Event:
        return self.schedule(Event(time, action, payload, target, kind))

    def after(self, delay: int, action: Callable[[Any], None], payload: Any = None,
              target: str | None = None, kind: EventKind = EventKind.TIMER_EXPIRY) -> Event:
        return self.schedule(Event(self.now + delay, action, payload, target, kind))

    def cancel(self, event: Event | None) -> None:
        if event is None or event.cancelled:
            return
        event.cancelled = True
        self.cancelled += 1
        self._cancelled_pending += 1

    @property
    def pending(self) -> int:
        return len(self._heap) - self._cancelled_pending

    def run_until(self, t_end: int) -> RunStats:
        heap = self._heap
        pop = heapq.heappop
        while heap and heap[0][0] <= t_end:
            t, _, ev = pop(heap)
            if ev.cancelled:
                self._cancelled_pending -= 1
                continue
            self.now = t
            self.processed += 1
            ev.action(ev.payload)
        if heap:
            self.now = max(self.now, t_end)
        return self.stats()

    def run(self) -> RunStats:
        return self.run_until(math.inf)  # type: ignore[arg-type]

    def stats(self) -> RunStats:
        return RunStats(self.processed, self.pending, self.cancelled, self.scheduled, self.now)


def _derive_seed(seed: int, label: str) -> int:
    h = hashlib.blake2b(f"{seed}/{label}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "big")


class RngStream:
    """A reproducible random stream identified by (seed, label)."""

    def __init__(self, seed: int, label: str):
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.label = label
        self._derived = _derive_seed(seed, label)
        self._rand = random.Random(self._derived)
        self._np: np.random.Generator | None = None

    def uniform01(self) -> float:
        return self._rand.random()

    def uniform_int(self, lo: int, hi: int) -> int:
        """Uniform integer in the inclusive range [lo, hi]."""
        if hi < lo:
            raise ValueError(f"empty range [{lo}, {hi}]")
        return self._rand.randint(lo, hi)

    def bernoulli(self, p: float) -> bool:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"bernoulli probability must lie in [0, 1], got {p}")
        if p == 0.0:
            return False
        if p == 1.0:
            return True
        return self._rand.random() < p

    def exponential(self, rate: float) -> float:
        if not rate > 0:
            raise ValueError(f"exponential rate must be positive, got {rate}")
        return self._rand.expovariate(rate)

    def choice(self, seq):
        return self._rand.choice(seq)

    def shuffle(self, seq: list) -> None:
        self._rand.shuffle(seq)

    def draw(self, kind: str, *params: float):
        """Dispatch by distribution name: uniform01, uniform_int, bernoulli, exponential."""
        try:
            fn = {
                "uniform01": self.uniform01,
                "uniform_int": self.uniform_int,
                "bernoulli": self.bernoulli,
                "exponential": self.exponential,
            }[kind]
        except KeyError:
            raise ValueError(f"unknown distribution {kind!r}") from None
        return fn(*params)

    def numpy(self) -> np.random.Generator:
        if self._np is None:
            self._np = np.random.Generator(np.random.PCG64(self._derived))
        return self._np

    def spawn(self, label: str) -> RngStream:
        return RngStream(self.seed, f"{self.label}/{label}")


class RngStreams:
    """Factory handing out one stream per concern, cached by label."""

    def __init__(self, seed: int):
        self.seed = seed
        self._streams: dict[str, RngStream] = {}

    def __getitem__(self, label: str) -> RngStream:
        s = self._streams.get(label)
        if s is None:
            s = self._streams[label] = RngStream(self.seed, label)
        return s


class TraceAction(enum.Enum):
    FORWARD = "forward"
    DROP = "drop"
    MODIFY = "modify"
    CLONE = "clone"
    MARK = "mark"


@dataclass(frozen=True)
class TraceRecord:
    time: int
    seq: int
    node: str
    action: TraceAction
    digest: str
    cause: str = ""

    def line(self) -> str:
        cols = [str(self.time), self.node, self.action.value, self.digest]
        if self.cause:
            cols.append(self.cause)
        return "\t".join(cols)


def header_digest(fields: Iterable[Any]) -> str:
    return f"{zlib.crc32(repr(tuple(fields)).encode()):08x}"


class Tracer:
    """Collects dataplane actions.

    Attacker actions (cause starting with ``attack:``) are always counted so
    tamper budgets can be audited even with full tracing disabled.
    """

    def __init__(self, sim: Simulator, enabled: bool = False):
        self.sim = sim
        self.enabled = enabled
        self.records: list[TraceRecord] = []
        self.attack_actions: dict[tuple[str, str], int] = {}
        self._seq = 0

    def emit(self, node: str, action: TraceAction, digest: str, cause: str = "") -> None:
        if cause.startswith("attack:"):
            key = (node, action.value)
            self.attack_actions[key] = self.attack_actions.get(key, 0) + 1
        if not self.enabled:
            return
        self._seq += 1
        self.records.append(TraceRecord(self.sim.now, self._seq, node, action, digest, cause))

    @property
    def attacker_action_count(self) -> int:
        return sum(self.attack_actions.values())

    def lines(self) -> list[str]:
        return [r.line() for r in self.records]

    def write(self, fh: TextIO) -> None:
        for r in self.records:
            fh.write(r.line())
            fh.write("\n")
