"""Flow-size distributions and Poisson flow arrivals."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from importlib import resources

from .network import APP_PORT, FlowSpec
from .simcore import SEC, RngStream


@dataclass(frozen=True)
class EmpiricalCdf:
    """Piecewise-linear CDF over flow sizes in bytes."""

    sizes: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.sizes) != len(self.probs) or len(self.sizes) < 2:
            raise ValueError("a CDF table needs at least two (size, prob) rows")
        if any(b < a for a, b in zip(self.sizes, self.sizes[1:])):
            raise ValueError("CDF sizes must be non-decreasing")
        if any(b < a for a, b in zip(self.probs, self.probs[1:])):
            raise ValueError("CDF probabilities must be non-decreasing")
        if abs(self.probs[-1] - 1.0) > 1e-9 or self.probs[0] < 0:
            raise ValueError("CDF must end at probability 1")

    def sample(self, u: float) -> float:
        i = bisect.bisect_left(self.probs, u)
        if i == 0:
            return self.sizes[0]
        p0, p1 = self.probs[i - 1], self.probs[i]
        x0, x1 = self.sizes[i - 1], self.sizes[i]
        if p1 == p0:
            return x1
        return x0 + (x1 - x0) * (u - p0) / (p1 - p0)

    def mean(self) -> float:
        total = 0.0
        for i in range(1, len(self.sizes)):
            total += (self.probs[i] - self.probs[i - 1]) * (self.sizes[i] + self.sizes[i - 1]) / 2
        return total


def load_cdf_table(text: str) -> EmpiricalCdf:
    sizes, probs = [], []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        x, p = line.split()
        sizes.append(float(x))
        probs.append(float(p))
    return EmpiricalCdf(tuple(sizes), tuple(probs))


def websearch_cdf() -> EmpiricalCdf:
    text = resources.files("underradar").joinpath("data/websearch_cdf.txt").read_text()
    return load_cdf_table(text)


@dataclass(frozen=True)
class SizeDist:
    cdf: EmpiricalCdf | None = None
    constant: int | None = None
    scale: float = 1.0
    min_bytes: int = 1

    def draw(self, rng: RngStream) -> int:
        if self.constant is not None:
            return self.constant
        raw = self.cdf.sample(rng.uniform01()) * self.scale
        return max(self.min_bytes, int(round(raw)))

    def mean(self) -> float:
        if self.constant is not None:
            return float(self.constant)
        return max(self.min_bytes, self.cdf.mean() * self.scale)


def size_dist(name: str | int, scale: float = 1.0) -> SizeDist:
    if isinstance(name, int):
        return SizeDist(constant=name)
    if name == "websearch":
        return SizeDist(cdf=websearch_cdf(), scale=scale, min_bytes=100)
    raise ValueError(f"unknown size distribution {name!r}")


def poisson_flows(hosts: list[str], rng: RngStream, *, load: float, link_bps: float,
                  sizes: SizeDist, start: int, stop: int,
                  destinations: list[str] | None = None) -> list[FlowSpec]:
    """Per-host Poisson arrivals offering ``load`` x NIC capacity on average.

    Each source draws destinations uniformly from ``destinations`` (default:
    every other host).
    """
    if not 0 < load <= 1:
        raise ValueError("load must be in (0, 1]")
    rate = load * link_bps / (8 * sizes.mean())  # flows per second per host
    flows: list[FlowSpec] = []
    for src in hosts:
        pool = [d for d in (destinations or hosts) if d != src]
        if not pool:
            continue
        t = start
        while True:
            t += int(rng.exponential(rate) * SEC)
            if t >= stop:
                break
            flows.append(FlowSpec(src, rng.choice(pool), sizes.draw(rng), t, APP_PORT))
    flows.sort(key=lambda f: (f.start, f.src))
    return flows
