"""Coflow failure under a packet-drop budget.

``n`` coflows each fan out ``m`` single-packet requests, every request sent
``r`` times (hedging). A request fails when all its replicas are dropped; a
coflow fails when at least ``F`` of its requests fail. One attacker-held
switch sees the whole packet stream and may drop at most ``B = n*r*m*D``
packets.

Trials never materialize the full stream. Stream order is random (each
request gets a uniform key, its replicas are adjacent), so an attacker only
needs the packets it might act on: for the classifier attacker those are the
packets it *observes* as belonging to a targeted coflow, which are generated
lazily in key order per coflow.
"""

from __future__ import annotations

import csv
import enum
import heapq
import io
import math
import random
import statistics
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .simcore import RngStream


class Strategy(enum.Enum):
    PERFECT = "perfect"  # knows every packet's true ids
    CLASSIFIER = "classifier"  # acts on possibly misclassified ids, fixed target pairs
    CLASSIFIER_ANY = "classifier_any"  # same, but any request of a target coflow counts
    RANDOM = "random"  # spends the budget on uniformly random packets


@dataclass(frozen=True)
class CoflowConfig:
    n: int = 10_000
    m: int = 500
    r: int = 1
    F: int = 1
    D: float = 1e-4
    p_mc: float = 0.0
    trials: int = 30
    seed: int = 1

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("need n >= 1 coflows and m >= 1 requests")
        if not 1 <= self.F <= self.m:
            raise ValueError(f"F must lie in [1, m], got {self.F}")
        if self.r not in (1, 2):
            raise ValueError(f"replication factor must be 1 or 2, got {self.r}")
        if not 0.0 <= self.p_mc <= 1.0:
            raise ValueError(f"p_mc must lie in [0, 1], got {self.p_mc}")
        if not 0.0 <= self.D <= 1.0:
            raise ValueError(f"drop budget D must lie in [0, 1], got {self.D}")
        if self.trials < 1:
            raise ValueError("need at least one trial")

    @property
    def packets(self) -> int:
        return self.n * self.r * self.m

    @property
    def budget(self) -> int:
        # decimal D (1e-4) taken at face value, not at its binary approximation
        return math.floor(self.packets * Fraction(repr(self.D)))

    @property
    def targeted(self) -> int:
        """Coflows a perfect-knowledge attacker can afford to fail."""
        return min(self.n, self.budget // (self.r * self.F))


@dataclass
class TrialResult:
    failed_fraction: float
    stddev: float
    budget_used: float
    budget: int
    per_trial: list[float] = field(default_factory=list)
    drops_per_trial: list[int] = field(default_factory=list)


def classify(true_ids: tuple[int, int], p_mc: float, rng: random.Random, n: int,
             m: int) -> tuple[int, int]:
    """Observed (coflow, request) ids: the truth w.p. 1 - p_mc, else uniform."""
    if rng.random() < p_mc:
        return rng.randrange(n), rng.randrange(m)
    return true_ids


def classify_many(coflows: np.ndarray, reqs: np.ndarray, p_mc: float,
                  gen: np.random.Generator, n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    wrong = gen.random(len(coflows)) < p_mc
    oc = np.where(wrong, gen.integers(0, n, len(coflows)), coflows)
    oq = np.where(wrong, gen.integers(0, m, len(coflows)), reqs)
    return oc, oq


def _failed_coflows(drops: list[tuple[int, int, int]], r: int, F: int) -> int:
    """Count coflows with >= F requests whose r replicas were all dropped."""
    replicas: dict[tuple[int, int], set[int]] = {}
    for c, q, j in drops:
        replicas.setdefault((c, q), set()).add(j)
    per_coflow: dict[int, int] = {}
    for (c, _), js in replicas.items():
        if len(js) >= r:
            per_coflow[c] = per_coflow.get(c, 0) + 1
    return sum(1 for k in per_coflow.values() if k >= F)


def _order_stats(count: int, rng: random.Random):
    """Ascending keys of ``count`` iid uniforms, generated one at a time."""
    u = 0.0
    for left in range(count, 0, -1):
        u = 1.0 - (1.0 - u) * rng.random() ** (1.0 / left)
        yield u


def _trial_perfect(cfg: CoflowConfig) -> tuple[int, int]:
    t = cfg.targeted
    return t, t * cfg.r * cfg.F


def _trial_random(cfg: CoflowConfig, gen: np.random.Generator) -> tuple[int, int]:
    k = min(cfg.budget, cfg.packets)
    if k == 0:
        return 0, 0
    idx = gen.choice(cfg.packets, k, replace=False)
    per_coflow = cfg.m * cfg.r
    drops = [(int(i // per_coflow), int((i // cfg.r) % cfg.m), int(i % cfg.r)) for i in idx]
    return _failed_coflows(drops, cfg.r, cfg.F), k


def _classifier_drops(cfg: CoflowConfig, rng: random.Random, c: int, width: int,
                      fakes: int) -> list[tuple[float, tuple[int, int, int]]]:
    """Drops the attacker issues for target coflow ``c`` (before the budget cut).

    Observable requests of ``c`` are ids ``0..width-1``. The attacker drops a
    packet observed as (c, q) while fewer than r drops are tallied on (c, q)
    and stops once F observed requests reach r drops. ``fakes`` packets of
    random requests are misclassified into those ids.
    """
    n, m, r, F, p = cfg.n, cfg.m, cfg.r, cfg.F, cfg.p_mc
    # true requests in stream order; ids are arrival ranks, which is a fair
    # relabeling because fake observations pick ids uniformly
    stream = heapq.merge(((k, 0, q) for q, k in enumerate(_order_stats(width, rng))),
                         ((k, 1, -1) for k in _order_stats(fakes, rng)))
    out = []
    tally: dict[int, int] = {}
    done = 0
    for key, is_fake, q in stream:
        if is_fake:
            events = [(rng.randrange(width),
                       (rng.randrange(n), rng.randrange(m), rng.randrange(r)))]
        else:
            events = [(q, (c, q, j)) for j in range(r) if p == 0 or rng.random() >= p]
        for oq, truth in events:
            t = tally.get(oq, 0)
            if t >= r:
                continue
            out.append((key, truth))
            tally[oq] = t + 1
            if t + 1 == r:
                done += 1
                if done >= F:
                    return out
    return out


def _trial_classifier(cfg: CoflowConfig, gen: np.random.Generator, rng: random.Random,
                      any_request: bool = False) -> tuple[int, int]:
    """Targets coflows 0..T-1, T = floor(B / (r*F)).

    By default the targets are the pairs (c, 0..F-1) of each target coflow;
    with ``any_request`` every request of a target coflow is fair game.
    Decisions per coflow depend only on what the attacker observes, so the
    global budget is applied afterwards by keeping the earliest B drops in
    stream order.
    """
    targets = cfg.targeted
    budget = cfg.budget
    if targets == 0 or budget == 0:
        return 0, 0
    width = cfg.m if any_request else cfg.F
    share = cfg.p_mc * width / (cfg.n * cfg.m)  # chance a packet is observed in the target set
    fake_counts = gen.binomial(cfg.packets, share, size=targets) if share > 0 else [0] * targets
    drops: list[tuple[float, tuple[int, int, int]]] = []
    for c in range(targets):
        drops += _classifier_drops(cfg, rng, c, width, int(fake_counts[c]))
    drops.sort(key=lambda d: d[0])
    kept = [truth for _, truth in drops[:budget]]
    return _failed_coflows(kept, cfg.r, cfg.F), len(kept)


def trial_streams(cfg: CoflowConfig, trial: int) -> tuple[np.random.Generator, random.Random]:
    s = RngStream(cfg.seed, f"coflow/{trial}")
    return s.numpy(), random.Random(s.uniform_int(0, 2**63 - 1))


def run_one(cfg: CoflowConfig, strategy: Strategy, trial: int) -> tuple[int, int]:
    """(failed coflows, drops issued) for one trial."""
    if strategy is Strategy.PERFECT:
        return _trial_perfect(cfg)
    gen, rng = trial_streams(cfg, trial)
    if strategy is Strategy.RANDOM:
        return _trial_random(cfg, gen)
    return _trial_classifier(cfg, gen, rng, any_request=strategy is Strategy.CLASSIFIER_ANY)


def run_trial(cfg: CoflowConfig, strategy: Strategy | str = Strategy.CLASSIFIER) -> TrialResult:
    strategy = Strategy(strategy)
    fracs, used = [], []
    for t in range(cfg.trials):
        failed, drops = run_one(cfg, strategy, t)
        fracs.append(failed / cfg.n)
        used.append(drops)
    sd = statistics.stdev(fracs) if len(fracs) > 1 else 0.0
    # exact mean: identical per-trial values must average to themselves
    return TrialResult(float(statistics.mean(fracs)), sd, statistics.fmean(used), cfg.budget,
                       fracs, used)


def analytic_random_oracle(m: int, F: int, drop_prob: float, r: int = 1) -> float:
    """P(Binomial(m, drop_prob**r) >= F): coflow failure under iid random loss."""
    q = drop_prob ** r
    if q <= 0:
        return 0.0
    if F == 1:
        return -math.expm1(m * math.log1p(-q)) if q < 1 else 1.0
    below = sum(math.comb(m, i) * q ** i * (1 - q) ** (m - i) for i in range(F))
    return max(0.0, 1.0 - below)


SWEEP_COLUMNS = ["p_mc", "r", "F", "m", "D", "n", "mean_failed_fraction", "stddev", "budget_used"]


def sweep(base: CoflowConfig, p_mcs: list[float], *, rs: list[int], Fs: list[int],
          ms: list[int], strategy: Strategy | str = Strategy.CLASSIFIER) -> list[dict]:
    rows = []
    for r in rs:
        for F in Fs:
            for m in ms:
                for p in p_mcs:
                    cfg = replace(base, r=r, F=F, m=m, p_mc=p)
                    res = run_trial(cfg, strategy)
                    rows.append({"p_mc": p, "r": r, "F": F, "m": m, "D": cfg.D, "n": cfg.n,
                                 "mean_failed_fraction": res.failed_fraction,
                                 "stddev": res.stddev, "budget_used": res.budget_used})
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()
