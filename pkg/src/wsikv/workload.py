"""YCSB-style transactional workload generation and measurement.

Two transaction shapes: read-only (all reads) and complex (each operation
independently read or write at 50/50). A complex workload is all complex
transactions; a mixed workload is half read-only, half complex. Every
transaction touches n rows, n uniform on [0, 20], drawn with replacement
from the configured key distribution.

Key distributions follow the YCSB conventions: `uniform`; `zipfian`, a
scrambled zipfian whose popular ranks are hashed across the whole key space
(drawn over a large virtual universe, which spreads and flattens the skew);
and `zipfian-latest`, a plain zipfian concentrated on the highest row ids,
standing in for the most recently inserted rows. The latest distribution is
therefore the sharpest and the most contended.
"""

from __future__ import annotations

import math
import random
import struct
import threading
import time
from dataclasses import dataclass, field, fields

from .oracle import IsolationPolicy, StatusOracle
from .timestamps import TimestampOracle
from .txn import Database
from .wal import WriteAheadLog

MIXES = ("complex", "mixed")
DISTRIBUTIONS = ("uniform", "zipfian", "zipfian-latest")

CSV_HEADER = (
    "policy,distribution,mix,clients,committed,aborted,"
    "abort_rate,pessimistic_aborts,throughput"
)
BENCH_CSV_HEADER = "policy,clients,decisions_per_sec,p50_us,p99_us,pessimistic_aborts"

_ROW = struct.Struct("<q")


@dataclass(frozen=True)
class WorkloadSpec:
    key_space: int
    mix: str = "mixed"
    distribution: str = "uniform"
    zipf_constant: float = 0.99
    ops_per_txn_max: int = 20
    read_fraction: float = 0.5
    seed: int = 0
    txn_count: int = 10_000
    client_count: int = 1

    def __post_init__(self):
        if self.key_space < 1:
            raise ValueError("key_space must be positive")
        if self.mix not in MIXES:
            raise ValueError(f"mix must be one of {MIXES}")
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"distribution must be one of {DISTRIBUTIONS}")
        if not 0.0 < self.zipf_constant < 1.0:
            raise ValueError("zipf_constant must be in (0, 1)")
        if self.ops_per_txn_max < 0:
            raise ValueError("ops_per_txn_max must be non-negative")
        if self.txn_count < 0 or self.client_count < 1:
            raise ValueError("txn_count must be >= 0 and client_count >= 1")

    @classmethod
    def from_config(cls, path) -> "WorkloadSpec":
        """Load from a plain key=value file; # starts a comment."""
        kinds = {f.name: f.type for f in fields(cls)}
        values = {}
        with open(path, "r", encoding="utf-8") as fp:
            for lineno, raw in enumerate(fp, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected key=value")
                key, value = (part.strip() for part in line.split("=", 1))
                if key not in kinds:
                    raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
                if key in ("mix", "distribution"):
                    values[key] = value
                elif key == "zipf_constant" or key == "read_fraction":
                    values[key] = float(value)
                else:
                    values[key] = int(value)
        return cls(**values)


# -- key distributions ---------------------------------------------------------

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

_VIRTUAL_UNIVERSE = 10_000_000_000
_EXACT_ZETA_CUTOFF = 10_000
_zeta_cache: dict[tuple[int, float], float] = {}


def _fnv64(value: int) -> int:
    """FNV-1a over the 8 little-endian bytes of a 64-bit integer."""
    h = _FNV_OFFSET
    for _ in range(8):
        h = ((h ^ (value & 0xFF)) * _FNV_PRIME) & _MASK64
        value >>= 8
    return h


def _zetan(n: int, theta: float) -> float:
    """Sum of 1/i**theta for i in 1..n; Euler-Maclaurin tail beyond a cutoff."""
    key = (n, theta)
    cached = _zeta_cache.get(key)
    if cached is not None:
        return cached
    m = min(n, _EXACT_ZETA_CUTOFF)
    total = math.fsum(i**-theta for i in range(1, m + 1))
    if n > m:
        s = theta
        total += (n ** (1 - s) - m ** (1 - s)) / (1 - s)
        total += (n**-s - m**-s) / 2.0
        total -= s * (n ** (-s - 1) - m ** (-s - 1)) / 12.0
    _zeta_cache[key] = total
    return total


class _Zipfian:
    """Rank generator over [0, n): rank 0 is the most popular item."""

    def __init__(self, n: int, theta: float):
        self.n = n
        self.theta = theta
        self.alpha = 1.0 / (1.0 - theta)
        self.zetan = _zetan(n, theta)
        self.zeta2 = 1.0 + 0.5**theta
        self.eta = (1.0 - (2.0 / n) ** (1.0 - theta)) / (1.0 - self.zeta2 / self.zetan)

    def next(self, rng: random.Random) -> int:
        u = rng.random()
        uz = u * self.zetan
        if uz < 1.0:
            return 0
        if uz < self.zeta2:
            return 1
        return min(self.n - 1, int(self.n * (self.eta * u - self.eta + 1.0) ** self.alpha))


class UniformKeys:
    def __init__(self, key_space: int):
        self.key_space = key_space

    def next(self, rng: random.Random) -> int:
        return rng.randrange(self.key_space)


class ZipfianKeys:
    """Scrambled zipfian: popular ranks of a large virtual universe hashed
    onto the key space."""

    def __init__(self, key_space: int, theta: float):
        self.key_space = key_space
        self._ranks = _Zipfian(max(_VIRTUAL_UNIVERSE, key_space), theta)

    def next(self, rng: random.Random) -> int:
        return _fnv64(self._ranks.next(rng)) % self.key_space


class ZipfianLatestKeys:
    """Plain zipfian with popularity concentrated on the highest row ids."""

    def __init__(self, key_space: int, theta: float):
        self.key_space = key_space
        self._ranks = _Zipfian(key_space, theta)

    def next(self, rng: random.Random) -> int:
        return self.key_space - 1 - self._ranks.next(rng)


def make_distribution(spec: WorkloadSpec):
    if spec.distribution == "uniform":
        return UniformKeys(spec.key_space)
    if spec.distribution == "zipfian":
        return ZipfianKeys(spec.key_space, spec.zipf_constant)
    return ZipfianLatestKeys(spec.key_space, spec.zipf_constant)


def generate_txn(spec: WorkloadSpec, rng: random.Random, dist=None) -> list[tuple[str, bytes]]:
    """One transaction script: ("r"|"w", row-id bytes) pairs in execution order."""
    if dist is None:
        dist = make_distribution(spec)
    n = rng.randint(0, spec.ops_per_txn_max)
    read_only = spec.mix == "mixed" and rng.random() < 0.5
    ops = []
    for _ in range(n):
        row = _ROW.pack(dist.next(rng))
        if read_only or rng.random() < spec.read_fraction:
            ops.append(("r", row))
        else:
            ops.append(("w", row))
    return ops


# -- metrics --------------------------------------------------------------------


class LatencyHistogram:
    """Power-of-two microsecond buckets; percentiles report bucket upper bounds."""

    __slots__ = ("counts", "total")

    def __init__(self):
        self.counts = [0] * 64
        self.total = 0

    def add(self, seconds: float) -> None:
        us = int(seconds * 1e6)
        self.counts[min(63, us.bit_length())] += 1
        self.total += 1

    def merge(self, other: "LatencyHistogram") -> None:
        for i, c in enumerate(other.counts):
            self.counts[i] += c
        self.total += other.total

    def percentile(self, q: float) -> float:
        """Upper bound (microseconds) of the bucket holding the q-quantile."""
        if self.total == 0:
            return 0.0
        need = max(1, math.ceil(q * self.total))
        seen = 0
        for i, c in enumerate(self.counts):
            seen += c
            if seen >= need:
                return float(2**i)
        return float(2**63)


@dataclass
class RunMetrics:
    committed: int = 0
    aborted: int = 0
    pessimistic_aborts: int = 0
    read_only_committed: int = 0
    read_only_aborted: int = 0
    wall_seconds: float = 0.0
    latency_us: dict[str, LatencyHistogram] = field(default_factory=dict)

    @property
    def abort_rate(self) -> float:
        total = self.committed + self.aborted
        return self.aborted / total if total else 0.0

    @property
    def throughput(self) -> float:
        return self.committed / self.wall_seconds if self.wall_seconds > 0 else 0.0

    def csv_row(self, spec: WorkloadSpec, policy: IsolationPolicy) -> str:
        return (
            f"{policy.value},{spec.distribution},{spec.mix},{spec.client_count},"
            f"{self.committed},{self.aborted},{self.abort_rate:.6f},"
            f"{self.pessimistic_aborts},{self.throughput:.1f}"
        )


# -- execution --------------------------------------------------------------------


def run(
    spec: WorkloadSpec,
    policy: IsolationPolicy,
    *,
    wal_path=None,
    capacity: int | None = None,
    gc_every: int | None = 2000,
) -> RunMetrics:
    """Execute txn_count scripts across client_count concurrent clients.

    Aborts are terminal for their script; nothing is retried.
    """
    wal = WriteAheadLog(wal_path) if wal_path else None
    db = Database(policy, capacity=capacity, wal=wal)
    clients = spec.client_count
    shares = [spec.txn_count // clients + (1 if i < spec.txn_count % clients else 0) for i in range(clients)]
    results = [None] * clients
    barrier = threading.Barrier(clients)

    def worker(idx: int) -> None:
        rng = random.Random(spec.seed * 1_000_003 + idx)
        dist = make_distribution(spec)
        hist = {k: LatencyHistogram() for k in ("begin", "read", "write", "commit")}
        committed = aborted = ro_committed = ro_aborted = 0
        value = _ROW.pack(idx)
        barrier.wait()
        for i in range(shares[idx]):
            script = generate_txn(spec, rng, dist)
            read_only = all(kind == "r" for kind, _ in script)
            t0 = time.perf_counter()
            h = db.begin()
            hist["begin"].add(time.perf_counter() - t0)
            for kind, row in script:
                t0 = time.perf_counter()
                if kind == "r":
                    h.read(row)
                    hist["read"].add(time.perf_counter() - t0)
                else:
                    h.write(row, value)
                    hist["write"].add(time.perf_counter() - t0)
            t0 = time.perf_counter()
            decision = h.commit()
            hist["commit"].add(time.perf_counter() - t0)
            if decision.committed:
                committed += 1
                ro_committed += read_only
            else:
                aborted += 1
                ro_aborted += read_only
            if gc_every and idx == 0 and (i + 1) % gc_every == 0:
                db.gc()
        results[idx] = (committed, aborted, ro_committed, ro_aborted, hist)

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(clients)]
    t_start = time.perf_counter()
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    wall = time.perf_counter() - t_start

    metrics = RunMetrics(wall_seconds=wall)
    metrics.latency_us = {k: LatencyHistogram() for k in ("begin", "read", "write", "commit")}
    for res in results:
        committed, aborted, ro_c, ro_a, hist = res
        metrics.committed += committed
        metrics.aborted += aborted
        metrics.read_only_committed += ro_c
        metrics.read_only_aborted += ro_a
        for k, hg in hist.items():
            metrics.latency_us[k].merge(hg)
    metrics.pessimistic_aborts = db.oracle.pessimistic_aborts
    if wal is not None:
        wal.close()
    return metrics


@dataclass
class BenchResult:
    policy: IsolationPolicy
    clients: int
    requests: int
    committed: int
    aborted: int
    pessimistic_aborts: int
    wall_seconds: float
    latency: LatencyHistogram

    @property
    def decisions_per_sec(self) -> float:
        return self.requests / self.wall_seconds if self.wall_seconds > 0 else 0.0

    def csv_row(self) -> str:
        return (
            f"{self.policy.value},{self.clients},{self.decisions_per_sec:.0f},"
            f"{self.latency.percentile(0.50):.0f},{self.latency.percentile(0.99):.0f},"
            f"{self.pessimistic_aborts}"
        )


def bench_oracle(
    policy: IsolationPolicy,
    clients: int,
    requests: int,
    rows_per_txn: int,
    *,
    key_space: int = 10_000,
    capacity: int | None = None,
    seed: int = 0,
) -> BenchResult:
    """Drive the status oracle directly with synthetic commit requests."""
    timestamps = TimestampOracle()
    oracle = StatusOracle(timestamps, policy, capacity=capacity)
    shares = [requests // clients + (1 if i < requests % clients else 0) for i in range(clients)]
    results = [None] * clients
    barrier = threading.Barrier(clients)

    def worker(idx: int) -> None:
        rng = random.Random(seed * 7_654_321 + idx)
        scripts = [
            (
                frozenset(_ROW.pack(rng.randrange(key_space)) for _ in range(rows_per_txn)),
                frozenset(_ROW.pack(rng.randrange(key_space)) for _ in range(rows_per_txn)),
            )
            for _ in range(shares[idx])
        ]
        hist = LatencyHistogram()
        committed = aborted = 0
        barrier.wait()
        for write_set, read_set in scripts:
            start = timestamps.next()
            t0 = time.perf_counter()
            decision = oracle.submit(start, write_set, read_set)
            hist.add(time.perf_counter() - t0)
            if decision.committed:
                committed += 1
            else:
                aborted += 1
        results[idx] = (committed, aborted, hist)

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(clients)]
    t_start = time.perf_counter()
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    wall = time.perf_counter() - t_start

    hist = LatencyHistogram()
    committed = aborted = 0
    for res in results:
        committed += res[0]
        aborted += res[1]
        hist.merge(res[2])
    return BenchResult(
        policy=policy,
        clients=clients,
        requests=requests,
        committed=committed,
        aborted=aborted,
        pessimistic_aborts=oracle.pessimistic_aborts,
        wall_seconds=wall,
        latency=hist,
    )
