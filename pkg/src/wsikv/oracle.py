"""Status oracle: conflict detection, commit timestamps, transaction outcomes.

Commit requests carry row-identifier sets. Under snapshot isolation the
write set is checked against the last committer of each row; under
write-snapshot isolation the read set is checked instead and read-only
requests (empty write set) commit without any checking. A bounded variant
tracks only the most recently committed rows and keeps a watermark t_max,
the largest commit timestamp ever evicted: a request touching an untracked
row pessimistically aborts when its start timestamp is below the watermark.
"""

from __future__ import annotations

import enum
import heapq
import logging
import threading
from dataclasses import dataclass

from .timestamps import TimestampOracle
from .wal import KIND_ABORT, KIND_COMMIT, WalRecord

log = logging.getLogger(__name__)

RowId = bytes


class OracleError(RuntimeError):
    pass


class DuplicateRequestError(OracleError):
    """A commit request arrived for a start timestamp that is already decided."""


class AlreadyCommittedError(OracleError):
    """report_abort targeted a committed transaction."""


class PolicyError(OracleError):
    """Request used the wrong entry point for this oracle's policy/capacity."""


class IsolationPolicy(enum.Enum):
    SI = "si"
    WSI = "wsi"

    @classmethod
    def from_string(cls, s: str) -> "IsolationPolicy":
        try:
            return cls(s.lower())
        except ValueError:
            raise ValueError(f"unknown isolation policy {s!r}") from None


class TxnState(enum.Enum):
    COMMITTED = "committed"
    ABORTED = "aborted"
    IN_FLIGHT = "in-flight"


@dataclass(frozen=True)
class TxnStatus:
    state: TxnState
    commit_ts: int | None = None


@dataclass(frozen=True)
class CommitDecision:
    committed: bool
    commit_ts: int | None = None

    def __str__(self) -> str:
        return f"committed({self.commit_ts})" if self.committed else "aborted"


class CommitTable:
    """Last-committer map plus transaction outcome records.

    When capacity is bounded, inserting beyond it evicts the entries with the
    smallest commit timestamps and folds them into t_max, so t_max is exactly
    the boundary below which per-row information has been discarded.
    """

    def __init__(self, capacity: int | None = None):
        if capacity is not None and capacity < 1:
            raise ValueError("capacity must be positive or None")
        self.capacity = capacity
        self.last_commit: dict[RowId, int] = {}
        self.t_max = 0
        self.commit_records: dict[int, int] = {}
        self.aborted: set[int] = set()
        self._by_commit: list[tuple[int, RowId]] = []  # eviction order

    def decided(self, start_ts: int) -> bool:
        return start_ts in self.commit_records or start_ts in self.aborted

    def apply_commit(self, start_ts: int, commit_ts: int, rows) -> None:
        self.commit_records[start_ts] = commit_ts
        for row in rows:
            self.last_commit[row] = commit_ts
            heapq.heappush(self._by_commit, (commit_ts, row))
        self._evict()

    def record_abort(self, start_ts: int) -> None:
        self.aborted.add(start_ts)

    def _evict(self) -> None:
        if self.capacity is None:
            return
        while len(self.last_commit) > self.capacity:
            ts, row = heapq.heappop(self._by_commit)
            if self.last_commit.get(row) != ts:
                continue  # superseded by a newer commit of the same row
            del self.last_commit[row]
            if ts > self.t_max:
                self.t_max = ts


class StatusOracle:
    """Decides commit requests inside one critical section per request.

    The conflict check, commit-timestamp draw, and last-committer update form
    one atomic step. Decisions are appended to the write-ahead log inside the
    critical section and the caller only observes a decision after its record
    is durable.
    """

    def __init__(
        self,
        timestamps: TimestampOracle,
        policy: IsolationPolicy = IsolationPolicy.WSI,
        *,
        capacity: int | None = None,
        wal=None,
        table: CommitTable | None = None,
    ):
        self.timestamps = timestamps
        self.policy = policy
        self.wal = wal
        self.table = table if table is not None else CommitTable(capacity=capacity)
        self._lock = threading.Lock()
        self.committed_count = 0
        self.read_only_commits = 0
        self.conflict_aborts = 0
        self.pessimistic_aborts = 0
        self._pessimistic: set[int] = set()

    # -- commit entry points -------------------------------------------------

    def commit_si(self, start_ts: int, write_set) -> CommitDecision:
        self._require(IsolationPolicy.SI, unbounded=True)
        return self._decide(start_ts, frozenset(write_set), frozenset())

    def commit_wsi(self, start_ts: int, write_set, read_set) -> CommitDecision:
        self._require(IsolationPolicy.WSI, unbounded=True)
        return self._decide(start_ts, frozenset(write_set), frozenset(read_set))

    def commit_bounded(self, start_ts: int, write_set, read_set) -> CommitDecision:
        return self._decide(start_ts, frozenset(write_set), frozenset(read_set))

    def submit(self, start_ts: int, write_set, read_set=()) -> CommitDecision:
        """Route to the policy- and capacity-appropriate commit operation."""
        if self.table.capacity is not None:
            return self.commit_bounded(start_ts, write_set, read_set)
        if self.policy is IsolationPolicy.SI:
            return self.commit_si(start_ts, write_set)
        return self.commit_wsi(start_ts, write_set, read_set)

    # -- status --------------------------------------------------------------

    def query_status(self, start_ts: int) -> TxnStatus:
        with self._lock:
            tc = self.table.commit_records.get(start_ts)
            if tc is not None:
                return TxnStatus(TxnState.COMMITTED, tc)
            if start_ts in self.table.aborted:
                return TxnStatus(TxnState.ABORTED)
            return TxnStatus(TxnState.IN_FLIGHT)

    def commit_ts_of(self, start_ts: int) -> int | None:
        # lock-free read path for snapshot reads; outcomes are write-once
        return self.table.commit_records.get(start_ts)

    def is_aborted(self, start_ts: int) -> bool:
        return start_ts in self.table.aborted

    def was_pessimistic(self, start_ts: int) -> bool:
        """Whether an abort of this transaction came from the t_max check."""
        return start_ts in self._pessimistic

    def report_abort(self, start_ts: int) -> None:
        """Record a client-side abandonment; idempotent."""
        ack = None
        with self._lock:
            if start_ts in self.table.commit_records:
                raise AlreadyCommittedError(
                    f"transaction {start_ts} already committed"
                )
            if start_ts not in self.table.aborted:
                self.table.record_abort(start_ts)
                ack = self._append(WalRecord(KIND_ABORT, start_ts))
        if ack is not None:
            ack.wait()

    # -- internals -----------------------------------------------------------

    def _require(self, policy: IsolationPolicy, unbounded: bool) -> None:
        if self.policy is not policy:
            raise PolicyError(f"oracle is configured for {self.policy.value}")
        if unbounded and self.table.capacity is not None:
            raise PolicyError("bounded oracles take requests via commit_bounded")

    def _decide(
        self, start_ts: int, write_set: frozenset, read_set: frozenset
    ) -> CommitDecision:
        ack = None
        with self._lock:
            table = self.table
            if table.decided(start_ts):
                raise DuplicateRequestError(
                    f"transaction {start_ts} already has a decision"
                )
            if self.policy is IsolationPolicy.WSI and not write_set:
                # Read-only fast path: committed with no conflict check.
                if read_set:
                    log.warning(
                        "read-only commit request %d carried %d read rows; "
                        "clients should send empty sets",
                        start_ts,
                        len(read_set),
                    )
                decision, ack = self._commit_locked(start_ts, frozenset())
            else:
                checked = read_set if self.policy is IsolationPolicy.WSI else write_set
                conflict = False
                pessimistic = False
                # sorted scan: abort classification must not depend on set order
                for row in sorted(checked):
                    last = table.last_commit.get(row)
                    if last is not None:
                        if last > start_ts:
                            conflict = True
                            break
                    elif table.t_max > start_ts:
                        conflict = True
                        pessimistic = True
                        break
                if conflict:
                    table.record_abort(start_ts)
                    if pessimistic:
                        self.pessimistic_aborts += 1
                        self._pessimistic.add(start_ts)
                    else:
                        self.conflict_aborts += 1
                    ack = self._append(WalRecord(KIND_ABORT, start_ts))
                    decision = CommitDecision(False)
                else:
                    decision, ack = self._commit_locked(start_ts, write_set)
        if ack is not None:
            ack.wait()  # write-ahead discipline: durable before observable
        return decision

    def _commit_locked(self, start_ts: int, write_set: frozenset):
        tc = self.timestamps.next()
        rows = tuple(sorted(write_set))
        self.table.apply_commit(start_ts, tc, rows)
        self.committed_count += 1
        if not write_set:
            self.read_only_commits += 1
        ack = self._append(WalRecord(KIND_COMMIT, start_ts, tc, rows))
        return CommitDecision(True, tc), ack

    def _append(self, rec: WalRecord):
        return self.wal.append(rec) if self.wal is not None else None
