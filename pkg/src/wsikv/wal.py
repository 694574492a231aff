"""Durable write-ahead log with size/time batched group commit and replay recovery.

On-disk layout: an 8-byte magic header, then framed records:

    u32 payload_length | u32 crc32(payload) | payload

Every payload starts with a u8 record kind and a u64 start timestamp.
Kind-specific fields follow: commit records carry a u64 commit timestamp, a
u32 row count, and u16-length-prefixed row identifiers; timestamp-reservation
records carry the u64 highest reserved timestamp; abort records carry nothing
extra. All integers are little-endian.

A checksum failure on the final record is a torn write and is dropped; a
failure anywhere earlier is corruption and recovery refuses to continue.
"""

from __future__ import annotations

import os
import struct
import threading
import time
import zlib
from dataclasses import dataclass

MAGIC = b"WSIWAL01"

KIND_COMMIT = 1
KIND_ABORT = 2
KIND_TS_RESERVE = 3

_FRAME = struct.Struct("<II")    # payload length, crc32(payload)
_PREFIX = struct.Struct("<BQ")   # kind, start timestamp
_COMMIT = struct.Struct("<QI")   # commit timestamp, row count
_ROWLEN = struct.Struct("<H")
_RESERVE = struct.Struct("<Q")   # highest reserved timestamp


class WalError(RuntimeError):
    pass


class WalClosedError(WalError):
    pass


class CorruptLogError(WalError):
    def __init__(self, offset: int, message: str):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


@dataclass(frozen=True)
class WalRecord:
    kind: int
    start_ts: int = 0
    commit_ts: int = 0
    rows: tuple[bytes, ...] = ()
    reserved_up_to: int = 0

    def encode(self) -> bytes:
        """Full frame (header + payload) for this record."""
        head = _PREFIX.pack(self.kind, self.start_ts)
        if self.kind == KIND_COMMIT:
            parts = [head, _COMMIT.pack(self.commit_ts, len(self.rows))]
            for row in self.rows:
                if len(row) > 0xFFFF:
                    raise ValueError("row identifier longer than 65535 bytes")
                parts.append(_ROWLEN.pack(len(row)))
                parts.append(row)
            payload = b"".join(parts)
        elif self.kind == KIND_ABORT:
            payload = head
        elif self.kind == KIND_TS_RESERVE:
            payload = head + _RESERVE.pack(self.reserved_up_to)
        else:
            raise ValueError(f"unknown record kind {self.kind}")
        return _FRAME.pack(len(payload), zlib.crc32(payload)) + payload


def decode_payload(payload: bytes) -> WalRecord:
    kind, start_ts = _PREFIX.unpack_from(payload, 0)
    off = _PREFIX.size
    if kind == KIND_COMMIT:
        commit_ts, count = _COMMIT.unpack_from(payload, off)
        off += _COMMIT.size
        rows = []
        for _ in range(count):
            (n,) = _ROWLEN.unpack_from(payload, off)
            off += _ROWLEN.size
            rows.append(payload[off : off + n])
            off += n
        if off != len(payload):
            raise ValueError("trailing bytes in commit record")
        return WalRecord(KIND_COMMIT, start_ts, commit_ts, tuple(rows))
    if kind == KIND_ABORT:
        if off != len(payload):
            raise ValueError("trailing bytes in abort record")
        return WalRecord(KIND_ABORT, start_ts)
    if kind == KIND_TS_RESERVE:
        (high,) = _RESERVE.unpack_from(payload, off)
        if off + _RESERVE.size != len(payload):
            raise ValueError("trailing bytes in reservation record")
        return WalRecord(KIND_TS_RESERVE, start_ts, reserved_up_to=high)
    raise ValueError(f"unknown record kind {kind}")


@dataclass(frozen=True)
class BatchPolicy:
    """Flush triggers: buffered bytes, or age of the oldest buffered record."""

    max_bytes: int = 1024
    max_delay: float = 0.005  # seconds


class DurableAck:
    """Completion handle for one appended record; set only after fsync."""

    __slots__ = ("_event", "_error")

    def __init__(self):
        self._event = threading.Event()
        self._error: Exception | None = None

    def done(self) -> bool:
        return self._event.is_set()

    def wait(self, timeout: float | None = None) -> None:
        if not self._event.wait(timeout):
            raise TimeoutError("wal flush did not complete in time")
        if self._error is not None:
            raise self._error

    def _complete(self, error: Exception | None = None) -> None:
        self._error = error
        self._event.set()


def _scan(data: bytes, path: str) -> tuple[list[WalRecord], int]:
    """Decode records, returning them plus the offset of the last intact one.

    A truncated or checksum-failing final record is discarded (torn write);
    the same anywhere else raises CorruptLogError.
    """
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise CorruptLogError(0, f"{path}: missing log magic")
    records = []
    off = len(MAGIC)
    n = len(data)
    while off < n:
        if off + _FRAME.size > n:
            break  # torn frame header
        length, crc = _FRAME.unpack_from(data, off)
        body_start = off + _FRAME.size
        if body_start + length > n:
            break  # torn payload
        payload = data[body_start : body_start + length]
        if zlib.crc32(payload) != crc:
            if body_start + length == n:
                break  # torn final record
            raise CorruptLogError(off, f"{path}: checksum mismatch before end of log")
        try:
            records.append(decode_payload(payload))
        except Exception as exc:
            raise CorruptLogError(off, f"{path}: undecodable record: {exc}") from exc
        off = body_start + length
    return records, off


def read_records(path: str | os.PathLike) -> list[WalRecord]:
    """All intact records in append order, dropping a torn tail if present."""
    with open(path, "rb") as f:
        data = f.read()
    records, _ = _scan(data, str(path))
    return records


def recover(path: str | os.PathLike, capacity: int | None = None):
    """Rebuild oracle state by replaying the log.

    Returns (CommitTable, highest persisted timestamp reservation). The table
    is built with the given capacity so eviction and the watermark replay the
    same way they were produced.
    """
    from .oracle import CommitTable  # deferred: oracle imports this module

    table = CommitTable(capacity=capacity)
    highest = 0
    for rec in read_records(path):
        if rec.kind == KIND_COMMIT:
            table.apply_commit(rec.start_ts, rec.commit_ts, rec.rows)
        elif rec.kind == KIND_ABORT:
            table.record_abort(rec.start_ts)
        else:
            highest = max(highest, rec.reserved_up_to)
    return table, highest


class WriteAheadLog:
    """Append-only log file with group commit.

    append() buffers the record and returns an ack that completes once the
    batch holding it is durably flushed (fsync). A batch flushes as soon as
    the buffer reaches max_bytes, or when its oldest record has been buffered
    for max_delay, whichever comes first. Acks complete in append order.

    Opening an existing log validates it and truncates a torn tail so new
    appends start at a clean boundary.
    """

    def __init__(self, path: str | os.PathLike, policy: BatchPolicy | None = None):
        self.path = str(path)
        self.policy = policy or BatchPolicy()
        self.flush_count = 0
        self._cond = threading.Condition()
        self._buf = bytearray()
        self._pending: list[DurableAck] = []
        self._oldest: float | None = None
        self._closed = False
        if os.path.exists(self.path) and os.path.getsize(self.path) > 0:
            with open(self.path, "rb") as f:
                data = f.read()
            _, end = _scan(data, self.path)
            self._file = open(self.path, "r+b")
            self._file.truncate(end)
            self._file.seek(end)
        else:
            self._file = open(self.path, "w+b")
            self._file.write(MAGIC)
            self._file.flush()
            os.fsync(self._file.fileno())
        self._flusher = threading.Thread(
            target=self._flush_loop, name="wal-flusher", daemon=True
        )
        self._flusher.start()

    def append(self, rec: WalRecord) -> DurableAck:
        frame = rec.encode()
        ack = DurableAck()
        with self._cond:
            if self._closed:
                raise WalClosedError("append to closed log")
            self._buf += frame
            self._pending.append(ack)
            if self._oldest is None:
                self._oldest = time.monotonic()
            if len(self._buf) >= self.policy.max_bytes:
                self._flush_locked()
            else:
                self._cond.notify_all()
        return ack

    def sync(self) -> None:
        """Flush any buffered records immediately."""
        with self._cond:
            self._flush_locked()

    def close(self) -> None:
        with self._cond:
            if self._closed:
                return
            self._flush_locked()
            self._closed = True
            self._cond.notify_all()
        self._flusher.join()
        self._file.close()

    @property
    def closed(self) -> bool:
        return self._closed

    def _flush_loop(self) -> None:
        while True:
            with self._cond:
                while not self._closed and not self._buf:
                    self._cond.wait()
                if self._closed and not self._buf:
                    return
                deadline = (self._oldest or 0.0) + self.policy.max_delay
                now = time.monotonic()
                if (
                    now < deadline
                    and len(self._buf) < self.policy.max_bytes
                    and not self._closed
                ):
                    self._cond.wait(deadline - now)
                    continue
                self._flush_locked()

    def _flush_locked(self) -> None:
        if not self._buf:
            return
        data = bytes(self._buf)
        acks = self._pending
        self._buf = bytearray()
        self._pending = []
        self._oldest = None
        error: Exception | None = None
        try:
            self._file.write(data)
            self._file.flush()
            os.fsync(self._file.fileno())
        except OSError as exc:
            error = WalError(f"wal flush failed: {exc}")
        else:
            self.flush_count += 1
        for ack in acks:
            ack._complete(error)
