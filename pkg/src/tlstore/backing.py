"""Striped persistent backing layer.

Blocks are cut into fixed-size stripes placed round-robin across server
targets, the way a parallel file system distributes a file across data
servers.  Two target kinds are interchangeable: directory targets keep
each stripe as a plain file under a per-server directory (inspectable,
survives process restart), and simulated targets keep stripes in memory
while charging transfer time to a clock so benchmarks get controlled,
reproducible device speeds.

Every stripe carries a 64-bit content digest, verified on each read; a
whole-block digest is kept alongside.  A block becomes visible only after
all its stripes are written, so readers never observe a torn put.
"""

from __future__ import annotations

import hashlib
import os
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence

from .clock import RateLimitedDevice
from .errors import (
    IntegrityError,
    OutOfRangeError,
    PartialPutError,
    UnknownBlockError,
    UsageError,
)
from .model import Direction


def digest_hex(data: bytes) -> str:
    """64-bit content digest rendered as 16 hex chars."""
    return hashlib.blake2b(data, digest_size=8).hexdigest()


class StartPolicy(Enum):
    FIXED_ZERO = "fixed_zero"
    ROTATE_PER_BLOCK = "rotate_per_block"


@dataclass(frozen=True)
class StripeLayout:
    """Placement rule for new blocks: stripe width, the servers in use,
    and where the round-robin starts for each successive block."""

    stripe_size: int
    server_ids: tuple[int, ...]
    start_policy: StartPolicy = StartPolicy.ROTATE_PER_BLOCK

    def __post_init__(self):
        if self.stripe_size <= 0:
            raise UsageError("stripe_size must be positive")
        if not self.server_ids:
            raise UsageError("layout needs at least one server")
        if len(set(self.server_ids)) != len(self.server_ids):
            raise UsageError("duplicate server id in layout")


@dataclass(frozen=True)
class StripeRecord:
    block_id: str
    seq: int
    server_id: int
    offset: int  # byte offset within the block
    length: int
    checksum_hex: str


@dataclass(frozen=True)
class BlockRecord:
    block_id: str
    length: int
    checksum_hex: str
    stripes: tuple[StripeRecord, ...]


@dataclass(frozen=True)
class StripePlan:
    seq: int
    server_id: int
    offset: int
    length: int


def plan_stripes(length: int, layout: StripeLayout, start: int = 0) -> list[StripePlan]:
    """Pure placement arithmetic: where each stripe of a ``length``-byte
    block goes under ``layout`` when the round-robin starts at ``start``.

    Stripe i lands on server (start + i) mod M.  All stripes are
    ``stripe_size`` long except possibly the last, and together they
    partition [0, length) exactly.
    """
    if length < 0:
        raise UsageError("block length cannot be negative")
    m = len(layout.server_ids)
    plans = []
    offset = 0
    seq = 0
    while offset < length:
        chunk = min(layout.stripe_size, length - offset)
        server = layout.server_ids[(start + seq) % m]
        plans.append(StripePlan(seq, server, offset, chunk))
        offset += chunk
        seq += 1
    return plans


class DirectoryTarget:
    """One backing server backed by a directory; stripe files are named
    ``<block_id>.<seq>`` and hold the raw stripe bytes."""

    kind = "directory"

    def __init__(self, server_id: int, root, fsync: bool = True):
        self.server_id = server_id
        self.root = Path(root)
        self.fsync = fsync
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, block_id: str, seq: int) -> Path:
        return self.root / f"{block_id}.{seq}"

    def write_stripe(self, block_id: str, seq: int, payload: bytes):
        path = self._path(block_id, seq)
        with open(path, "wb") as fh:
            fh.write(payload)
            if self.fsync:
                fh.flush()
                os.fsync(fh.fileno())

    def read_stripe(self, block_id: str, seq: int) -> bytes:
        path = self._path(block_id, seq)
        try:
            return path.read_bytes()
        except FileNotFoundError:
            raise IntegrityError(
                f"stripe {block_id}.{seq} missing on server {self.server_id}")

    def delete_stripe(self, block_id: str, seq: int):
        try:
            self._path(block_id, seq).unlink()
        except FileNotFoundError:
            pass

    def stripe_count(self) -> int:
        return sum(1 for _ in self.root.iterdir())


class SimulatedTarget:
    """In-memory backing server with a rate-limited device.

    Payloads live in a dict; every read or write charges the device for
    latency plus bytes/rate, so elapsed time under a virtual clock is
    exact and under a wall clock the target really is that slow.
    """

    kind = "simulated"

    def __init__(self, server_id: int, clock, read_mbps: float,
                 write_mbps: float, fixed_latency_us: float = 0.0):
        self.server_id = server_id
        self.device = RateLimitedDevice(clock, read_mbps, write_mbps,
                                        fixed_latency_us)
        self._payloads: Dict[tuple[str, int], bytes] = {}

    def transfer(self, direction: Direction, nbytes: int) -> float:
        """Charge one transfer; returns elapsed microseconds."""
        if direction is Direction.READ:
            return self.device.charge_read(nbytes)
        return self.device.charge_write(nbytes)

    def write_stripe(self, block_id: str, seq: int, payload: bytes):
        self.transfer(Direction.WRITE, len(payload))
        self._payloads[(block_id, seq)] = payload

    def read_stripe(self, block_id: str, seq: int) -> bytes:
        try:
            payload = self._payloads[(block_id, seq)]
        except KeyError:
            raise IntegrityError(
                f"stripe {block_id}.{seq} missing on server {self.server_id}")
        self.transfer(Direction.READ, len(payload))
        return payload

    def delete_stripe(self, block_id: str, seq: int):
        self._payloads.pop((block_id, seq), None)

    def stripe_count(self) -> int:
        return len(self._payloads)


class BackingStore:
    """Round-robin striped block store over a set of server targets.

    The active layout applies to blocks written after it is set; already
    written blocks keep the placement in their records, so layout hints
    can change mid-stream without breaking old data.
    """

    def __init__(self, targets: Sequence, stripe_size: int,
                 start_policy: StartPolicy = StartPolicy.ROTATE_PER_BLOCK):
        if not targets:
            raise UsageError("backing store needs at least one target")
        self._targets = {t.server_id: t for t in targets}
        if len(self._targets) != len(targets):
            raise UsageError("duplicate server id among targets")
        self._layout = StripeLayout(stripe_size,
                                    tuple(sorted(self._targets)), start_policy)
        self._blocks: Dict[str, BlockRecord] = {}
        self._put_count = 0
        self._lock = threading.RLock()

    @property
    def layout(self) -> StripeLayout:
        return self._layout

    def set_layout_hint(self, stripe_size: Optional[int] = None,
                        server_ids: Optional[Sequence[int]] = None) -> StripeLayout:
        """Change placement for subsequent blocks; returns the new layout."""
        with self._lock:
            ids = (tuple(server_ids) if server_ids is not None
                   else self._layout.server_ids)
            for sid in ids:
                if sid not in self._targets:
                    raise UsageError(f"unknown server id {sid}")
            size = stripe_size if stripe_size is not None else self._layout.stripe_size
            self._layout = StripeLayout(size, ids, self._layout.start_policy)
            return self._layout

    def target(self, server_id: int):
        try:
            return self._targets[server_id]
        except KeyError:
            raise UsageError(f"unknown server id {server_id}")

    def targets(self) -> list:
        return [self._targets[sid] for sid in sorted(self._targets)]

    def has_block(self, block_id: str) -> bool:
        with self._lock:
            return block_id in self._blocks

    def block_record(self, block_id: str) -> BlockRecord:
        with self._lock:
            try:
                return self._blocks[block_id]
            except KeyError:
                raise UnknownBlockError(f"unknown block {block_id}")

    def block_records(self) -> list[BlockRecord]:
        with self._lock:
            return [self._blocks[b] for b in sorted(self._blocks)]

    def adopt_record(self, record: BlockRecord):
        """Trust an externally persisted record (manifest reload).  The
        stripe payloads are not re-read here; integrity is checked on
        first access as usual."""
        with self._lock:
            self._blocks[record.block_id] = record

    def put_block(self, block_id: str, data: bytes) -> BlockRecord:
        """Stripe ``data`` across the current layout.

        All-or-nothing: the block is registered (and thus readable) only
        after every stripe is written; a failed server write triggers
        best-effort cleanup and a partial-put error naming what landed.
        """
        if not data:
            raise UsageError("put_block requires non-empty data")
        with self._lock:
            if block_id in self._blocks:
                raise UsageError(f"block {block_id} already present")
            layout = self._layout
            if layout.start_policy is StartPolicy.ROTATE_PER_BLOCK:
                start = self._put_count % len(layout.server_ids)
            else:
                start = 0
            plans = plan_stripes(len(data), layout, start)
            written: list[StripeRecord] = []
            try:
                for plan in plans:
                    payload = data[plan.offset:plan.offset + plan.length]
                    self._targets[plan.server_id].write_stripe(
                        block_id, plan.seq, payload)
                    written.append(StripeRecord(
                        block_id, plan.seq, plan.server_id, plan.offset,
                        plan.length, digest_hex(payload)))
            except Exception as exc:
                for rec in written:
                    self._targets[rec.server_id].delete_stripe(
                        block_id, rec.seq)
                raise PartialPutError(block_id, written, exc)
            record = BlockRecord(block_id, len(data), digest_hex(data),
                                 tuple(written))
            self._blocks[block_id] = record
            self._put_count += 1
            return record

    def get_range(self, block_id: str, offset: int, length: int) -> bytes:
        """Reassemble ``[offset, offset+length)`` of a block, verifying the
        checksum of every stripe touched."""
        record = self.block_record(block_id)
        if offset < 0 or length < 0 or offset + length > record.length:
            raise OutOfRangeError(
                f"range [{offset}, {offset + length}) outside block "
                f"{block_id} of length {record.length}")
        if length == 0:
            return b""
        end = offset + length
        parts = []
        for stripe in record.stripes:
            s_end = stripe.offset + stripe.length
            if s_end <= offset or stripe.offset >= end:
                continue
            payload = self._read_verified(stripe)
            lo = max(offset, stripe.offset) - stripe.offset
            hi = min(end, s_end) - stripe.offset
            parts.append(payload[lo:hi])
        return b"".join(parts)

    def get_block(self, block_id: str) -> bytes:
        record = self.block_record(block_id)
        return self.get_range(block_id, 0, record.length)

    def _read_verified(self, stripe: StripeRecord) -> bytes:
        payload = self._targets[stripe.server_id].read_stripe(
            stripe.block_id, stripe.seq)
        if digest_hex(payload) != stripe.checksum_hex:
            raise IntegrityError(
                f"checksum mismatch on stripe {stripe.block_id}.{stripe.seq} "
                f"(server {stripe.server_id})")
        return payload

    def verify_block(self, block_id: str) -> bool:
        """Re-read every stripe and check stripe and block digests."""
        record = self.block_record(block_id)
        data = b"".join(self._read_verified(s) for s in record.stripes)
        if len(data) != record.length or digest_hex(data) != record.checksum_hex:
            raise IntegrityError(f"block digest mismatch for {block_id}")
        return True

    def delete_block(self, block_id: str):
        with self._lock:
            record = self.block_record(block_id)
            for stripe in record.stripes:
                self._targets[stripe.server_id].delete_stripe(
                    block_id, stripe.seq)
            del self._blocks[block_id]


def stripe_counts_by_server(record: BlockRecord) -> Dict[int, int]:
    counts: Dict[int, int] = {}
    for stripe in record.stripes:
        counts[stripe.server_id] = counts.get(stripe.server_id, 0) + 1
    return counts
