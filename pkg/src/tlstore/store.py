"""Two-level store: a capacity-bounded in-memory block tier over a
striped backing store.

Files are write-once: create, append, seal, then read.  Appends cut the
byte stream into fixed-size blocks; each block lives in the memory tier,
in the backing store, or both, and a block whose only copy was evicted
from the tier is recorded as lost (reads then fail loudly rather than
return wrong bytes).

Write modes decide where appends land: ``MEMORY_ONLY`` fills only the
tier (fast, volatile until checkpointed), ``BYPASS`` stripes straight to
backing, ``WRITE_THROUGH`` does both synchronously.  Read modes mirror
them: ``MEMORY_ONLY`` serves only tier-resident blocks, ``BYPASS_NO_CACHE``
reads backing without touching the tier, and ``TIERED_CACHING`` (the
default) serves resident blocks from the tier and pulls misses out of
backing, caching them for next time.

Eviction is strict LRU over unpinned blocks under a monotone logical
access clock.  Reads from backing go through a single persistent window
buffer of ``backing_buffer`` bytes, so sequential small reads amortize
one large backing fetch; scattered reads lose that amortization, which
is exactly the skip penalty the benchmark harness measures.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence

from .backing import BackingStore, BlockRecord, digest_hex
from .errors import (
    BackingMissError,
    CapacityError,
    DataLossError,
    DuplicatePathError,
    IntegrityError,
    NotSealedError,
    OutOfRangeError,
    PinError,
    SealedFileError,
    TierMissError,
    UnknownPathError,
    UsageError,
)
from .manifest import (
    ManifestBlockLine,
    check_partition,
    group_stripes,
    load_manifest,
    save_manifest,
)


class WriteMode(Enum):
    MEMORY_ONLY = "memory_only"
    BYPASS = "bypass"
    WRITE_THROUGH = "write_through"


class ReadMode(Enum):
    MEMORY_ONLY = "memory_only"
    BYPASS_NO_CACHE = "bypass_no_cache"
    TIERED_CACHING = "tiered_caching"


class Residency(Enum):
    TIER = "tier"
    BACKING = "backing"
    BOTH = "both"
    LOST = "lost"


@dataclass(frozen=True)
class StoreConfig:
    """Sizing knobs.  ``app_buffer`` is the unit reads are served in;
    ``backing_buffer`` is the unit backing fetches are issued in and may
    not be smaller (forwarded requests never shrink)."""

    block_size: int
    tier_capacity: int
    app_buffer: int = 1_048_576
    backing_buffer: int = 4_194_304
    default_write_mode: WriteMode = WriteMode.WRITE_THROUGH
    default_read_mode: ReadMode = ReadMode.TIERED_CACHING

    def __post_init__(self):
        if self.block_size <= 0:
            raise UsageError("block_size must be positive")
        if self.tier_capacity != 0 and self.tier_capacity < self.block_size:
            raise UsageError(
                "tier_capacity must be 0 (bypass-only) or >= block_size")
        if self.app_buffer <= 0:
            raise UsageError("app_buffer must be positive")
        if self.backing_buffer < self.app_buffer:
            raise UsageError("backing_buffer must be >= app_buffer")


@dataclass(frozen=True)
class BlockDescriptor:
    block_id: str
    ordinal: int
    logical_length: int
    residency: Residency
    checksum_hex: str


@dataclass(frozen=True)
class FileMetadata:
    path: str
    length: int
    sealed: bool
    write_mode: WriteMode
    blocks: tuple[BlockDescriptor, ...]


@dataclass(frozen=True)
class StoreStats:
    """Monotone counters.  ``tier_hits`` counts blocks served from the
    tier; ``backing_fetches`` counts fetch operations against backing
    (one per block cached, one per window refill); the byte counters are
    payload actually moved per level."""

    tier_hits: int = 0
    backing_fetches: int = 0
    tier_bytes: int = 0
    backing_bytes: int = 0
    evictions: int = 0
    lost_blocks: int = 0


class _Block:
    __slots__ = ("block_id", "path", "ordinal", "logical_length",
                 "residency", "checksum_hex")

    def __init__(self, block_id, path, ordinal, logical_length, residency,
                 checksum_hex):
        self.block_id = block_id
        self.path = path
        self.ordinal = ordinal
        self.logical_length = logical_length
        self.residency = residency
        self.checksum_hex = checksum_hex

    def snapshot(self) -> BlockDescriptor:
        return BlockDescriptor(self.block_id, self.ordinal,
                               self.logical_length, self.residency,
                               self.checksum_hex)


class _File:
    __slots__ = ("path", "write_mode", "sealed", "blocks", "tail")

    def __init__(self, path, write_mode):
        self.path = path
        self.write_mode = write_mode
        self.sealed = False
        self.blocks: List[_Block] = []
        self.tail = bytearray()

    @property
    def length(self) -> int:
        return sum(b.logical_length for b in self.blocks) + len(self.tail)


@dataclass
class FileHandle:
    """Thin convenience wrapper returned by ``create``."""

    store: "Store"
    path: str

    def append(self, data: bytes) -> int:
        return self.store.append(self.path, data)

    def seal(self) -> FileMetadata:
        return self.store.seal(self.path)


@dataclass
class _Span:
    """One contiguous slice of a read request inside a single block."""

    block: _Block
    offset_in_block: int
    length: int
    out_pos: int


class Store:
    """The two-level engine.  A single re-entrant lock is the internal
    ordering point for all metadata and tier mutation; simulated device
    time is charged to ``clock`` while the lock is held, so virtual-clock
    accounting is exact and deterministic."""

    def __init__(self, config: StoreConfig, backing: BackingStore,
                 clock=None, tier_device=None, manifest_path=None):
        self.config = config
        self.backing = backing
        self.clock = clock
        self.tier_device = tier_device
        self.manifest_path = manifest_path
        self._files: Dict[str, _File] = {}
        self._blocks_by_id: Dict[str, _Block] = {}
        self._tier_payload: Dict[str, bytes] = {}
        self._tier_stamp: Dict[str, int] = {}
        self._pinned: set[str] = set()
        self._used = 0
        self._stamp = 0
        self._block_counter = 0
        self._window: Optional[tuple[tuple[str, int], bytes]] = None
        self._hits = 0
        self._fetches = 0
        self._tier_bytes = 0
        self._backing_bytes = 0
        self._lost = 0
        self.eviction_log: List[str] = []
        self._lock = threading.RLock()

    # -- lifecycle ---------------------------------------------------------

    def create(self, path: str, write_mode: Optional[WriteMode] = None) -> FileHandle:
        if not path or "\t" in path or "\n" in path:
            raise UsageError("path must be non-empty and free of tab/newline")
        with self._lock:
            if path in self._files:
                raise DuplicatePathError(f"path {path!r} already exists")
            self._files[path] = _File(
                path, write_mode or self.config.default_write_mode)
            return FileHandle(self, path)

    def append(self, path: str, data: bytes) -> int:
        """Append bytes, cutting full blocks as soon as they accumulate.

        The incoming stream is consumed in ``app_buffer`` chunks; every
        completed ``block_size`` slice is materialized immediately per
        the file's write mode.  The final short block waits for seal.
        """
        with self._lock:
            f = self._file(path)
            if f.sealed:
                raise SealedFileError(f"file {path!r} is sealed")
            view = memoryview(bytes(data))
            pos = 0
            while pos < len(view):
                chunk = view[pos:pos + self.config.app_buffer]
                pos += len(chunk)
                f.tail.extend(chunk)
                while len(f.tail) >= self.config.block_size:
                    # materialize first: if it raises, the tail is intact
                    # and the stream cannot lose a middle slice
                    self._materialize(f, bytes(f.tail[:self.config.block_size]))
                    del f.tail[:self.config.block_size]
            return len(data)

    def seal(self, path: str) -> FileMetadata:
        with self._lock:
            f = self._file(path)
            if not f.sealed:
                if f.tail:
                    self._materialize(f, bytes(f.tail))
                    f.tail.clear()
                f.sealed = True
                self._save_manifest()
            return self.metadata(path)

    # -- write path --------------------------------------------------------

    def _materialize(self, f: _File, payload: bytes):
        """Turn a completed block payload into a tracked block."""
        block_id = f"b{self._block_counter:08x}"
        self._block_counter += 1
        blk = _Block(block_id, f.path, len(f.blocks), len(payload),
                     Residency.BACKING, digest_hex(payload))
        mode = f.write_mode
        if mode is WriteMode.MEMORY_ONLY:
            if not self._make_room(len(payload)):
                # nothing half-done: the block simply does not exist
                raise CapacityError(
                    f"cannot fit {len(payload)} bytes in the tier even "
                    f"after evicting every unpinned block")
            blk.residency = Residency.TIER
            self._tier_insert(blk, payload)
            self._charge_tier(len(payload), write=True)
        elif mode is WriteMode.BYPASS:
            self.backing.put_block(block_id, payload)
        else:  # WRITE_THROUGH: backing copy first, tier copy if it fits
            self.backing.put_block(block_id, payload)
            if self._make_room(len(payload)):
                blk.residency = Residency.BOTH
                self._tier_insert(blk, payload)
                self._charge_tier(len(payload), write=True)
            # else: tier has no usable room (pins, or zero capacity); the
            # backing copy alone still satisfies the durability contract
        f.blocks.append(blk)
        self._blocks_by_id[block_id] = blk

    def checkpoint(self, path: str) -> int:
        """Stripe every tier-only block of a file to backing; idempotent."""
        with self._lock:
            f = self._file(path)
            count = 0
            for blk in f.blocks:
                if blk.residency is Residency.TIER:
                    self.backing.put_block(blk.block_id,
                                           self._tier_payload[blk.block_id])
                    blk.residency = Residency.BOTH
                    count += 1
            self._save_manifest()
            return count

    # -- tier mechanics ----------------------------------------------------

    def _touch(self, block_id: str):
        self._stamp += 1
        self._tier_stamp[block_id] = self._stamp

    def _tier_insert(self, blk: _Block, payload: bytes):
        self._tier_payload[blk.block_id] = payload
        self._used += len(payload)
        self._touch(blk.block_id)

    def _evictable_room(self, need: int) -> bool:
        pinned_bytes = sum(
            len(self._tier_payload[b]) for b in self._pinned)
        return need <= self.config.tier_capacity - pinned_bytes

    def _make_room(self, need: int) -> bool:
        """Evict strict-LRU victims until ``need`` bytes fit; False if the
        tier cannot hold them even after evicting every unpinned block."""
        if not self._evictable_room(need):
            return False
        while self._used + need > self.config.tier_capacity:
            victim = self._lru_victim()
            if victim is None:
                return False
            self._evict_block(victim)
        return True

    def _lru_victim(self) -> Optional[str]:
        best = None
        best_stamp = None
        for block_id, stamp in self._tier_stamp.items():
            if block_id in self._pinned:
                continue
            if best_stamp is None or stamp < best_stamp:
                best, best_stamp = block_id, stamp
        return best

    def _evict_block(self, block_id: str):
        payload = self._tier_payload.pop(block_id)
        self._tier_stamp.pop(block_id, None)
        self._used -= len(payload)
        blk = self._blocks_by_id[block_id]
        if blk.residency is Residency.TIER:
            blk.residency = Residency.LOST
            self._lost += 1
        else:
            blk.residency = Residency.BACKING
        self.eviction_log.append(block_id)

    def evict(self, target_bytes: int) -> list[str]:
        """Free ``target_bytes`` of headroom; returns this call's victims."""
        if target_bytes < 0:
            raise UsageError("target_bytes must be >= 0")
        with self._lock:
            victims = []
            goal = self.config.tier_capacity - target_bytes
            while self._used > goal:
                victim = self._lru_victim()
                if victim is None:
                    break
                self._evict_block(victim)
                victims.append(victim)
            return victims

    def pin(self, path_or_block_id: str, on: bool = True):
        """Pin (or unpin) a single resident block, or every currently
        resident block of a file when given a path."""
        with self._lock:
            if path_or_block_id in self._files:
                f = self._files[path_or_block_id]
                for blk in f.blocks:
                    if blk.block_id in self._tier_payload:
                        self._set_pin(blk.block_id, on)
                return
            if path_or_block_id not in self._blocks_by_id:
                raise UnknownPathError(
                    f"no file or block named {path_or_block_id!r}")
            if path_or_block_id not in self._tier_payload:
                raise PinError(
                    f"block {path_or_block_id} is not resident in the tier")
            self._set_pin(path_or_block_id, on)

    def _set_pin(self, block_id: str, on: bool):
        if on:
            self._pinned.add(block_id)
        else:
            self._pinned.discard(block_id)

    # -- read path ---------------------------------------------------------

    def read(self, path: str, offset: int = 0, length: Optional[int] = None,
             read_mode: Optional[ReadMode] = None) -> bytes:
        with self._lock:
            f = self._file(path)
            if not f.sealed:
                raise NotSealedError(f"file {path!r} is not sealed yet")
            file_len = f.length
            if length is None:
                length = file_len - offset
            if offset < 0 or length < 0 or offset + length > file_len:
                raise OutOfRangeError(
                    f"range [{offset}, {offset + length}) outside file "
                    f"{path!r} of length {file_len}")
            if length == 0:
                return b""
            spans = self._spans(f, offset, length)
            mode = read_mode or self.config.default_read_mode
            for span in spans:
                if span.block.residency is Residency.LOST:
                    raise DataLossError(span.block.block_id)
            if mode is ReadMode.MEMORY_ONLY:
                return self._read_memory_only(spans, length)
            if mode is ReadMode.BYPASS_NO_CACHE:
                return self._read_bypass(spans, length)
            return self._read_tiered(spans, length)

    def _spans(self, f: _File, offset: int, length: int) -> list[_Span]:
        spans = []
        end = offset + length
        cursor = 0
        for blk in f.blocks:
            b_start, b_end = cursor, cursor + blk.logical_length
            cursor = b_end
            if b_end <= offset:
                continue
            if b_start >= end:
                break
            lo = max(offset, b_start)
            hi = min(end, b_end)
            spans.append(_Span(blk, lo - b_start, hi - lo, lo - offset))
        return spans

    def _read_memory_only(self, spans: Sequence[_Span], length: int) -> bytes:
        for span in spans:
            if span.block.block_id not in self._tier_payload:
                raise TierMissError(
                    f"block {span.block.block_id} is not tier-resident")
        out = bytearray(length)
        for span in spans:
            self._serve_from_tier(span, out)
        return bytes(out)

    def _read_bypass(self, spans: Sequence[_Span], length: int) -> bytes:
        for span in spans:
            if span.block.residency is Residency.TIER:
                raise BackingMissError(
                    f"block {span.block.block_id} has no backing copy; "
                    f"checkpoint before bypass reads")
        out = bytearray(length)
        for span in spans:
            data = self._window_read(span.block, span.offset_in_block,
                                     span.length)
            out[span.out_pos:span.out_pos + span.length] = data
        return bytes(out)

    def _read_tiered(self, spans: Sequence[_Span], length: int) -> bytes:
        out = bytearray(length)
        misses = []
        # phase 1: everything already resident is served first, so one
        # pass over a file larger than the tier cannot evict blocks ahead
        # of the cursor before they are reached
        for span in spans:
            if span.block.block_id in self._tier_payload:
                self._serve_from_tier(span, out)
            else:
                misses.append(span)
        for span in misses:
            blk = span.block
            if self._evictable_room(blk.logical_length):
                payload = self._fetch_block(blk)
                self._make_room(blk.logical_length)
                blk.residency = Residency.BOTH
                self._tier_insert(blk, payload)
                lo = span.offset_in_block
                out[span.out_pos:span.out_pos + span.length] = \
                    payload[lo:lo + span.length]
            else:
                # block cannot fit even in principle: serve without caching
                data = self._window_read(blk, span.offset_in_block,
                                         span.length)
                out[span.out_pos:span.out_pos + span.length] = data
        return bytes(out)

    def _serve_from_tier(self, span: _Span, out: bytearray):
        payload = self._tier_payload[span.block.block_id]
        lo = span.offset_in_block
        out[span.out_pos:span.out_pos + span.length] = \
            payload[lo:lo + span.length]
        self._touch(span.block.block_id)
        self._hits += 1
        self._tier_bytes += span.length
        self._charge_tier(span.length, write=False)

    def _charge_tier(self, nbytes: int, write: bool):
        if self.tier_device is None or nbytes <= 0:
            return
        # the tier moves data in app_buffer units; charge per chunk so
        # fixed per-operation latency scales with the chunk count
        remaining = nbytes
        while remaining > 0:
            chunk = min(self.config.app_buffer, remaining)
            if write:
                self.tier_device.charge_write(chunk)
            else:
                self.tier_device.charge_read(chunk)
            remaining -= chunk

    def _fetch_block(self, blk: _Block) -> bytes:
        """Pull a whole block out of backing in backing_buffer chunks."""
        parts = []
        pos = 0
        while pos < blk.logical_length:
            chunk = min(self.config.backing_buffer, blk.logical_length - pos)
            parts.append(self.backing.get_range(blk.block_id, pos, chunk))
            pos += chunk
        payload = b"".join(parts)
        self._fetches += 1
        self._backing_bytes += len(payload)
        return payload

    def _window_read(self, blk: _Block, offset: int, length: int) -> bytes:
        """Serve a block range through the persistent single-slot window.

        The window holds one backing_buffer-aligned slice of one block.
        Sequential readers reuse it across calls; a read landing outside
        the current window pays for a fresh backing fetch of the whole
        window, which is what makes skip patterns expensive.
        """
        bb = self.config.backing_buffer
        out = bytearray()
        pos = offset
        end = offset + length
        while pos < end:
            w = pos // bb
            w_start = w * bb
            w_len = min(bb, blk.logical_length - w_start)
            key = (blk.block_id, w)
            if self._window is None or self._window[0] != key:
                payload = self.backing.get_range(blk.block_id, w_start, w_len)
                self._fetches += 1
                self._backing_bytes += len(payload)
                self._window = (key, payload)
            payload = self._window[1]
            lo = pos - w_start
            hi = min(end, w_start + w_len) - w_start
            out += payload[lo:hi]
            pos = w_start + hi
        return bytes(out)

    # -- introspection -----------------------------------------------------

    def _file(self, path: str) -> _File:
        try:
            return self._files[path]
        except KeyError:
            raise UnknownPathError(f"unknown path {path!r}")

    def files(self) -> list[str]:
        with self._lock:
            return sorted(self._files)

    def file_length(self, path: str) -> int:
        with self._lock:
            return self._file(path).length

    def metadata(self, path: str) -> FileMetadata:
        with self._lock:
            f = self._file(path)
            return FileMetadata(f.path, f.length, f.sealed, f.write_mode,
                                tuple(b.snapshot() for b in f.blocks))

    def residency_ratio(self, path: str) -> float:
        """Fraction of a sealed file's bytes currently in the tier."""
        with self._lock:
            f = self._file(path)
            if not f.sealed:
                raise NotSealedError(
                    f"residency of {path!r} undefined before seal")
            if f.length == 0:
                return 1.0
            resident = sum(b.logical_length for b in f.blocks
                           if b.block_id in self._tier_payload)
            return resident / f.length

    def tier_used_bytes(self) -> int:
        with self._lock:
            return self._used

    def stats(self) -> StoreStats:
        with self._lock:
            return StoreStats(self._hits, self._fetches, self._tier_bytes,
                              self._backing_bytes, len(self.eviction_log),
                              self._lost)

    def verify(self, path: str) -> bool:
        """Recompute digests for every block of a file; loss and checksum
        mismatches raise, success returns True."""
        with self._lock:
            f = self._file(path)
            for blk in f.blocks:
                if blk.residency is Residency.LOST:
                    raise DataLossError(blk.block_id)
                if blk.block_id in self._tier_payload:
                    if digest_hex(self._tier_payload[blk.block_id]) != \
                            blk.checksum_hex:
                        raise IntegrityError(
                            f"tier copy of {blk.block_id} corrupt")
                if blk.residency in (Residency.BACKING, Residency.BOTH):
                    self.backing.verify_block(blk.block_id)
            return True

    # -- persistence -------------------------------------------------------

    def _save_manifest(self):
        if self.manifest_path is None:
            return
        # only sealed files are manifested: a crash mid-write rolls the
        # file back to never-existed instead of resurrecting half of it
        block_lines = []
        listed = set()
        for f in self._files.values():
            if not f.sealed:
                continue
            for blk in f.blocks:
                block_lines.append(ManifestBlockLine(
                    f.path, blk.ordinal, blk.block_id, blk.logical_length,
                    blk.checksum_hex, blk.residency.value))
                listed.add(blk.block_id)
        stripes = []
        for record in self.backing.block_records():
            if record.block_id in listed:
                stripes.extend(record.stripes)
        save_manifest(self.manifest_path, block_lines, stripes)

    def save_manifest(self):
        with self._lock:
            if self.manifest_path is None:
                raise UsageError("store was built without a manifest path")
            self._save_manifest()

    @classmethod
    def load(cls, config: StoreConfig, backing: BackingStore, manifest_path,
             clock=None, tier_device=None) -> "Store":
        """Rebuild a store from its manifest.

        The memory tier does not survive a restart, so residency is
        downgraded: ``both`` becomes ``backing`` and ``tier`` becomes
        ``lost``.  All files come back sealed (write-once, and any
        buffered tail died with the process).  Zero-length files leave no
        block lines and therefore do not reappear.
        """
        store = cls(config, backing, clock=clock, tier_device=tier_device,
                    manifest_path=manifest_path)
        block_lines, stripe_records = load_manifest(manifest_path)
        grouped = group_stripes(stripe_records)
        by_path: Dict[str, list[ManifestBlockLine]] = {}
        for line in block_lines:
            by_path.setdefault(line.path, []).append(line)
        max_counter = 0
        for path, lines in sorted(by_path.items()):
            lines.sort(key=lambda b: b.ordinal)
            f = _File(path, config.default_write_mode)
            f.sealed = True
            for i, line in enumerate(lines):
                if line.ordinal != i:
                    raise IntegrityError(
                        f"file {path!r}: block ordinals not contiguous")
                residency = Residency(line.residency)
                if residency is Residency.BOTH:
                    residency = Residency.BACKING
                elif residency is Residency.TIER:
                    residency = Residency.LOST
                blk = _Block(line.block_id, path, i, line.logical_length,
                             residency, line.checksum_hex)
                if residency is Residency.BACKING:
                    stripes = grouped.get(line.block_id, [])
                    check_partition(line.block_id, line.logical_length,
                                    stripes)
                    backing.adopt_record(BlockRecord(
                        line.block_id, line.logical_length,
                        line.checksum_hex, tuple(stripes)))
                f.blocks.append(blk)
                store._blocks_by_id[line.block_id] = blk
                if line.block_id.startswith("b"):
                    try:
                        max_counter = max(max_counter,
                                          int(line.block_id[1:], 16) + 1)
                    except ValueError:
                        pass
            store._files[path] = f
        store._block_counter = max_counter
        return store
