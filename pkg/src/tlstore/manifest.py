"""Line-oriented manifest persistence.

One text file per store records every materialized block and every stripe:

- block line:  ``path<TAB>ordinal<TAB>block_id<TAB>length<TAB>checksum<TAB>residency``
- stripe line: ``S<TAB>block_id<TAB>seq<TAB>server_id<TAB>offset<TAB>length<TAB>checksum``

Stripe lines have seven fields and block lines six, so the two record
kinds cannot be confused even for a file literally named "S".  Paths may
not contain tabs or newlines; the store rejects such names at create
time.  The manifest is rewritten atomically (temp file, fsync, rename)
whenever a file is sealed or checkpointed.

Loading is strict: malformed lines, duplicate records, unknown residency
values, or stripes that do not partition their block raise an integrity
error rather than guessing.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .backing import StripeRecord
from .errors import IntegrityError

HEADER = "# tlstore manifest v1"

RESIDENCY_VALUES = ("tier", "backing", "both", "lost")


@dataclass(frozen=True)
class ManifestBlockLine:
    path: str
    ordinal: int
    block_id: str
    logical_length: int
    checksum_hex: str
    residency: str


def save_manifest(manifest_path, block_lines: Iterable[ManifestBlockLine],
                  stripe_records: Iterable[StripeRecord]):
    """Rewrite the whole manifest atomically.

    Records are sorted (blocks by path then ordinal, stripes by block then
    seq) so identical store state always yields byte-identical manifests.
    """
    manifest_path = Path(manifest_path)
    blocks = sorted(block_lines, key=lambda b: (b.path, b.ordinal))
    stripes = sorted(stripe_records, key=lambda s: (s.block_id, s.seq))
    lines = [HEADER]
    for b in blocks:
        lines.append("\t".join([
            b.path, str(b.ordinal), b.block_id, str(b.logical_length),
            b.checksum_hex, b.residency,
        ]))
    for s in stripes:
        lines.append("\t".join([
            "S", s.block_id, str(s.seq), str(s.server_id), str(s.offset),
            str(s.length), s.checksum_hex,
        ]))
    tmp = manifest_path.with_name(manifest_path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, manifest_path)
    # persist the rename itself
    dir_fd = os.open(manifest_path.parent, os.O_RDONLY)
    try:
        os.fsync(dir_fd)
    finally:
        os.close(dir_fd)


def _parse_int(text: str, what: str, lineno: int) -> int:
    try:
        value = int(text)
    except ValueError:
        raise IntegrityError(f"manifest line {lineno}: bad {what} {text!r}")
    if value < 0:
        raise IntegrityError(f"manifest line {lineno}: negative {what}")
    return value


def load_manifest(manifest_path) -> tuple[list[ManifestBlockLine], list[StripeRecord]]:
    """Parse a manifest; returns (block lines, stripe records)."""
    blocks: list[ManifestBlockLine] = []
    stripes: list[StripeRecord] = []
    seen_blocks = set()
    seen_block_ids = set()
    seen_stripes = set()
    with open(manifest_path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if fields[0] == "S" and len(fields) == 7:
                _, block_id, seq, server_id, offset, length, checksum = fields
                rec = StripeRecord(
                    block_id,
                    _parse_int(seq, "stripe seq", lineno),
                    _parse_int(server_id, "server id", lineno),
                    _parse_int(offset, "stripe offset", lineno),
                    _parse_int(length, "stripe length", lineno),
                    checksum,
                )
                key = (rec.block_id, rec.seq)
                if key in seen_stripes:
                    raise IntegrityError(
                        f"manifest line {lineno}: duplicate stripe {key}")
                seen_stripes.add(key)
                stripes.append(rec)
            elif len(fields) == 6:
                path, ordinal, block_id, length, checksum, residency = fields
                if residency not in RESIDENCY_VALUES:
                    raise IntegrityError(
                        f"manifest line {lineno}: unknown residency "
                        f"{residency!r}")
                blk = ManifestBlockLine(
                    path,
                    _parse_int(ordinal, "ordinal", lineno),
                    block_id,
                    _parse_int(length, "block length", lineno),
                    checksum,
                    residency,
                )
                if (blk.path, blk.ordinal) in seen_blocks:
                    raise IntegrityError(
                        f"manifest line {lineno}: duplicate block "
                        f"{blk.path}#{blk.ordinal}")
                if blk.block_id in seen_block_ids:
                    raise IntegrityError(
                        f"manifest line {lineno}: block id {blk.block_id} "
                        f"listed twice")
                seen_blocks.add((blk.path, blk.ordinal))
                seen_block_ids.add(blk.block_id)
                blocks.append(blk)
            else:
                raise IntegrityError(
                    f"manifest line {lineno}: expected 6 or 7 fields, "
                    f"got {len(fields)}")
    return blocks, stripes


def group_stripes(stripes: Sequence[StripeRecord]) -> dict[str, list[StripeRecord]]:
    grouped: dict[str, list[StripeRecord]] = {}
    for s in stripes:
        grouped.setdefault(s.block_id, []).append(s)
    for records in grouped.values():
        records.sort(key=lambda s: s.seq)
    return grouped


def check_partition(block_id: str, length: int,
                    stripes: Sequence[StripeRecord]):
    """Stripes must tile [0, length) contiguously in seq order."""
    if not stripes and length > 0:
        raise IntegrityError(f"block {block_id}: no stripes recorded")
    cursor = 0
    for i, s in enumerate(stripes):
        if s.seq != i or s.offset != cursor or s.length <= 0:
            raise IntegrityError(
                f"block {block_id}: stripe {s.seq} does not tile the block")
        cursor += s.length
    if cursor != length:
        raise IntegrityError(
            f"block {block_id}: stripes cover {cursor} of {length} bytes")
