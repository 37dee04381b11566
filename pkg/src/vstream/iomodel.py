"""Simulated two-level memory for counting block transfers.

Extents are contiguous runs of fixed-width records aligned to block
boundaries. Every access goes through an LRU cache of ``cache_blocks``
blocks; a miss costs one read, evicting a dirty block costs one write.
Writing into a block that is not resident does not read it first (the
writer supplies the whole content of fresh extents).

Code outside this module never sees ``block_size`` or ``cache_blocks``.
"""

from __future__ import annotations

import json
import struct
from collections import OrderedDict
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Sequence

PHASES = ("update", "merge", "subdivide", "query", "aux")

MAGIC = b"VSTRIDX1"
FORMAT_VERSION = 1
# key int64, version uint64, flag byte (0xFF tombstone, else payload length), payload
RECORD = struct.Struct("<qQB16s")
RECORD_WIDTH = RECORD.size
PAYLOAD_WIDTH = 16
_HEADER = struct.Struct("<IIQQ")  # format version, record width, extent count, meta length
_EXTENT = struct.Struct("<QQ")  # extent id, record count


class IoError(Exception):
    pass


@dataclass
class IoReport:
    reads: int = 0
    writes: int = 0
    by_phase: dict[str, dict[str, int]] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return self.reads + self.writes

    def phase_total(self, *phases: str) -> int:
        return sum(self.by_phase.get(p, {}).get("reads", 0) + self.by_phase.get(p, {}).get("writes", 0)
                   for p in phases)

    def to_dict(self) -> dict[str, Any]:
        return {"reads": self.reads, "writes": self.writes, "by_phase": self.by_phase}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


class BlockDevice:
    def __init__(self, block_size: int = 64, cache_blocks: int = 256):
        if block_size < 1 or cache_blocks < 1:
            raise ValueError("block_size and cache_blocks must be positive")
        self.block_size = block_size
        self.cache_blocks = cache_blocks
        self._extents: dict[int, list] = {}
        self._next_id = 1
        self._cache: OrderedDict[tuple[int, int], bool] = OrderedDict()  # block -> dirty
        self._phase = "update"
        self._counts = {p: [0, 0] for p in PHASES}
        self._extent_reads: dict[int, int] = {}

    # -- phases and counters -------------------------------------------------

    @contextmanager
    def phase(self, name: str):
        if name not in self._counts:
            raise ValueError(f"unknown phase {name!r}")
        prev, self._phase = self._phase, name
        try:
            yield
        finally:
            self._phase = prev

    @property
    def reads(self) -> int:
        return sum(c[0] for c in self._counts.values())

    @property
    def writes(self) -> int:
        return sum(c[1] for c in self._counts.values())

    def snapshot_report(self) -> IoReport:
        by_phase = {p: {"reads": c[0], "writes": c[1]} for p, c in self._counts.items()}
        return IoReport(self.reads, self.writes, by_phase)

    def reset_counters(self) -> IoReport:
        self._counts = {p: [0, 0] for p in PHASES}
        return self.snapshot_report()

    def drop_cache(self) -> None:
        """Write back dirty blocks and empty the cache (cold start)."""
        self.flush()
        self._cache.clear()

    # -- cache ---------------------------------------------------------------

    def _touch(self, eid: int, blk: int, write: bool) -> None:
        key = (eid, blk)
        cache = self._cache
        if key in cache:
            cache.move_to_end(key)
            if write:
                cache[key] = True
            return
        if not write:
            self._counts[self._phase][0] += 1
            self._extent_reads[eid] = self._extent_reads.get(eid, 0) + 1
        cache[key] = write
        if len(cache) > self.cache_blocks:
            _, dirty = cache.popitem(last=False)
            if dirty:
                self._counts[self._phase][1] += 1

    def flush(self) -> None:
        for key, dirty in self._cache.items():
            if dirty:
                self._counts[self._phase][1] += 1
                self._cache[key] = False

    # -- extents -------------------------------------------------------------

    def alloc_extent(self, n_records: int) -> int:
        if n_records < 0:
            raise ValueError("negative extent size")
        eid = self._next_id
        self._next_id += 1
        self._extents[eid] = [None] * n_records
        return eid

    def free_extent(self, eid: int) -> None:
        recs = self._extents.pop(eid)
        self._extent_reads.pop(eid, None)
        nblocks = -(-len(recs) // self.block_size)
        for b in range(nblocks):
            self._cache.pop((eid, b), None)

    def extent_reads(self, eid: int) -> int:
        """Block reads charged to ``eid`` so far (cache misses only)."""
        return self._extent_reads.get(eid, 0)

    def extent_size(self, eid: int) -> int:
        return len(self._extent(eid))

    def _extent(self, eid: int) -> list:
        try:
            return self._extents[eid]
        except KeyError:
            raise IoError(f"no such extent {eid}") from None

    def _check(self, recs: list, offset: int, length: int) -> None:
        if offset < 0 or length < 0 or offset + length > len(recs):
            raise IoError(f"access [{offset}, {offset + length}) outside extent of {len(recs)} records")

    def _blocks(self, eid: int, offset: int, length: int, write: bool) -> None:
        if length == 0:
            return
        bs = self.block_size
        for b in range(offset // bs, (offset + length - 1) // bs + 1):
            self._touch(eid, b, write)

    def read_seq(self, eid: int, offset: int, length: int) -> list:
        recs = self._extent(eid)
        self._check(recs, offset, length)
        self._blocks(eid, offset, length, False)
        return recs[offset:offset + length]

    def write_seq(self, eid: int, offset: int, records: Sequence) -> None:
        recs = self._extent(eid)
        self._check(recs, offset, len(records))
        self._blocks(eid, offset, len(records), True)
        recs[offset:offset + len(records)] = records

    def read_record(self, eid: int, index: int):
        recs = self._extent(eid)
        self._check(recs, index, 1)
        self._touch(eid, index // self.block_size, False)
        return recs[index]

    def iter_records(self, eid: int, start: int) -> Iterator:
        """Sequential cursor from ``start``; a block is charged when first entered."""
        recs = self._extent(eid)
        bs = self.block_size
        n = len(recs)
        i = start
        while i < n:
            self._touch(eid, i // bs, False)
            end = min(n, (i // bs + 1) * bs)
            while i < end:
                yield recs[i]
                i += 1

    def resize_extent(self, eid: int, n_records: int) -> int:
        """Reallocate ``eid`` at a new size, copying its content; returns the new id."""
        old = self.read_seq(eid, 0, self.extent_size(eid))
        new = self.alloc_extent(n_records)
        keep = old[:n_records]
        self.write_seq(new, 0, keep)
        self.free_extent(eid)
        return new


def encode_record(key: int, version: int, payload: bytes | None) -> bytes:
    if payload is None:
        return RECORD.pack(key, version, 0xFF, b"")
    if len(payload) > PAYLOAD_WIDTH:
        raise ValueError(f"payload longer than {PAYLOAD_WIDTH} bytes")
    return RECORD.pack(key, version, len(payload), payload)


def decode_record(raw: bytes) -> tuple[int, int, bytes | None]:
    key, version, flag, payload = RECORD.unpack(raw)
    if flag == 0xFF:
        return key, version, None
    return key, version, payload[:flag]


def write_image(path: str | Path, meta: dict, extents: Sequence[tuple[int, Sequence]]) -> None:
    """Write a snapshot file.

    Layout (little-endian): ``MAGIC``; header ``<IIQQ`` (format version,
    record width, extent count, meta length); ``meta`` as UTF-8 JSON; the
    extent table as ``<QQ`` (extent id, record count) rows; then every
    extent's records back to back in table order.
    """
    meta_bytes = json.dumps(meta, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(FORMAT_VERSION, RECORD_WIDTH, len(extents), len(meta_bytes)))
        fh.write(meta_bytes)
        for eid, recs in extents:
            fh.write(_EXTENT.pack(eid, len(recs)))
        for _, recs in extents:
            for r in recs:
                fh.write(encode_record(*r))


def read_image(path: str | Path) -> tuple[dict, dict[int, list]]:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise IoError(f"{path}: bad magic")
    pos = 8
    fmt, width, n_ext, meta_len = _HEADER.unpack_from(data, pos)
    pos += _HEADER.size
    if fmt != FORMAT_VERSION or width != RECORD_WIDTH:
        raise IoError(f"{path}: unsupported format {fmt} / record width {width}")
    meta = json.loads(data[pos:pos + meta_len])
    pos += meta_len
    table = []
    for _ in range(n_ext):
        table.append(_EXTENT.unpack_from(data, pos))
        pos += _EXTENT.size
    extents: dict[int, list] = {}
    for eid, n in table:
        recs = []
        for _ in range(n):
            recs.append(decode_record(data[pos:pos + RECORD_WIDTH]))
            pos += RECORD_WIDTH
        extents[eid] = recs
    if pos != len(data):
        raise IoError(f"{path}: {len(data) - pos} trailing bytes")
    return meta, extents
