"""Versioned range queries across levels.

One array is scanned per level. Each level stream yields, per key, the
newest element with version ``<= v``; a heap merge ordered by
``(key, version desc, level asc)`` then keeps the first entry per key, which
is the closest ancestor, with ties going to the lowest level.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterator

if TYPE_CHECKING:
    from .engine import ArrayRecord, Engine

_NOKEY = object()


@dataclass
class LevelScan:
    level: int
    array_id: int
    w_lo: int
    w_hi: int
    size: int
    probes: int = 0
    examined: int = 0
    reported: int = 0
    blocks: int = 0


@dataclass
class QueryResult:
    entries: list[tuple[int, int, bytes]]
    scans: list[LevelScan] = field(default_factory=list)
    hops: int = 0
    blocks: int = 0

    @property
    def z(self) -> int:
        return len(self.entries)

    def stats(self) -> dict:
        return {
            "z": self.z,
            "blocks": self.blocks,
            "hops": self.hops,
            "levels": [vars(s) for s in self.scans],
        }

    def to_dict(self) -> dict:
        return {
            "entries": [[k, v, p.hex()] for k, v, p in self.entries],
            "stats": self.stats(),
        }


def _serving_records(eng: "Engine", v: int) -> tuple[list["ArrayRecord"], int]:
    """Live arrays to scan for version ``v`` plus the number of pointer hops."""
    out = []
    if not eng.succ_mode:
        top = eng.highest_level(v)
        for l in range(top + 1):
            rec = eng.find_array(l, v)
            if rec is not None:
                out.append(rec)
        return out, 0

    dev = eng.device
    hops = 0
    rec = eng.route_start(v)
    l = 0
    while rec is not None:
        if not rec.is_dummy:
            out.append(rec)
        l += 1
        if l >= len(eng.levels):
            break
        routes = eng.levels[l].routes
        if not len(routes):
            break
        with dev.phase("aux"):
            # follow the successor edge, then step right while the next route still starts <= v
            if rec.succ is not None:
                cur = eng.records[rec.succ]
                pos = routes.pred_pos(cur.lo)
            else:
                pos = 0
                cur = routes.by_lo[routes.los[0]]
                if cur.lo > v:
                    break
            dev.read_record(eng.levels[l].index_extent, pos)
            hops += 1
            while pos + 1 < len(routes.los) and dev.read_record(eng.levels[l].index_extent, pos + 1) <= v:
                pos += 1
                hops += 1
            rec = routes.by_lo[routes.los[pos]]
    return out, hops


def _stream(eng: "Engine", rec: "ArrayRecord", v: int, k1, k2, scan: LevelScan) -> Iterator[tuple]:
    """Closest-ancestor entries of one array; the caller sets the IO phase."""
    dev = eng.device
    eid = rec.extent
    lo, hi = 0, len(rec.array)
    while lo < hi:
        mid = (lo + hi) // 2
        scan.probes += 1
        if dev.read_record(eid, mid)[0] < k1:
            lo = mid + 1
        else:
            hi = mid
    last = _NOKEY
    level = rec.level
    for e in dev.iter_records(eid, lo):
        if e[0] > k2:
            break
        scan.examined += 1
        if e[0] != last and e[1] <= v:
            last = e[0]
            scan.reported += 1
            yield (e[0], -e[1], level, e)


def range_query(eng: "Engine", v: int, k1, k2) -> QueryResult:
    """Entries of ``D_v`` with keys in ``[k1, k2]``, tombstones removed."""
    if k1 > k2:
        raise ValueError(f"empty key range [{k1}, {k2}]")
    with eng.lock.read():
        if not 0 <= v <= eng.version:
            raise ValueError(f"version {v} outside [0, {eng.version}]")
        dev = eng.device
        before = dev.snapshot_report().total
        extent_before = {}
        records, hops = _serving_records(eng, v) if v > 0 else ([], 0)
        scans = []
        streams = []
        for rec in records:
            scan = LevelScan(rec.level, rec.id, rec.lo, rec.hi, len(rec.array))
            scans.append(scan)
            extent_before[rec.extent] = dev.extent_reads(rec.extent)
            streams.append(_stream(eng, rec, v, k1, k2, scan))
        entries = []
        last = _NOKEY
        with dev.phase("query"):
            for key, _, _, e in heapq.merge(*streams):
                if key == last:
                    continue
                last = key
                if e[2] is not None:
                    entries.append((e[0], e[1], e[2]))
        for scan, rec in zip(scans, records):
            scan.blocks = dev.extent_reads(rec.extent) - extent_before[rec.extent]
        return QueryResult(entries, scans, hops, dev.snapshot_report().total - before)


def point_query(eng: "Engine", v: int, k) -> tuple[int, int, bytes] | None:
    res = range_query(eng, v, k, k)
    return res.entries[0] if res.entries else None

