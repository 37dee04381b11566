"""The leveled structure: update path, promotion, extraction, subdivision.

Level ``l`` holds arrays of at most ``2**(l+1)`` elements with at least
``2**l / 3`` live elements at every version of their interval. Within a
level, intervals are disjoint. A level's array that serves version ``v`` is
the one with the largest ``w_lo <= v`` (the array holding the closest
ancestor of ``v``), which is also the merge target when promoting into it.
"""

from __future__ import annotations

import heapq
import logging
import threading
from bisect import bisect_left, bisect_right, insort
from collections import Counter
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from fractions import Fraction
from math import floor
from pathlib import Path
from typing import Iterator

from . import iomodel
from .iomodel import BlockDevice
from .varray import Element, VersionedArray, from_sorted, merge_many

log = logging.getLogger(__name__)

MIN_DENSITY = Fraction(1, 6)
LEAD_FRACTION = Fraction(2, 3)


class QueryMode(str, Enum):
    AUX_INDEX = "aux"
    SUCC_POINTERS = "succ"


class InvariantViolation(AssertionError):
    pass


_TRUE = {"1", "true", "on", "yes"}
_FALSE = {"0", "false", "off", "no"}


@dataclass(frozen=True)
class EngineConfig:
    query_mode: QueryMode = QueryMode.AUX_INDEX
    invariant_checks: bool = False
    block_size: int = 64
    cache_blocks: int = 256
    # fault injection for the verifier's self-test; "skip_merge_dedup" only
    fault: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "query_mode", QueryMode(self.query_mode))
        if self.fault not in (None, "skip_merge_dedup"):
            raise ValueError(f"unknown fault {self.fault!r}")

    @classmethod
    def from_mapping(cls, items: dict[str, str]) -> "EngineConfig":
        kw: dict = {}
        for key, raw in items.items():
            val = raw.strip()
            if key == "query_mode":
                kw[key] = QueryMode(val.lower())
            elif key == "invariant_checks":
                if val.lower() in _TRUE:
                    kw[key] = True
                elif val.lower() in _FALSE:
                    kw[key] = False
                else:
                    raise ValueError(f"invariant_checks: not a boolean: {val!r}")
            elif key in ("block_size", "cache_blocks"):
                kw[key] = int(val)
            elif key == "fault":
                kw[key] = val or None
            else:
                raise ValueError(f"unknown config key {key!r}")
        return cls(**kw)

    @classmethod
    def from_file(cls, path: str | Path) -> "EngineConfig":
        items = {}
        for n, line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{n}: expected key=value")
            k, v = line.split("=", 1)
            items[k.strip()] = v
        return cls.from_mapping(items)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["query_mode"] = self.query_mode.value
        return d


@dataclass(eq=False)
class ArrayRecord:
    id: int
    level: int
    lo: int
    hi: int
    array: VersionedArray | None  # None for a dummy
    extent: int | None = None
    succ: int | None = None

    @property
    def is_dummy(self) -> bool:
        return self.array is None

    def __len__(self) -> int:
        return 0 if self.array is None else len(self.array)


class _SortedLos:
    """Records keyed by ``lo`` with predecessor search."""

    def __init__(self) -> None:
        self.los: list[int] = []
        self.by_lo: dict[int, ArrayRecord] = {}

    def __len__(self) -> int:
        return len(self.los)

    def __iter__(self) -> Iterator[ArrayRecord]:
        return (self.by_lo[lo] for lo in self.los)

    def add(self, rec: ArrayRecord) -> int:
        if rec.lo in self.by_lo:
            raise InvariantViolation(f"level {rec.level}: two records start at version {rec.lo}")
        insort(self.los, rec.lo)
        self.by_lo[rec.lo] = rec
        return bisect_left(self.los, rec.lo)

    def remove(self, rec: ArrayRecord) -> int:
        i = bisect_left(self.los, rec.lo)
        del self.los[i]
        del self.by_lo[rec.lo]
        return i

    def pred_pos(self, v: int) -> int:
        return bisect_right(self.los, v) - 1

    def pred(self, v: int) -> ArrayRecord | None:
        i = self.pred_pos(v)
        return self.by_lo[self.los[i]] if i >= 0 else None

    def from_lo(self, lo: int) -> list[ArrayRecord]:
        return [self.by_lo[x] for x in self.los[bisect_left(self.los, lo):]]


class Level:
    def __init__(self, number: int) -> None:
        self.number = number
        self.live = _SortedLos()
        self.routes = _SortedLos()  # live arrays plus dummies; successor mode only
        self.index_extent: int | None = None


class _RWLock:
    """Many readers or one writer."""

    def __init__(self) -> None:
        self._cond = threading.Condition()
        self._readers = 0
        self._writer = False

    @contextmanager
    def read(self):
        with self._cond:
            while self._writer:
                self._cond.wait()
            self._readers += 1
        try:
            yield
        finally:
            with self._cond:
                self._readers -= 1
                self._cond.notify_all()

    @contextmanager
    def write(self):
        with self._cond:
            while self._writer or self._readers:
                self._cond.wait()
            self._writer = True
        try:
            yield
        finally:
            with self._cond:
                self._writer = False
                self._cond.notify_all()


# -- pure restructuring steps ---------------------------------------------------


def size_bound(level: int) -> int:
    return 2 << level


def extract_point(arr: VersionedArray, level: int) -> int | None:
    """Smallest ``v`` with ``live(v) > 2^(l+1)/3`` and ``|S(A,v)| >= 2^(l+1)``.

    ``live`` only grows along the interval and ``|S|`` only shrinks, so the
    first condition holds on a suffix and the second on a prefix. The size
    test is inclusive so that no version left behind can pass both tests,
    which is what the subdivision guarantee needs.
    """
    k = size_bound(level)
    n = len(arr)
    if n < k:
        return None
    need = floor(Fraction(k, 3)) + 1
    firsts = []
    elems = arr.elems
    w_lo = arr.w_lo
    for i in range(n):
        if i + 1 == n or elems[i + 1][0] != elems[i][0]:
            ver = elems[i][1]
            firsts.append(ver if ver > w_lo else w_lo)
    if len(firsts) < need:
        return None
    first_live = heapq.nsmallest(need, firsts)[-1]
    last_big = heapq.nlargest(k, arr.live_hi)[-1]
    return first_live if first_live <= last_big else None


def extract_promotable(arr: VersionedArray, level: int) -> tuple[list[Element], tuple[int, int]] | None:
    v = extract_point(arr, level)
    if v is None:
        return None
    return arr.suffix_subarray(v), (v, arr.w_hi)


def remainder(arr: VersionedArray, extracted: tuple[int, int]) -> VersionedArray | None:
    """What stays at the level after ``[v, w_hi]`` is promoted: every element
    live somewhere in ``[w_lo, v - 1]``. ``None`` when nothing remains."""
    v = extracted[0]
    if v <= arr.w_lo:
        return None
    return from_sorted(arr.window(arr.w_lo, v - 1), arr.w_lo, v - 1, arr.level)


def _restricted_suffix_counts(arr: VersionedArray, c: int) -> list[int]:
    return [min(hi, c) for lo, hi in zip(arr.live_lo, arr.live_hi) if lo <= c]


def subdivide(arr: VersionedArray, level: int) -> list[tuple[list[Element], int, int]]:
    """Chop a sparse array into pieces, latest versions first.

    Each round takes the remaining interval ``[w_lo, c]`` and cuts at the
    smallest ``w > w_lo`` whose restricted suffix ``S(A, w)`` over ``[w, c]``
    holds fewer than ``2^(l+1)`` elements. A remainder that is already that
    small, or a single version, is emitted whole and ends the loop. If no cut
    exists the whole remainder is emitted too (the case the level constraints
    rule out).
    """
    k = size_bound(level)
    lo = arr.w_lo
    c = arr.w_hi
    out = []
    while True:
        if c == lo:
            out.append((arr.window(lo, lo), lo, lo))
            return out
        his = _restricted_suffix_counts(arr, c)
        if len(his) < k:
            out.append((arr.window(lo, c), lo, c))
            return out
        w = max(heapq.nlargest(k, his)[-1] + 1, lo + 1)
        if w > c:
            out.append((arr.window(lo, c), lo, c))
            return out
        out.append((arr.window(w, c), w, c))
        c = w - 1


def subdivide_literal(arr: VersionedArray, level: int) -> list[tuple[list[Element], int, int]]:
    """Step-by-step walk down the version path; reference for :func:`subdivide`."""
    k = size_bound(level)
    lo = arr.w_lo
    c = arr.w_hi
    out = []

    def restricted_size(w: int) -> int:
        return sum(1 for a, b in zip(arr.live_lo, arr.live_hi) if a <= c and b >= w)

    while True:
        if c == lo or restricted_size(lo) < k:
            out.append((arr.window(lo, c), lo, c))
            return out
        v = lo
        while True:
            w = v + 1
            if w > c:
                out.append((arr.window(lo, c), lo, c))
                return out
            if restricted_size(w) >= k:
                v = w
            else:
                out.append((arr.window(w, c), w, c))
                c = w - 1
                break


# -- the engine ---------------------------------------------------------------


class Engine:
    def __init__(self, config: EngineConfig | None = None, device: BlockDevice | None = None) -> None:
        self.config = config or EngineConfig()
        self.device = device or BlockDevice(self.config.block_size, self.config.cache_blocks)
        self.version = 0
        self.levels: list[Level] = []
        self.records: dict[int, ArrayRecord] = {}
        self._next_id = 1
        self.counters: Counter[str] = Counter()
        self.violations: list[str] = []
        self.lock = _RWLock()
        self._touched: set[int] = set()
        self._touched_levels: set[int] = set()
        self._route_before: dict[int, dict[int, int | None]] = {}
        self._retired_succ: dict[int, int | None] = {}
        self._hl_extent = self.device.alloc_extent(0)

    @property
    def succ_mode(self) -> bool:
        return self.config.query_mode is QueryMode.SUCC_POINTERS

    # -- public API ------------------------------------------------------------

    def update(self, key: int, payload: bytes | None) -> int:
        """Write ``key`` (``payload=None`` deletes it) as a new latest version."""
        with self.lock.write():
            self.version += 1
            v = self.version
            arr = VersionedArray((Element(key, v, payload),), v, v, 0)
            with self.device.phase("update"):
                eid = self._store(arr)
            self._promote(arr, eid, 0)
            self._finish_update()
            return v

    def delete(self, key: int) -> int:
        return self.update(key, None)

    def range_query(self, v: int, k1, k2):
        from .query import range_query

        return range_query(self, v, k1, k2)

    def point_query(self, v: int, k):
        from .query import point_query

        return point_query(self, v, k)

    def live_records(self) -> Iterator[ArrayRecord]:
        for lvl in self.levels:
            yield from lvl.live

    def space(self) -> int:
        return sum(len(r) for r in self.live_records())

    def find_array(self, level: int, v: int, *, charge: bool = True) -> ArrayRecord | None:
        """Live array at ``level`` serving ``v``.

        That is the entry with the largest start ``<= v`` in the level index,
        unless that entry marks versions already promoted to the next level.
        """
        if level >= len(self.levels):
            return None
        lvl = self.levels[level]
        if charge and not self.succ_mode:
            self._charge_search(lvl, v)
        rec = lvl.routes.pred(v)
        return None if rec is None or rec.is_dummy else rec

    def highest_level(self, v: int, *, charge: bool = True) -> int:
        """Highest level with a live array serving ``v``; -1 when none."""
        if charge:
            with self.device.phase("aux"):
                n = self.device.extent_size(self._hl_extent)
                firsts = self.device.read_seq(self._hl_extent, 0, n)
        else:
            firsts = [lvl.live.los[0] if len(lvl.live) else None for lvl in self.levels]
        top = -1
        for l, first in enumerate(firsts):
            if first is not None and first <= v:
                top = l
        return top

    def succ_of(self, rec_id: int) -> int | None:
        if not self.succ_mode:
            raise ValueError("successor pointers are only kept in succ mode")
        rec = self.records[rec_id]
        if rec.succ is not None and rec.succ not in self.records:
            raise InvariantViolation(f"record {rec_id} has dangling successor {rec.succ}")
        return rec.succ

    def route_start(self, v: int) -> ArrayRecord | None:
        if not self.levels:
            return None
        lvl = self.levels[0]
        self._charge_search(lvl, v)
        return lvl.routes.pred(v)

    # -- storage ----------------------------------------------------------------

    def _store(self, arr: VersionedArray) -> int:
        eid = self.device.alloc_extent(len(arr))
        self.device.write_seq(eid, 0, arr.elems)
        return eid

    def _read(self, eid: int) -> None:
        self.device.read_seq(eid, 0, self.device.extent_size(eid))

    def _level(self, l: int) -> Level:
        while len(self.levels) <= l:
            lvl = Level(len(self.levels))
            lvl.index_extent = self.device.alloc_extent(0)
            self.levels.append(lvl)
        return self.levels[l]

    def _index_entries(self, lvl: Level) -> _SortedLos:
        return lvl.routes

    def _sync_index(self, lvl: Level, pos: int) -> None:
        """Rewrite the level's on-device version index from ``pos`` onwards."""
        los = self._index_entries(lvl).los
        dev = self.device
        with dev.phase("aux"):
            if len(los) > dev.extent_size(lvl.index_extent):
                lvl.index_extent = dev.resize_extent(lvl.index_extent, max(4, 2 * len(los)))
            dev.write_seq(lvl.index_extent, pos, los[pos:])

    def _charge_search(self, lvl: Level, v: int) -> None:
        """Binary search the level index on the device (aux phase)."""
        n = len(self._index_entries(lvl))
        dev = self.device
        with dev.phase("aux"):
            lo, hi = 0, n
            while lo < hi:
                mid = (lo + hi) // 2
                if dev.read_record(lvl.index_extent, mid) <= v:
                    lo = mid + 1
                else:
                    hi = mid

    def _sync_highest(self) -> None:
        firsts = [lvl.live.los[0] if len(lvl.live) else None for lvl in self.levels]
        dev = self.device
        with dev.phase("aux"):
            if dev.extent_size(self._hl_extent) != len(firsts):
                self._hl_extent = dev.resize_extent(self._hl_extent, len(firsts))
            dev.write_seq(self._hl_extent, 0, firsts)

    def _new_id(self) -> int:
        rid = self._next_id
        self._next_id += 1
        return rid

    def _register(self, arr: VersionedArray, eid: int, l: int, reuse: int | None = None) -> ArrayRecord:
        """Add a live array at level ``l``; ``reuse`` keeps the id of the array
        it rewrites so successor edges pointing at it stay valid."""
        lvl = self._level(l)
        rec = ArrayRecord(reuse if reuse is not None else self._new_id(), l, arr.w_lo, arr.w_hi, arr, eid)
        if reuse is not None:
            rec.succ = self._retired_succ.pop(reuse, None)
        self.records[rec.id] = rec
        lvl.live.add(rec)
        for old in list(lvl.routes.from_lo(rec.lo)):
            if old.lo > rec.hi:
                break
            self._route_remove(lvl, old)
            if old.is_dummy:
                del self.records[old.id]
        pos = self._route_add(lvl, rec)
        self._sync_index(lvl, pos)
        self._touched.add(rec.id)
        self._touched_levels.add(l)
        return rec

    def _unregister(self, rec: ArrayRecord) -> None:
        lvl = self.levels[rec.level]
        lvl.live.remove(rec)
        pos = self._route_remove(lvl, rec)
        del self.records[rec.id]
        self._retired_succ[rec.id] = rec.succ
        self.device.free_extent(rec.extent)
        self._sync_index(lvl, pos)
        self._touched.discard(rec.id)
        self._touched_levels.add(rec.level)

    def _leave_dummy(self, l: int, lo: int, hi: int) -> None:
        """Placeholder at level ``l`` for versions ``[lo, hi]`` promoted upwards."""
        lvl = self.levels[l]
        for old in list(lvl.routes.from_lo(lo)):
            if old.lo > hi:
                break
            if not old.is_dummy:
                raise InvariantViolation(f"dummy [{lo},{hi}] would shadow live record {old.id}")
            self._route_remove(lvl, old)
            del self.records[old.id]
        rec = ArrayRecord(self._new_id(), l, lo, hi, None)
        self.records[rec.id] = rec
        pos = self._route_add(lvl, rec)
        self._sync_index(lvl, pos)
        self.counters["dummies"] += 1

    def _route_seen(self, lvl: Level, lo: int) -> None:
        if not self.succ_mode:
            return
        before = self._route_before.setdefault(lvl.number, {})
        if lo not in before:
            old = lvl.routes.by_lo.get(lo)
            before[lo] = old.id if old is not None else None

    def _route_add(self, lvl: Level, rec: ArrayRecord) -> int:
        self._route_seen(lvl, rec.lo)
        return lvl.routes.add(rec)

    def _route_remove(self, lvl: Level, rec: ArrayRecord) -> int:
        self._route_seen(lvl, rec.lo)
        return lvl.routes.remove(rec)

    def _rewire(self) -> None:
        """Recompute successor edges that the last update can have changed.

        A route's successor is the route one level up with the largest start
        ``<= `` its own start. Only routes starting between the first changed
        start above and the next unchanged start above can move.
        """
        changed: dict[int, list[int]] = {}
        for l, before in self._route_before.items():
            routes = self.levels[l].routes
            xs = []
            for lo, old_id in before.items():
                now = routes.by_lo.get(lo)
                if (now.id if now is not None else None) != old_id:
                    xs.append(lo)
            if xs:
                changed[l] = sorted(xs)
        self._route_before.clear()
        for l, xs in changed.items():
            routes = self.levels[l].routes
            for lo in xs:
                rec = routes.by_lo.get(lo)
                if rec is not None:
                    self._set_succ(l, rec)
            if l == 0:
                continue
            below = self.levels[l - 1].routes
            j = bisect_right(routes.los, xs[-1])
            bound = routes.los[j] if j < len(routes.los) else None
            i = bisect_left(below.los, xs[0])
            while i < len(below.los) and (bound is None or below.los[i] < bound):
                self._set_succ(l - 1, below.by_lo[below.los[i]])
                i += 1

    def _set_succ(self, l: int, rec: ArrayRecord) -> None:
        above = self.levels[l + 1].routes if l + 1 < len(self.levels) else None
        target = above.pred(rec.lo) if above is not None else None
        succ = target.id if target is not None else None
        if succ != rec.succ:
            rec.succ = succ
            lvl = self.levels[l]
            with self.device.phase("aux"):
                self.device.write_seq(lvl.index_extent, lvl.routes.pred_pos(rec.lo), [rec.lo])
            self.counters["succ_rewires"] += 1

    # -- promote ----------------------------------------------------------------

    def _promote(self, arr: VersionedArray, eid: int, l: int) -> None:
        dev = self.device
        lvl = self._level(l)
        dedup = self.config.fault != "skip_merge_dedup"
        pred = lvl.live.pred(arr.w_lo)
        targets = lvl.live.from_lo(pred.lo) if pred is not None else lvl.live.from_lo(arr.w_lo)
        if targets:
            with dev.phase("merge"):
                for t in targets:
                    self._read(t.extent)
                self._read(eid)
                merged = merge_many([t.array for t in targets] + [arr], targets[0].lo,
                                    max(arr.w_hi, targets[-1].hi), l, dedup=dedup)
                for t in targets:
                    self._unregister(t)
                dev.free_extent(eid)
                eid = self._store(merged)
            reuse = targets[0].id
            self.counters["merges"] += 1
            if len(targets) > 1:
                self.counters["overlap_absorptions"] += 1
        else:
            merged = replace(arr, level=l) if arr.level != l else arr
            reuse = None
        rec = self._register(merged, eid, l, reuse)

        k = size_bound(l)
        while len(rec.array) >= k:
            cur = rec.array
            v = extract_point(cur, l)
            if v is None:
                break
            with dev.phase("merge"):
                self._read(rec.extent)
                up = from_sorted(cur.suffix_subarray(v), v, cur.w_hi, l + 1)
                up_eid = self._store(up)
            self.counters["promotions"] += 1
            self._check_promotion(up, l)
            self._promote(up, up_eid, l + 1)
            rest = remainder(cur, (v, cur.w_hi))
            with dev.phase("merge"):
                self._unregister(rec)
                if rest is not None:
                    rec = self._register(rest, self._store(rest), l, rec.id)
            self._leave_dummy(l, v, cur.w_hi)
            if rest is None:
                return

        if len(rec.array) > k:
            if rec.array.density() >= MIN_DENSITY:
                self.counters["oversized_dense"] += 1
        if rec.array.density() < MIN_DENSITY:
            cur = rec.array
            with dev.phase("subdivide"):
                self._read(rec.extent)
                pieces = subdivide(cur, l)
                self._unregister(rec)
                built = []
                for elems, lo, hi in pieces:
                    piece = from_sorted(elems, lo, hi, l)
                    built.append(piece)
                    self._register(piece, self._store(piece), l, rec.id if lo == rec.lo else None)
            self.counters["subdivisions"] += 1
            self.counters["subdivision_pieces"] += len(built)
            self._check_subdivision(built, l)

    def _finish_update(self) -> None:
        if self.succ_mode and self._route_before:
            self._rewire()
        self._retired_succ.clear()
        if self._touched_levels:
            self._sync_highest()
        if self.config.invariant_checks:
            for rid in sorted(self._touched):
                rec = self.records.get(rid)
                if rec is not None and not rec.is_dummy:
                    self.violations.extend(check_record(rec))
            for l in sorted(self._touched_levels):
                self.violations.extend(check_level(self, l))
            if self.violations:
                raise InvariantViolation("\n".join(self.violations))
        self._touched.clear()
        self._touched_levels.clear()

    # -- event post-conditions --------------------------------------------------

    def _check_promotion(self, up: VersionedArray, l: int) -> None:
        if not self.config.invariant_checks:
            return
        self.counters["promotion_checks"] += 1
        k = size_bound(l)
        bad = []
        if up.min_live() < Fraction(k, 3):
            bad.append(f"live {up.min_live()} < {k}/3")
        if up.lead_total() < LEAD_FRACTION * k:
            bad.append(f"lead {up.lead_total()} < (2/3)*{k}")
        if up.density() < MIN_DENSITY:
            bad.append(f"density {up.density()} < 1/6")
        if bad:
            self.violations.append(f"promotion {l}->{l + 1} of {up!r}: " + "; ".join(bad))

    def _check_subdivision(self, pieces: list[VersionedArray], l: int) -> None:
        if not self.config.invariant_checks:
            return
        self.counters["subdivision_checks"] += 1
        k = size_bound(l)
        bad = []
        low_lead = 0
        for p in pieces:
            if len(p) >= k:
                bad.append(f"{p!r} not smaller than {k}")
            if Fraction(p.lead_total(), len(p)) < LEAD_FRACTION:
                low_lead += 1
            if p.density() < MIN_DENSITY:
                bad.append(f"{p!r} density {p.density()} < 1/6")
        if low_lead > 1:
            bad.append(f"{low_lead} pieces with lead fraction < 2/3")
        if bad:
            self.violations.append(f"subdivision at level {l}: " + "; ".join(bad))

    # -- snapshots --------------------------------------------------------------

    def save(self, path: str | Path) -> None:
        with self.lock.read():
            records = []
            extents = []
            for lvl in self.levels:
                for rec in lvl.routes:
                    entry = {"id": rec.id, "level": rec.level, "lo": rec.lo, "hi": rec.hi,
                             "dummy": rec.is_dummy, "succ": rec.succ}
                    if not rec.is_dummy:
                        entry["extent"] = len(extents)
                        extents.append((rec.id, rec.array.elems))
                    records.append(entry)
            meta = {"version": self.version, "config": self.config.to_dict(), "next_id": self._next_id,
                    "levels": len(self.levels), "records": records, "counters": dict(self.counters)}
            iomodel.write_image(path, meta, extents)

    @classmethod
    def load(cls, path: str | Path, config: EngineConfig | None = None) -> "Engine":
        meta, extents = iomodel.read_image(path)
        saved = EngineConfig.from_mapping({k: str(v) for k, v in meta["config"].items() if v is not None})
        cfg = config or saved
        if cfg.query_mode is not saved.query_mode:
            raise ValueError("snapshot was written in a different query mode")
        eng = cls(cfg)
        eng.version = meta["version"]
        eng._next_id = meta["next_id"]
        eng.counters.update(meta.get("counters", {}))
        if meta["levels"]:
            eng._level(meta["levels"] - 1)
        for entry in meta["records"]:
            lvl = eng.levels[entry["level"]]
            if entry["dummy"]:
                rec = ArrayRecord(entry["id"], entry["level"], entry["lo"], entry["hi"], None)
            else:
                elems = tuple(Element(*r) for r in extents[entry["id"]])
                arr = VersionedArray(elems, entry["lo"], entry["hi"], entry["level"])
                rec = ArrayRecord(entry["id"], entry["level"], entry["lo"], entry["hi"], arr, eng._store(arr))
                lvl.live.add(rec)
            rec.succ = entry["succ"]
            eng.records[rec.id] = rec
            lvl.routes.add(rec)
        for lvl in eng.levels:
            eng._sync_index(lvl, 0)
        eng._sync_highest()
        eng.device.flush()
        eng.device.reset_counters()
        return eng


# -- invariant checks -----------------------------------------------------------


def check_record(rec: ArrayRecord) -> list[str]:
    """Level constraints for one live array; returns violation messages."""
    arr = rec.array
    l = rec.level
    out = []
    name = f"record {rec.id} {arr!r}"
    for a, b in zip(arr.elems, arr.elems[1:]):
        if not (a.key < b.key or (a.key == b.key and a.version > b.version)):
            out.append(f"{name}: order broken at {a!r}, {b!r}")
            break
    for e, lo, hi in zip(arr.elems, arr.live_lo, arr.live_hi):
        if lo > hi:
            out.append(f"{name}: {e!r} live nowhere in W")
            break
        if e.version > arr.w_hi:
            out.append(f"{name}: {e!r} newer than w_hi")
            break
    if not arr.elems:
        out.append(f"{name}: empty array registered")
        return out
    k = size_bound(l)
    dens = arr.density()
    if len(arr) > k and (extract_point(arr, l) is not None or dens < MIN_DENSITY):
        out.append(f"{name}: size {len(arr)} > {k}")
    if arr.min_live() < Fraction(1 << l, 3):
        out.append(f"{name}: min live {arr.min_live()} < 2^{l}/3")
    if dens < MIN_DENSITY:
        out.append(f"{name}: density {dens} < 1/6")
    return out


def check_level(eng: Engine, l: int) -> list[str]:
    if l >= len(eng.levels):
        return []
    out = []
    prev = None
    for rec in eng.levels[l].live:
        if prev is not None and rec.lo <= prev.hi:
            out.append(f"level {l}: intervals [{prev.lo},{prev.hi}] and [{rec.lo},{rec.hi}] overlap")
        prev = rec
    if eng.succ_mode:
        for rec in eng.levels[l].routes:
            if rec.succ is not None and rec.succ not in eng.records:
                out.append(f"level {l}: record {rec.id} has dangling successor {rec.succ}")
    return out


def check_all(eng: Engine) -> list[str]:
    """Exhaustive sweep over every live array and level."""
    out = []
    for rec in eng.live_records():
        out.extend(check_record(rec))
    for l in range(len(eng.levels)):
        out.extend(check_level(eng, l))
    if eng.succ_mode:
        firsts = [lvl.routes.los[0] for lvl in eng.levels if len(lvl.routes)]
        if firsts != sorted(firsts):
            out.append(f"route starts not monotone across levels: {firsts}")
        for l, lvl in enumerate(eng.levels):
            above = eng.levels[l + 1].routes if l + 1 < len(eng.levels) else None
            for lo in lvl.routes.los:
                rec = lvl.routes.by_lo[lo]
                want = above.pred(lo) if above is not None else None
                want_id = want.id if want is not None else None
                if rec.succ != want_id:
                    out.append(f"level {l} route at {lo}: succ {rec.succ}, expected {want_id}")
    return out
