"""Versioned arrays: the static sorted runs every restructuring step works on.

Versions are integers in creation order, so on the version path ``u`` is an
ancestor of ``v`` exactly when ``u <= v``. Elements are ordered by key
ascending, then version descending, which puts the newest copy of each key
first inside its key group.

Liveness is array-local: an element is live at ``w`` if it is the newest
element of its key in the array with version ``<= w``.
"""

from __future__ import annotations

import heapq
from bisect import bisect_left
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, NamedTuple, Sequence

TOMBSTONE = None


class Element(NamedTuple):
    key: Any
    version: int
    payload: bytes | None  # None is the tombstone


class LiveInterval(NamedTuple):
    index: int
    lo: int
    hi: int

    @property
    def empty(self) -> bool:
        return self.lo > self.hi


def _order(e: Element):
    return (e[0], -e[1])


@dataclass(frozen=True, eq=False)
class VersionedArray:
    """A sorted run of elements tagged with the version interval ``[w_lo, w_hi]``.

    Instances are immutable. Use :func:`build` to construct one from loose
    elements; the engine uses :func:`from_sorted` on already-ordered runs.
    """

    elems: tuple[Element, ...]
    w_lo: int
    w_hi: int
    level: int = 0
    keys: list = field(init=False, repr=False)
    live_lo: list[int] = field(init=False, repr=False)
    live_hi: list[int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.w_lo > self.w_hi:
            raise ValueError(f"empty version interval [{self.w_lo}, {self.w_hi}]")
        keys, lo, hi = _intervals(self.elems, self.w_lo, self.w_hi)
        object.__setattr__(self, "keys", keys)
        object.__setattr__(self, "live_lo", lo)
        object.__setattr__(self, "live_hi", hi)

    def __len__(self) -> int:
        return len(self.elems)

    def __repr__(self) -> str:
        return f"VersionedArray(n={len(self.elems)}, W=[{self.w_lo},{self.w_hi}], level={self.level})"

    @property
    def interval(self) -> tuple[int, int]:
        return (self.w_lo, self.w_hi)

    def live_intervals(self) -> list[LiveInterval]:
        return [LiveInterval(i, lo, hi) for i, (lo, hi) in enumerate(zip(self.live_lo, self.live_hi))]

    def is_live(self, index: int, w: int) -> bool:
        return self.live_lo[index] <= w <= self.live_hi[index]

    def live_count(self, w: int) -> int:
        """Number of elements live at ``w``.

        This equals the number of distinct keys with an element of version
        ``<= w``, which is why it never decreases along the interval.
        """
        if not self.w_lo <= w <= self.w_hi:
            raise ValueError(f"version {w} outside [{self.w_lo}, {self.w_hi}]")
        return sum(1 for lo, hi in zip(self.live_lo, self.live_hi) if lo <= w <= hi)

    def live_profile(self) -> list[tuple[int, int]]:
        """Step function of ``live_count`` as ``(from_version, count)`` pairs."""
        delta: dict[int, int] = {self.w_lo: 0}
        for lo, hi in zip(self.live_lo, self.live_hi):
            if lo > hi:
                continue
            delta[lo] = delta.get(lo, 0) + 1
            if hi < self.w_hi:
                delta[hi + 1] = delta.get(hi + 1, 0) - 1
        out = []
        running = 0
        for w in sorted(delta):
            running += delta[w]
            out.append((w, running))
        return out

    def min_live(self) -> int:
        return min(c for _, c in self.live_profile())

    def density(self) -> Fraction:
        """``min_w live_count(w) / |A|`` over the whole interval, exactly."""
        if not self.elems:
            raise ValueError("density of an empty array is undefined")
        return Fraction(self.min_live(), len(self.elems))

    def lead_count(self, w: int) -> int:
        return sum(1 for e in self.elems if e.version == w)

    def lead_total(self) -> int:
        lo, hi = self.w_lo, self.w_hi
        return sum(1 for e in self.elems if lo <= e.version <= hi)

    def suffix_count(self, v: int) -> int:
        """``|S(A, v)|`` without materializing it."""
        return sum(1 for hi in self.live_hi if hi >= v)

    def suffix_subarray(self, v: int) -> list[Element]:
        """Elements live somewhere in ``[v, w_hi]``, in array order."""
        if not self.w_lo <= v <= self.w_hi:
            raise ValueError(f"version {v} outside [{self.w_lo}, {self.w_hi}]")
        return [e for e, hi in zip(self.elems, self.live_hi) if hi >= v]

    def window(self, lo: int, hi: int) -> list[Element]:
        """Elements live somewhere in ``[lo, hi]``, in array order."""
        return [e for e, a, b in zip(self.elems, self.live_lo, self.live_hi) if a <= hi and b >= lo]

    def scan_range(self, v: int, k1, k2) -> list[Element]:
        return self.scan(v, k1, k2)[0]

    def scan(self, v: int, k1, k2) -> tuple[list[Element], int]:
        """Closest-ancestor entry per key in ``[k1, k2]`` plus the number of
        elements examined after the binary search."""
        elems = self.elems
        i = start = bisect_left(self.keys, k1)
        n = len(elems)
        out: list[Element] = []
        last_key = _NOKEY
        while i < n:
            e = elems[i]
            if e[0] > k2:
                break
            if e[0] != last_key and e[1] <= v:
                out.append(e)
                last_key = e[0]
            i += 1
        return out, i - start


_NOKEY = object()


def _intervals(elems: Sequence[Element], w_lo: int, w_hi: int):
    keys = [e[0] for e in elems]
    los: list[int] = []
    his: list[int] = []
    prev_key = _NOKEY
    prev_ver = 0
    for k, ver, _ in elems:
        lo = ver if ver > w_lo else w_lo
        hi = prev_ver - 1 if k == prev_key else w_hi
        if hi > w_hi:
            hi = w_hi
        los.append(lo)
        his.append(hi)
        prev_key, prev_ver = k, ver
    return keys, los, his


def from_sorted(elems: Iterable[Element], w_lo: int, w_hi: int, level: int = 0, *, dedup: bool = True) -> VersionedArray:
    """Wrap an already-ordered run, dropping duplicates and elements that are
    dead over the whole interval."""
    out: list[Element] = []
    last_key = _NOKEY
    last_ver = None
    for e in elems:
        k, ver = e[0], e[1]
        if k == last_key:
            if dedup and ver == last_ver:
                continue
            if last_ver <= w_lo:
                # shadowed by a newer copy already live at w_lo
                continue
        if ver > w_hi:
            raise ValueError(f"element {e!r} is newer than w_hi={w_hi}")
        out.append(e)
        last_key, last_ver = k, ver
    return VersionedArray(tuple(out), w_lo, w_hi, level)


def build(elements: Iterable[Element], w_lo: int, w_hi: int, level: int = 0) -> VersionedArray:
    """Normalize loose elements into a versioned array.

    Raises ``ValueError`` for elements newer than ``w_hi`` and for elements
    that would not be live anywhere in ``[w_lo, w_hi]``.
    """
    elems = [Element(*e) for e in elements]
    for e in elems:
        if e.version > w_hi:
            raise ValueError(f"element {e!r} is newer than w_hi={w_hi}")
        if e.version < 0:
            raise ValueError(f"negative version in {e!r}")
    elems.sort(key=_order)
    deduped: list[Element] = []
    for e in elems:
        if deduped and deduped[-1][0] == e[0] and deduped[-1][1] == e[1]:
            continue
        deduped.append(e)
    arr = VersionedArray(tuple(deduped), w_lo, w_hi, level)
    for i, (lo, hi) in enumerate(zip(arr.live_lo, arr.live_hi)):
        if lo > hi:
            raise ValueError(f"element {arr.elems[i]!r} is dead over [{w_lo}, {w_hi}]")
    return arr


def merge_many(arrays: Sequence[VersionedArray], w_lo: int, w_hi: int, level: int, *, dedup: bool = True) -> VersionedArray:
    """Linear k-way merge of sorted runs into one array over ``[w_lo, w_hi]``."""
    runs = [a.elems for a in arrays if a.elems]
    if len(runs) == 1:
        stream: Iterable[Element] = runs[0]
    else:
        stream = heapq.merge(*runs, key=_order)
    return from_sorted(stream, w_lo, w_hi, level, dedup=dedup)


def merge(a: VersionedArray, b: VersionedArray, *, fill_gap: bool = False, level: int | None = None,
          dedup: bool = True) -> VersionedArray:
    """Merge two arrays; the result covers ``[min lo, max hi]``.

    Intervals separated by a gap are rejected unless ``fill_gap`` is set, in
    which case the hull is used (the promote path does this when the merge
    target is the closest ancestor rather than the parent).
    """
    first, second = sorted((a, b), key=lambda x: x.w_lo)
    if second.w_lo > first.w_hi + 1 and not fill_gap:
        raise ValueError(f"non-contiguous intervals {first.interval} and {second.interval}")
    lvl = max(a.level, b.level) if level is None else level
    return merge_many([a, b], first.w_lo, max(a.w_hi, b.w_hi), lvl, dedup=dedup)
