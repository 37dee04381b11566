"""Brute-force reference: replay the update log to answer any versioned query."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .varray import VersionedArray


@dataclass
class OracleLog:
    # version i is the update at index i - 1
    updates: list[tuple[int, bytes | None]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.updates)

    def append(self, key: int, payload: bytes | None) -> int:
        self.updates.append((key, payload))
        return len(self.updates)

    def _check(self, v: int) -> None:
        if not 0 <= v <= len(self.updates):
            raise ValueError(f"version {v} outside [0, {len(self.updates)}]")

    def replay(self, v: int) -> dict[int, tuple[int, bytes | None]]:
        """``D_v`` including tombstones: key -> (version, payload)."""
        self._check(v)
        d: dict[int, tuple[int, bytes | None]] = {}
        for i, (k, p) in enumerate(self.updates[:v], start=1):
            d[k] = (i, p)
        return d

    def query(self, v: int, k1, k2) -> list[tuple[int, int, bytes]]:
        self._check(v)
        d = {}
        for i, (k, p) in enumerate(self.updates[:v], start=1):
            if k1 <= k <= k2:
                d[k] = (i, p)
        return [(k, ver, p) for k, (ver, p) in sorted(d.items()) if p is not None]

    def point(self, v: int, k):
        hit = self.query(v, k, k)
        return hit[0] if hit else None

    def nv(self, v: int) -> int:
        return sum(1 for _, p in self.replay(v).values() if p is not None)

    def live_keys(self, v: int) -> list[int]:
        return sorted(k for k, (_, p) in self.replay(v).items() if p is not None)

    def save(self, path: str | Path) -> None:
        lines = []
        for k, p in self.updates:
            lines.append(f"del {k} -" if p is None else f"put {k} {p.hex()}")
        Path(path).write_text("".join(line + "\n" for line in lines))

    @classmethod
    def load(cls, path: str | Path) -> "OracleLog":
        log = cls()
        for n, line in enumerate(Path(path).read_text().splitlines(), start=1):
            if not line.strip() or line.startswith("#"):
                continue
            op, key, payload = line.split()
            if op == "put":
                log.append(int(key), bytes.fromhex(payload))
            elif op == "del":
                log.append(int(key), None)
            else:
                raise ValueError(f"line {n}: unknown op {op!r}")
        return log


def oracle_live_check(array: VersionedArray, w: int) -> int:
    """Array-local live count at ``w`` by quadratic scan."""
    count = 0
    for e in array.elems:
        if e.version > w:
            continue
        if any(f.key == e.key and e.version < f.version <= w for f in array.elems):
            continue
        count += 1
    return count
