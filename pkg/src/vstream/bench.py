"""Workload generation, metric reports and the differential verifier.

Everything here is deterministic given a :class:`WorkloadSpec` and an
:class:`EngineConfig`: no wall-clock values end up in reports.
"""

from __future__ import annotations

import csv
import io
import json
import struct
from dataclasses import asdict, dataclass, field, replace
from math import log2
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

from .engine import Engine, EngineConfig, InvariantViolation, check_all
from .oracle import OracleLog
from .query import range_query

DISTRIBUTIONS = ("uniform", "zipf", "sequential")
UPDATE_PHASES = ("update", "merge", "subdivide")


@dataclass(frozen=True)
class WorkloadSpec:
    n_updates: int
    dist: str = "uniform"
    zipf_s: float = 1.1
    keyspace: int = 0  # 0 picks max(1, n_updates // 4)
    tombstones: float = 0.1
    seed: int = 1

    def __post_init__(self) -> None:
        if self.n_updates < 0:
            raise ValueError("n_updates must be >= 0")
        if self.dist not in DISTRIBUTIONS:
            raise ValueError(f"unknown distribution {self.dist!r}; expected one of {DISTRIBUTIONS}")
        if not 0.0 <= self.tombstones <= 1.0:
            raise ValueError("tombstone fraction must be in [0, 1]")
        if self.keyspace < 0:
            raise ValueError("keyspace must be >= 0")
        if self.dist == "zipf" and self.zipf_s <= 0:
            raise ValueError("zipf exponent must be positive")

    @property
    def keys(self) -> int:
        return self.keyspace or max(1, self.n_updates // 4)

    def to_dict(self) -> dict:
        return asdict(self)


def payload_for(key: int, version: int) -> bytes:
    return struct.pack("<QQ", key & 0xFFFFFFFFFFFFFFFF, version)


def generate(spec: WorkloadSpec) -> list[tuple[int, bytes | None]]:
    """The update sequence of ``spec``; entry ``i`` becomes version ``i + 1``."""
    n = spec.n_updates
    if n == 0:
        return []
    rng = np.random.default_rng(spec.seed)
    ks = spec.keys
    if spec.dist == "uniform":
        keys = rng.integers(0, ks, size=n)
    elif spec.dist == "zipf":
        # finite-support zipf; a random permutation spreads the hot keys over the key space
        weights = 1.0 / np.arange(1, ks + 1, dtype=float) ** spec.zipf_s
        ranks = rng.choice(ks, size=n, p=weights / weights.sum())
        keys = rng.permutation(ks)[ranks]
    else:
        keys = np.arange(n) % ks
    dead = rng.random(n) < spec.tombstones
    return [(int(k), None if d else payload_for(int(k), i + 1))
            for i, (k, d) in enumerate(zip(keys.tolist(), dead.tolist()))]


def checkpoints(n: int) -> list[int]:
    """Powers of two up to ``n``, plus ``n`` itself."""
    out = []
    c = 1
    while c <= n:
        out.append(c)
        c <<= 1
    if n and out[-1] != n:
        out.append(n)
    return out


def disjoint_ranges(live_keys: list[int], count: int, target_z: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """``count`` key-disjoint ranges each covering ``z`` consecutive live keys.

    ``z`` is ``target_z`` when there are enough live keys, otherwise the
    largest value that still fits ``count`` disjoint ranges.
    """
    if not live_keys:
        return []
    z = max(1, min(target_z, len(live_keys) // count))
    slots = len(live_keys) // z
    picks = sorted(rng.choice(slots, size=min(count, slots), replace=False).tolist())
    return [(live_keys[i * z], live_keys[i * z + z - 1]) for i in picks]


@dataclass
class QueryBatch:
    n: int = 0
    z_mean: float = 0.0
    blocks_mean: float = 0.0
    aux_blocks_mean: float = 0.0
    levels_mean: float = 0.0
    scan_bound_ok: bool = True


@dataclass
class CheckpointRow:
    n: int
    n_v: int
    stored: int
    space_ratio: float
    update_blocks: int
    update_blocks_per_op: float
    update_blocks_no_aux: int
    levels: int
    promotions: int
    subdivisions: int
    oversized_dense: int
    query: QueryBatch = field(default_factory=QueryBatch)

    def flat(self) -> dict:
        d = asdict(self)
        q = d.pop("query")
        d.update({f"query_{k}": v for k, v in q.items()})
        return d


@dataclass
class MetricsReport:
    spec: WorkloadSpec
    config: EngineConfig
    rows: list[CheckpointRow] = field(default_factory=list)
    counters: dict = field(default_factory=dict)
    violations: int = 0

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "config": self.config.to_dict(),
            "rows": [r.flat() for r in self.rows],
            "counters": dict(sorted(self.counters.items())),
            "violations": self.violations,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        flat = [r.flat() for r in self.rows]
        names = list(flat[0]) if flat else list(CheckpointRow.__dataclass_fields__)
        w = csv.DictWriter(buf, fieldnames=names, lineterminator="\n")
        w.writeheader()
        w.writerows(flat)
        return buf.getvalue()

    def write(self, csv_path: str | Path | None = None, json_path: str | Path | None = None) -> None:
        if csv_path:
            Path(csv_path).write_text(self.to_csv())
        if json_path:
            Path(json_path).write_text(self.to_json())


def query_batch(eng: Engine, ranges: list[tuple[int, int]], v: int) -> QueryBatch:
    """Run ``ranges`` at version ``v``, each from a cold cache."""
    dev = eng.device
    if not ranges:
        return QueryBatch()
    zs, blocks, aux, levels = [], [], [], []
    examined: dict[int, int] = {}
    sizes: dict[int, int] = {}
    for k1, k2 in ranges:
        dev.drop_cache()
        before = dev.snapshot_report()
        res = range_query(eng, v, k1, k2)
        after = dev.snapshot_report()
        zs.append(res.z)
        blocks.append(res.blocks)
        aux.append(after.phase_total("aux") - before.phase_total("aux"))
        levels.append(len(res.scans))
        for s in res.scans:
            examined[s.array_id] = examined.get(s.array_id, 0) + s.examined
            sizes[s.array_id] = s.size
    ok = all(examined[a] <= sizes[a] for a in examined)
    n = len(ranges)
    return QueryBatch(n, sum(zs) / n, sum(blocks) / n, sum(aux) / n, sum(levels) / n, ok)


def run(spec: WorkloadSpec, config: EngineConfig | None = None, *, points: list[int] | None = None,
        query_count: int = 64, query_z: int = 128, progress: Callable[[CheckpointRow], None] | None = None,
        engine_out: list | None = None) -> MetricsReport:
    """Apply the workload and record a row at every checkpoint.

    Dirty blocks are flushed at each checkpoint before counters are read, so
    the update columns include write-back. Queries at a checkpoint run at the
    latest version against a cold cache; their IO is excluded from the
    update columns.
    """
    config = config or EngineConfig()
    updates = generate(spec)
    eng = Engine(config)
    dev = eng.device
    marks = set(points if points is not None else checkpoints(len(updates)))
    rng = np.random.default_rng([spec.seed, 0x51])
    report = MetricsReport(spec, config)
    live: dict[int, bool] = {}
    upd_total = 0
    upd_no_aux = 0
    for i, (key, payload) in enumerate(updates, start=1):
        eng.update(key, payload)
        live[key] = payload is not None
        if i not in marks:
            continue
        with dev.phase("update"):
            dev.flush()
        r = dev.snapshot_report()
        upd_total += r.total
        upd_no_aux += r.phase_total(*UPDATE_PHASES)
        keys = sorted(k for k, alive in live.items() if alive)
        batch = query_batch(eng, disjoint_ranges(keys, query_count, query_z, rng), i) if query_count else QueryBatch()
        dev.reset_counters()
        stored = eng.space()
        row = CheckpointRow(
            n=i, n_v=len(keys), stored=stored, space_ratio=stored / i,
            update_blocks=upd_total, update_blocks_per_op=upd_total / i, update_blocks_no_aux=upd_no_aux,
            levels=len(eng.levels), promotions=eng.counters["promotions"],
            subdivisions=eng.counters["subdivisions"], oversized_dense=eng.counters["oversized_dense"],
            query=batch)
        report.rows.append(row)
        if progress:
            progress(row)
    report.counters = dict(eng.counters)
    report.violations = len(eng.violations)
    if engine_out is not None:
        engine_out.append(eng)
    return report


@dataclass
class VerifyResult:
    ok: bool
    updates: int = 0
    queries: int = 0
    mismatches: int = 0
    events: dict = field(default_factory=dict)
    problems: list[str] = field(default_factory=list)

    def summary(self) -> str:
        head = "PASS" if self.ok else "FAIL"
        ev = ", ".join(f"{k}={v}" for k, v in sorted(self.events.items()))
        lines = [f"{head}: {self.updates} updates, {self.queries} queries, {self.mismatches} mismatches; {ev}"]
        lines += [f"  {p}" for p in self.problems[:20]]
        if len(self.problems) > 20:
            lines.append(f"  ... {len(self.problems) - 20} more")
        return "\n".join(lines)


def _snapshots(updates: list[tuple[int, bytes | None]]) -> Iterator[tuple[int, dict]]:
    state: dict[int, tuple[int, bytes | None]] = {}
    yield 0, state
    for v, (k, p) in enumerate(updates, start=1):
        state[k] = (v, p)
        yield v, state


def verify(spec: WorkloadSpec, config: EngineConfig | None = None, *, ranges_per_version: int = 4,
           max_problems: int = 50) -> VerifyResult:
    """Exhaustive self-check of one workload.

    Invariant checks run after every update (every promotion and subdivision
    event is checked as it happens). Afterwards the structure is swept
    again, the highest-level table is compared with a brute-force
    recomputation, and every version gets ``ranges_per_version`` random range
    queries compared against log replay.
    """
    config = replace(config or EngineConfig(), invariant_checks=True)
    updates = generate(spec)
    eng = Engine(config)
    res = VerifyResult(ok=True)
    log = OracleLog()
    for key, payload in updates:
        log.append(key, payload)
        try:
            eng.update(key, payload)
        except InvariantViolation as exc:
            res.problems.append(f"invariant violation at version {eng.version}: {exc}")
            res.problems.extend(_dump_offenders(eng, str(exc)))
            break
        res.updates += 1
    res.problems.extend(check_all(eng))
    res.problems.extend(check_conservation(eng, log))

    for v in range(eng.version + 1):
        brute = max((r.level for r in eng.live_records() if r.lo <= v), default=-1)
        got = eng.highest_level(v, charge=False)
        if got != brute:
            res.problems.append(f"highest_level({v}) = {got}, brute force says {brute}")

    rng = np.random.default_rng([spec.seed, 0x7E])
    ks = spec.keys
    for v, state in _snapshots(log.updates[:eng.version]):
        for _ in range(ranges_per_version):
            a, b = sorted(rng.integers(0, ks, size=2).tolist())
            want = [(k, ver, p) for k, (ver, p) in sorted(state.items()) if a <= k <= b and p is not None]
            got = eng.range_query(v, a, b).entries
            res.queries += 1
            if got != want:
                res.mismatches += 1
                if len(res.problems) < max_problems:
                    res.problems.append(f"v={v} [{a},{b}]: {len(got)} entries, expected {len(want)}"
                                        f"; first difference {_first_diff(got, want)}")
    res.events = {k: eng.counters[k] for k in ("promotions", "promotion_checks", "subdivisions",
                                                  "subdivision_checks", "oversized_dense")}
    res.events["multi_lead"] = sum(1 for n in lead_multiplicity(eng).values() if n > 1)
    res.ok = not res.problems and res.mismatches == 0
    return res


def lead_multiplicity(eng: Engine) -> dict[tuple[int, int], int]:
    """How many live arrays hold each element inside their own version interval."""
    seen: dict[tuple[int, int], int] = {}
    for rec in eng.live_records():
        for e in rec.array.elems:
            if rec.lo <= e.version <= rec.hi:
                seen[(e.key, e.version)] = seen.get((e.key, e.version), 0) + 1
    return seen


def check_conservation(eng: Engine, log: OracleLog, *, exact: bool = False) -> list[str]:
    """Every written (key, version) must be lead in some live array.

    With ``exact`` it must be lead in exactly one. Merged intervals span
    version gaps, so a copy carried upwards can fall inside another array's
    interval; the exact form does not hold in general.
    """
    seen = lead_multiplicity(eng)
    want = {(k, v) for v, (k, _) in enumerate(log.updates[:eng.version], start=1)}
    out = []
    if exact:
        out += [f"({k}, {v}) is lead in {n} arrays" for (k, v), n in sorted(seen.items()) if n != 1]
    missing = sorted(want - seen.keys())
    if missing:
        out.append(f"{len(missing)} written elements are lead nowhere, first {missing[0]}")
    extra = sorted(seen.keys() - want)
    if extra:
        out.append(f"{len(extra)} lead elements were never written, first {extra[0]}")
    return out


def _first_diff(got: list, want: list):
    for g, w in zip(got, want):
        if g != w:
            return {"got": g, "expected": w}
    return {"got": got[len(want):][:1], "expected": want[len(got):][:1]}


def _dump_offenders(eng: Engine, message: str) -> list[str]:
    out = []
    for rec in eng.live_records():
        if f"record {rec.id} " in message:
            out.append(f"record {rec.id} level {rec.level} [{rec.lo},{rec.hi}]: {list(rec.array.elems)[:32]}")
    return out


def dump(eng: Engine) -> str:
    """Human-readable level listing."""
    lines = [f"version {eng.version}, {len(eng.levels)} levels, {eng.space()} stored elements, "
             f"mode {eng.config.query_mode.value}"]
    for lvl in eng.levels:
        recs = list(lvl.routes)
        lines.append(f"level {lvl.number} (size bound {2 << lvl.number}): {len(lvl.live)} live arrays")
        for rec in recs:
            if rec.is_dummy:
                lines.append(f"  [{rec.lo:>8}, {rec.hi:>8}]  dummy   succ={rec.succ}")
                continue
            arr = rec.array
            dens = arr.density()
            succ = f"  succ={rec.succ}" if eng.succ_mode else ""
            lines.append(f"  [{rec.lo:>8}, {rec.hi:>8}]  id={rec.id} n={len(arr)} min_live={arr.min_live()}"
                         f" density={float(dens):.3f}{succ}")
    return "\n".join(lines)


def fit_constants(xs: list[float], ys: list[float]) -> list[float]:
    """Per-point constants ``y / x`` for a one-parameter fit ``y = c * x``."""
    return [y / x for x, y in zip(xs, ys)]


def update_model(n: int, block_size: int) -> float:
    return log2(n) / block_size


def query_model(n_v: int, z: float, block_size: int) -> float:
    return log2(max(n_v, 2)) ** 2 + z / block_size
