"""Command-line entry point: ``vstream {run,verify,query,dump}``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from . import bench
from .engine import Engine, EngineConfig, InvariantViolation, QueryMode


def _spec(ns: argparse.Namespace) -> bench.WorkloadSpec:
    return bench.WorkloadSpec(ns.n, ns.dist, ns.zipf_s, ns.keyspace, ns.tombstones, ns.seed)


def _config(ns: argparse.Namespace) -> EngineConfig:
    cfg = EngineConfig.from_file(ns.config) if ns.config else EngineConfig()
    over = {}
    if ns.mode:
        over["query_mode"] = QueryMode(ns.mode)
    if ns.block_size:
        over["block_size"] = ns.block_size
    if ns.cache_blocks:
        over["cache_blocks"] = ns.cache_blocks
    if getattr(ns, "checks", False):
        over["invariant_checks"] = True
    if getattr(ns, "fault", None):
        over["fault"] = ns.fault
    return replace(cfg, **over) if over else cfg


def _add_workload_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("workload")
    g.add_argument("-n", type=int, default=4096, help="number of updates (default 4096)")
    g.add_argument("--dist", choices=bench.DISTRIBUTIONS, default="uniform")
    g.add_argument("--zipf-s", type=float, default=1.1, help="zipf exponent")
    g.add_argument("--keyspace", type=int, default=0, help="number of distinct keys (0: n/4)")
    g.add_argument("--tombstones", type=float, default=0.1, help="fraction of updates that delete")
    g.add_argument("--seed", type=int, default=1)
    c = p.add_argument_group("engine")
    c.add_argument("--config", help="key=value config file")
    c.add_argument("--mode", choices=[m.value for m in QueryMode])
    c.add_argument("--block-size", type=int)
    c.add_argument("--cache-blocks", type=int)


def cmd_run(ns: argparse.Namespace) -> int:
    spec, cfg = _spec(ns), _config(ns)
    keep: list[Engine] = []

    def show(row: bench.CheckpointRow) -> None:
        if not ns.quiet:
            print(f"N={row.n:>8} N_v={row.n_v:>8} space={row.space_ratio:6.3f} "
                  f"upd/op={row.update_blocks_per_op:8.3f} q_blocks={row.query.blocks_mean:7.2f} "
                  f"Z={row.query.z_mean:6.1f} levels={row.levels}", file=sys.stderr)

    try:
        report = bench.run(spec, cfg, query_count=ns.queries, query_z=ns.z, progress=show, engine_out=keep)
    except InvariantViolation as exc:
        print(f"invariant violation:\n{exc}", file=sys.stderr)
        return 1
    report.write(ns.csv, ns.json)
    if ns.save:
        keep[0].save(ns.save)
    if not (ns.csv or ns.json):
        sys.stdout.write(report.to_csv())
    return 0 if report.violations == 0 else 1


def cmd_verify(ns: argparse.Namespace) -> int:
    res = bench.verify(_spec(ns), _config(ns), ranges_per_version=ns.ranges)
    print(res.summary())
    return 0 if res.ok else 1


def cmd_query(ns: argparse.Namespace) -> int:
    eng = Engine.load(ns.snapshot)
    v = eng.version if ns.version is None else ns.version
    try:
        res = eng.range_query(v, ns.k1, ns.k2)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = res.to_dict() if ns.stats else {"entries": res.to_dict()["entries"]}
    print(json.dumps(out, indent=None if ns.compact else 2))
    return 0


def cmd_dump(ns: argparse.Namespace) -> int:
    if ns.snapshot:
        eng = Engine.load(ns.snapshot)
    else:
        eng = Engine(_config(ns))
        for key, payload in bench.generate(_spec(ns)):
            eng.update(key, payload)
    print(bench.dump(eng))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vstream", description="Versioned streaming index harness.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="apply a workload and report metrics at power-of-two checkpoints")
    _add_workload_args(p)
    p.add_argument("--checks", action="store_true", help="check invariants after every update")
    p.add_argument("--queries", type=int, default=64, help="query ranges per checkpoint")
    p.add_argument("--z", type=int, default=128, help="target output size per query range")
    p.add_argument("--csv", help="write checkpoint rows as CSV")
    p.add_argument("--json", help="write the full report as JSON")
    p.add_argument("--save", help="write a snapshot of the final structure")
    p.add_argument("-q", "--quiet", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="invariant sweep plus oracle differential test")
    _add_workload_args(p)
    p.add_argument("--ranges", type=int, default=4, help="random ranges per version")
    p.add_argument("--fault", choices=["skip_merge_dedup"], help="inject a known bug (self-test)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("query", help="range query against a saved snapshot")
    p.add_argument("snapshot")
    p.add_argument("k1", type=int)
    p.add_argument("k2", type=int)
    p.add_argument("-v", "--version", type=int, help="version to read (default: latest)")
    p.add_argument("--stats", action="store_true", help="include per-level IO statistics")
    p.add_argument("--compact", action="store_true")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("dump", help="print the level structure")
    _add_workload_args(p)
    p.add_argument("--snapshot", help="dump a saved snapshot instead of running a workload")
    p.set_defaults(func=cmd_dump)
    return ap


def main(argv: list[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        return ns.func(ns)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
