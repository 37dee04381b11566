#!/usr/bin/env python3
"""Scaling experiment: space, update cost and query cost at power-of-two sizes.

Writes one CSV per mode and prints the per-size constants of the fits
``blocks/N ~ c * log2(N) / B`` and ``query blocks ~ c * (log2(N_v)^2 + Z/B)``.

    python scripts/scaling.py --max-exp 16 --cache-blocks 4 --out out/
"""

import argparse
from pathlib import Path

from vstream import EngineConfig, QueryMode
from vstream.bench import WorkloadSpec, query_model, run, update_model


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--min-exp", type=int, default=10)
    ap.add_argument("--max-exp", type=int, default=16)
    ap.add_argument("--dist", default="uniform")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--block-size", type=int, default=64)
    ap.add_argument("--cache-blocks", type=int, default=256)
    ap.add_argument("--queries", type=int, default=64)
    ap.add_argument("--z", type=int, default=128)
    ap.add_argument("--out", type=Path, default=Path("scaling-out"))
    args = ap.parse_args()

    sizes = [1 << e for e in range(args.min_exp, args.max_exp + 1)]
    args.out.mkdir(parents=True, exist_ok=True)
    for mode in QueryMode:
        spec = WorkloadSpec(sizes[-1], args.dist, keyspace=sizes[-1], seed=args.seed)
        cfg = EngineConfig(block_size=args.block_size, cache_blocks=args.cache_blocks, query_mode=mode)
        rep = run(spec, cfg, points=sizes, query_count=args.queries, query_z=args.z)
        path = args.out / f"scaling-{mode.value}-{args.dist}-B{args.block_size}-M{args.cache_blocks}.csv"
        rep.write(csv_path=path)
        print(f"mode={mode.value}  ({path})")
        print(f"{'N':>8} {'space':>7} {'c_upd':>7} {'c_upd_no_aux':>13} {'Z':>6} {'q_blocks':>9} {'c_query':>8}")
        for r in rep.rows:
            m = update_model(r.n, args.block_size)
            cq = r.query.blocks_mean / query_model(r.n_v, r.query.z_mean, args.block_size) if r.query.n else 0.0
            print(f"{r.n:>8} {r.space_ratio:7.3f} {r.update_blocks / r.n / m:7.2f} "
                  f"{r.update_blocks_no_aux / r.n / m:13.2f} {r.query.z_mean:6.1f} {r.query.blocks_mean:9.2f} {cq:8.3f}")


if __name__ == "__main__":
    main()
