#!/usr/bin/env python3
"""Differential and invariant sweep over seeds, distributions and both query modes.

    python scripts/verify_sweep.py -n 4096 --seeds 1-20
"""

import argparse
import sys

from vstream import EngineConfig, QueryMode
from vstream.bench import WorkloadSpec, verify


def seed_range(text: str) -> range:
    a, _, b = text.partition("-")
    return range(int(a), int(b or a) + 1)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("-n", type=int, default=4096)
    ap.add_argument("--seeds", type=seed_range, default=seed_range("1-5"))
    ap.add_argument("--dists", default="uniform,zipf")
    ap.add_argument("--ranges", type=int, default=2, help="random ranges per version")
    args = ap.parse_args()

    failed = 0
    for dist in args.dists.split(","):
        for seed in args.seeds:
            for mode in QueryMode:
                res = verify(WorkloadSpec(args.n, dist, seed=seed), EngineConfig(query_mode=mode),
                             ranges_per_version=args.ranges)
                failed += not res.ok
                print(f"{dist:>8} seed={seed:<3} {mode.value:>4}  {res.summary()}", flush=True)
    print(f"{failed} failing runs")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
