"""Per-stage timings and counted work of one worker as N_m, N_d or N_t grows.

Mirrors the single-GPU scaling sweeps at desk scale: one dimension is
doubled while the others stay fixed. Also times the naive block product
for the N_t sweep so the FFT speedup can be read off directly.

    python scripts/single_worker_scaling.py --sweep n_t --out nt.csv
"""
import argparse
import csv
import sys
import time

import numpy as np

from fastp2o import bench
from fastp2o.block_operator import CompactP2O, SpaceTimeVector, naive_apply_forward
from fastp2o.counters import OpCounter
from fastp2o.planner import GridShape

SWEEPS = {
    "n_m": lambda k: (64 * 2**k, 8, 128),
    "n_d": lambda k: (512, 2 * 2**k, 128),
    "n_t": lambda k: (64, 8, 16 * 2**k),
}


def naive_seconds(n_m, n_d, n_t, seed):
    rng = np.random.default_rng(seed)
    compact = CompactP2O(rng.uniform(-1, 1, (n_t, n_d, n_m)))
    m = SpaceTimeVector.from_tosi(rng.standard_normal((n_t, n_m)))
    counter = OpCounter()
    t0 = time.perf_counter()
    naive_apply_forward(compact, m, counter)
    return time.perf_counter() - t0, counter.total_flops


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sweep", choices=sorted(SWEEPS), default="n_t")
    ap.add_argument("--steps", type=int, default=5)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--no-naive", action="store_true")
    ap.add_argument("--out", default=None)
    args = ap.parse_args(argv)

    rows = []
    for k in range(args.steps):
        n_m, n_d, n_t = SWEEPS[args.sweep](k)
        fwd = bench.bench_case(n_m, n_d, n_t, GridShape(1, 1), args.seed, args.repeats)[0]
        if not args.no_naive and args.sweep == "n_t":
            fwd["t_naive"], fwd["naive_flops"] = naive_seconds(n_m, n_d, n_t, args.seed)
        rows.append(fwd)
        print(f"N_m={n_m} N_d={n_d} N_t={n_t}: total {fwd['t_total'] * 1e3:.2f} ms, "
              f"apply {fwd['t_apply'] / fwd['t_total']:.0%} of time", file=sys.stderr)

    fields = list(rows[0])
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
