"""Per-stage timing and operation-count sweeps.

Rows carry one column per pipeline stage (seconds) plus counted FLOPs and
bytes. Timed stages are recorded back to back, so their sum accounts for
the whole matvec apart from Python call overhead.
"""
from __future__ import annotations

import csv
import itertools
import time

import numpy as np

from . import block_operator as bo
from .distributed import distributed_adjoint, distributed_forward, partition_operator
from .planner import GridShape

STAGES = ["broadcast", "dispatch", "pad", "fft", "soti_to_tosi", "apply", "tosi_to_soti", "ifft", "unpad", "reduce"]
COLUMNS = (["n_m", "n_d", "n_t", "grid", "direction"]
           + [f"t_{s}" for s in STAGES]
           + ["t_stages", "t_total", "flops", "bytes", "apply_flops", "apply_bytes"])


def bench_case(n_m: int, n_d: int, n_t: int, grid: GridShape, seed: int = 0, repeats: int = 1) -> list[dict]:
    rng = np.random.default_rng([seed, n_m, n_d, n_t])
    compact = bo.CompactP2O(rng.uniform(-1, 1, (n_t, n_d, n_m)))
    part = partition_operator(compact, grid)
    m = bo.SpaceTimeVector.from_soti(rng.standard_normal((n_m, n_t)))
    d = bo.SpaceTimeVector.from_soti(rng.standard_normal((n_d, n_t)))
    rows = []
    for direction, fn, vec in (("F", distributed_forward, m), ("F*", distributed_adjoint, d)):
        best = None
        for _ in range(repeats):
            t0 = time.perf_counter()
            res = fn(part, vec)
            total = time.perf_counter() - t0
            if best is None or total < best[0]:
                best = (total, res)
        total, res = best
        stages = res.counter.stages
        row = {"n_m": n_m, "n_d": n_d, "n_t": n_t, "grid": str(grid), "direction": direction}
        for s in STAGES:
            row[f"t_{s}"] = stages[s].seconds if s in stages else 0.0
        row["t_stages"] = res.counter.total_seconds
        row["t_total"] = total
        row["flops"] = res.counter.total_flops
        row["bytes"] = res.counter.total_bytes
        row["apply_flops"] = stages["apply"].flops
        row["apply_bytes"] = stages["apply"].bytes
        rows.append(row)
    return rows


def sweep(n_ms, n_ds, n_ts, grids, seed: int = 0, repeats: int = 1) -> list[dict]:
    rows = []
    for n_m, n_d, n_t, grid in itertools.product(n_ms, n_ds, n_ts, grids):
        if grid.r > n_d or grid.c > n_m:
            continue
        rows += bench_case(n_m, n_d, n_t, grid, seed, repeats)
    return rows


def write_csv(rows: list[dict], fh) -> None:
    writer = csv.DictWriter(fh, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
