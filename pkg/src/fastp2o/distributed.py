"""Simulated r x c worker grid for distributed F and F* matvecs.

Worker ``(i, j)`` owns the operator shard for sensors in row block ``i``
and sources in column block ``j``. Parameters start on processor row 0
and data on processor column 0. Messages are passed by value; reductions
follow a fixed binary tree so results do not depend on scheduling.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .block_operator import (
    CompactP2O,
    Ordering,
    SpaceTimeVector,
    SpectralP2O,
    adjoint_array,
    forward_array,
    setup,
)
from .counters import REAL_BYTES, OpCounter, StageTimer
from .errors import DimensionError, EmptyShardError, OrderingError
from .planner import CostParams, GridShape


def split_ranges(n: int, parts: int) -> list[tuple[int, int]]:
    """Contiguous index ranges for ``parts`` workers over ``n`` items.

    Uses blocks of ``ceil(n / parts)``; if that would leave a trailing
    worker empty (e.g. 5 items on 4 workers) the split is balanced instead
    so every worker owns at least one item.
    """
    if parts > n:
        raise EmptyShardError(f"{parts} workers for {n} items would leave a worker empty")
    size = -(-n // parts)
    if size * (parts - 1) < n:
        return [(k * size, min((k + 1) * size, n)) for k in range(parts)]
    base, extra = divmod(n, parts)
    bounds, start = [], 0
    for k in range(parts):
        stop = start + base + (1 if k < extra else 0)
        bounds.append((start, stop))
        start = stop
    return bounds


@dataclass
class Worker:
    """One logical processor. Only the engine's channels touch ``inbox``."""

    i: int
    j: int
    shard: SpectralP2O
    inbox: list = field(default_factory=list)
    received: int = 0
    sent: int = 0
    counter: OpCounter = field(default_factory=OpCounter)

    def deliver(self, payload: np.ndarray) -> None:
        self.inbox.append(np.array(payload, copy=True))
        self.received += 1

    def take(self) -> np.ndarray:
        return self.inbox.pop(0)

    def local_forward(self) -> np.ndarray:
        return forward_array(self.shard, self.take(), self.counter)

    def local_adjoint(self) -> np.ndarray:
        return adjoint_array(self.shard, self.take(), self.counter)


@dataclass
class Partition:
    grid: GridShape
    n_d: int
    n_m: int
    n_t: int
    row_ranges: list[tuple[int, int]]
    col_ranges: list[tuple[int, int]]
    workers: dict[tuple[int, int], Worker]

    def shard(self, i: int, j: int) -> SpectralP2O:
        return self.workers[(i, j)].shard

    def reset_counters(self) -> None:
        for w in self.workers.values():
            w.inbox.clear()
            w.received = w.sent = 0
            w.counter = OpCounter()


def partition_operator(op: CompactP2O | SpectralP2O, grid: GridShape) -> Partition:
    """Split the operator along sensors (rows) and sources (columns).

    A compact operator is sharded first and each shard runs its own setup;
    an already transformed operator is sliced directly, which gives the
    same blocks since every (sensor, source) spectrum is independent.
    """
    rows = split_ranges(op.n_d, grid.r)
    cols = split_ranges(op.n_m, grid.c)
    workers = {}
    for i, (r0, r1) in enumerate(rows):
        for j, (c0, c1) in enumerate(cols):
            if isinstance(op, CompactP2O):
                shard = setup(op.shard(slice(r0, r1), slice(c0, c1)))
            else:
                shard = SpectralP2O.from_freq_blocks(op.freq_blocks[:, r0:r1, c0:c1].copy())
            workers[(i, j)] = Worker(i, j, shard)
    return Partition(grid, op.n_d, op.n_m, op.n_t, rows, cols, workers)


def _scatter(v: SpaceTimeVector, ranges, expected_dim: int, n_t: int) -> list[np.ndarray]:
    if v.ordering is not Ordering.SOTI:
        raise OrderingError("scatter expects a SOTI vector")
    if v.spatial_dim != expected_dim or v.n_t != n_t:
        raise DimensionError("vector does not match the partitioned operator")
    arr = v.as_array()
    return [arr[a:b].copy() for a, b in ranges]


def scatter_param(m: SpaceTimeVector, partition: Partition) -> list[np.ndarray]:
    """Source slices for workers ``(0, j)``."""
    return _scatter(m, partition.col_ranges, partition.n_m, partition.n_t)


def scatter_data(d: SpaceTimeVector, partition: Partition) -> list[np.ndarray]:
    """Sensor slices for workers ``(i, 0)``."""
    return _scatter(d, partition.row_ranges, partition.n_d, partition.n_t)


def gather(slices: list[np.ndarray]) -> SpaceTimeVector:
    return SpaceTimeVector.from_soti(np.concatenate(slices, axis=0))


@dataclass
class PhaseRecord:
    name: str
    mode: str
    groups: int
    participants: int
    messages: int
    bytes: int
    rounds: int
    link_bytes: list[int]

    def modeled_seconds(self, params: CostParams) -> float:
        if self.rounds == 0:
            return 0.0
        worst = max(self.link_bytes)
        return self.rounds * (params.latency + worst / params.bandwidth)


@dataclass
class CommLog:
    phases: list[PhaseRecord] = field(default_factory=list)

    @property
    def total_bytes(self) -> int:
        return sum(p.bytes for p in self.phases)

    @property
    def total_messages(self) -> int:
        return sum(p.messages for p in self.phases)

    def as_dict(self) -> dict:
        return {"phases": [p.__dict__.copy() for p in self.phases],
                "total_bytes": self.total_bytes, "total_messages": self.total_messages}


def comm_report(log: CommLog, params: CostParams) -> dict:
    """Per-phase measured bytes/messages and modeled seconds."""
    out = {}
    for ph in log.phases:
        out[ph.name] = {
            "messages": ph.messages,
            "bytes": ph.bytes,
            "rounds": ph.rounds,
            "bytes_per_link": sorted(set(ph.link_bytes)),
            "modeled_seconds": ph.modeled_seconds(params),
        }
    out["total"] = {
        "messages": log.total_messages,
        "bytes": log.total_bytes,
        "modeled_seconds": sum(ph.modeled_seconds(params) for ph in log.phases),
    }
    return out


def _tree_depth(n: int) -> int:
    return math.ceil(math.log2(n)) if n > 1 else 0


def _broadcast(group: list[Worker], payload: np.ndarray) -> tuple[int, int]:
    """Binomial-tree broadcast from ``group[0]``; returns (messages, bytes)."""
    group[0].deliver(payload)
    group[0].received -= 1  # the root already holds its slice
    have = 1
    messages = 0
    while have < len(group):
        for src in range(have):
            dst = src + have
            if dst < len(group):
                group[dst].deliver(group[src].inbox[-1])
                group[src].sent += 1
                messages += 1
        have *= 2
    return messages, messages * payload.size * REAL_BYTES


def _reduce(partials: list[np.ndarray], group: list[Worker]) -> tuple[np.ndarray, int, int]:
    """Fixed binary-tree sum onto ``group[0]``; returns (sum, messages, bytes)."""
    acc = [p for p in partials]
    messages = nbytes = 0
    stride = 1
    while stride < len(acc):
        for dst in range(0, len(acc), 2 * stride):
            src = dst + stride
            if src < len(acc):
                group[src].sent += 1
                group[dst].received += 1
                acc[dst] = acc[dst] + acc[src]
                messages += 1
                nbytes += acc[src].size * REAL_BYTES
        stride *= 2
    return acc[0], messages, nbytes


class _SerialExecutor:
    def map(self, fn, items):
        return [fn(x) for x in items]


@dataclass
class DistributedResult:
    vector: SpaceTimeVector
    log: CommLog
    counter: OpCounter


def _run(partition: Partition, vec: SpaceTimeVector, adjoint: bool, threads: int) -> DistributedResult:
    counter = OpCounter()
    timer = StageTimer(counter)
    grid = partition.grid
    partition.reset_counters()
    log = CommLog()
    slices = scatter_data(vec, partition) if adjoint else scatter_param(vec, partition)
    # broadcast: F sends source slices down columns, F* sends sensor slices along rows
    if adjoint:
        groups = [[partition.workers[(i, j)] for j in range(grid.c)] for i in range(grid.r)]
    else:
        groups = [[partition.workers[(i, j)] for i in range(grid.r)] for j in range(grid.c)]
    msgs = nbytes = 0
    link = []
    for group, payload in zip(groups, slices):
        m, b = _broadcast(group, payload)
        msgs += m
        nbytes += b
        if m:
            link.append(payload.size * REAL_BYTES)
    size = len(groups[0])
    log.phases.append(PhaseRecord("broadcast", "tree", len(groups), size, msgs, nbytes,
                                  _tree_depth(size), link or [0]))
    timer.mark("broadcast")

    order = sorted(partition.workers)
    workers = [partition.workers[key] for key in order]
    step = Worker.local_adjoint if adjoint else Worker.local_forward
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = dict(zip(order, pool.map(step, workers)))
    else:
        partials = dict(zip(order, _SerialExecutor().map(step, workers)))
    local = OpCounter()
    for w in workers:
        local.merge(w.counter)
    # executor and message-handling time outside the worker pipelines
    timer.mark("dispatch")
    counter.stages["dispatch"].seconds = max(0.0, counter.stages["dispatch"].seconds - local.total_seconds)
    counter.merge(local)
    # reduce: F sums across each processor row onto column 0, F* down each column onto row 0
    if adjoint:
        rgroups = [[(i, j) for i in range(grid.r)] for j in range(grid.c)]
    else:
        rgroups = [[(i, j) for j in range(grid.c)] for i in range(grid.r)]
    out, msgs, nbytes, link = [], 0, 0, []
    for keys in rgroups:
        total, m, b = _reduce([partials[k] for k in keys], [partition.workers[k] for k in keys])
        out.append(total)
        msgs += m
        nbytes += b
        if m:
            link.append(total.size * REAL_BYTES)
    size = len(rgroups[0])
    log.phases.append(PhaseRecord("reduce", "tree", len(rgroups), size, msgs, nbytes,
                                  _tree_depth(size), link or [0]))
    result = gather(out)
    timer.mark("reduce")
    return DistributedResult(result, log, counter)


def distributed_forward(partition: Partition, m: SpaceTimeVector, threads: int = 1) -> DistributedResult:
    """``F m`` on the grid; the result is the gathered column-0 data."""
    return _run(partition, m, adjoint=False, threads=threads)


def distributed_adjoint(partition: Partition, d: SpaceTimeVector, threads: int = 1) -> DistributedResult:
    """``F* d`` on the grid; the result is the gathered row-0 parameters."""
    return _run(partition, d, adjoint=True, threads=threads)
