"""FLOP, byte and wall-time accounting for the matvec pipelines.

Counts are analytic in the shapes the pipeline actually processes:

* complex FFT of length L: ``5 L log2 L`` real FLOPs (radix-2 count)
* per-frequency complex matvec ``n_d x n_m``: ``8 n_d n_m`` FLOPs and
  ``16 (n_d n_m + n_m + n_d)`` bytes
* naive real block product ``N_d x N_m``: ``2 N_d N_m`` FLOPs and
  ``8 (N_d N_m + N_m + N_d)`` bytes
"""
from __future__ import annotations

import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from fractions import Fraction

REAL_BYTES = 8
COMPLEX_BYTES = 16


@dataclass
class StageRecord:
    name: str
    flops: int = 0
    bytes: int = 0
    seconds: float = 0.0
    calls: int = 0


@dataclass
class OpCounter:
    """Accumulates per-stage counters; stages keep first-seen order."""

    stages: dict[str, StageRecord] = field(default_factory=dict)

    def add(self, name: str, flops: int = 0, nbytes: int = 0, seconds: float = 0.0) -> None:
        rec = self.stages.setdefault(name, StageRecord(name))
        rec.flops += int(flops)
        rec.bytes += int(nbytes)
        rec.seconds += seconds
        rec.calls += 1

    @contextmanager
    def stage(self, name: str, flops: int = 0, nbytes: int = 0):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.add(name, flops, nbytes, time.perf_counter() - t0)

    def merge(self, other: "OpCounter") -> None:
        for rec in other.stages.values():
            mine = self.stages.setdefault(rec.name, StageRecord(rec.name))
            mine.flops += rec.flops
            mine.bytes += rec.bytes
            mine.seconds += rec.seconds
            mine.calls += rec.calls

    @property
    def total_flops(self) -> int:
        return sum(r.flops for r in self.stages.values())

    @property
    def total_bytes(self) -> int:
        return sum(r.bytes for r in self.stages.values())

    @property
    def total_seconds(self) -> float:
        return sum(r.seconds for r in self.stages.values())

    def as_dict(self) -> dict:
        return {
            name: {"flops": r.flops, "bytes": r.bytes, "seconds": r.seconds, "calls": r.calls}
            for name, r in self.stages.items()
        }


@contextmanager
def maybe_stage(counter: OpCounter | None, name: str, flops: int = 0, nbytes: int = 0):
    if counter is None:
        yield
    else:
        with counter.stage(name, flops, nbytes):
            yield


class StageTimer:
    """Back-to-back stage timing: each :meth:`mark` charges the time since the
    previous mark, so consecutive stages leave no gaps between them."""

    def __init__(self, counter: OpCounter | None):
        self.counter = counter
        self.t = time.perf_counter() if counter is not None else 0.0

    def restart(self) -> None:
        if self.counter is not None:
            self.t = time.perf_counter()

    def mark(self, name: str, flops: int = 0, nbytes: int = 0) -> None:
        if self.counter is None:
            return
        now = time.perf_counter()
        self.counter.add(name, flops, nbytes, now - self.t)
        self.t = now


def fft_flops(length: int, batch: int = 1) -> int:
    if length <= 1:
        return 0
    return int(round(5 * length * math.log2(length))) * batch


def apply_flops(n_d: int, n_m: int, n_freq: int = 1) -> int:
    return 8 * n_d * n_m * n_freq


def apply_bytes(n_d: int, n_m: int, n_freq: int = 1) -> int:
    return COMPLEX_BYTES * (n_d * n_m + n_m + n_d) * n_freq


def arithmetic_intensity(n_d: int, n_m: int) -> Fraction:
    """FLOPs per byte of the per-frequency apply, as an exact fraction."""
    return Fraction(apply_flops(n_d, n_m), apply_bytes(n_d, n_m))


def naive_flops(n_d: int, n_m: int, n_t: int) -> int:
    return 2 * n_d * n_m * (n_t * (n_t + 1) // 2)


def naive_bytes(n_d: int, n_m: int, n_t: int) -> int:
    return REAL_BYTES * (n_d * n_m + n_m + n_d) * (n_t * (n_t + 1) // 2)
