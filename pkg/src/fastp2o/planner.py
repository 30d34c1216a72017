"""Communication cost model and processor-grid selection.

Communication costs use the natural log of the participant count; the
per-stage compute table uses ``log2`` for FFT lengths. The log base only
rescales the grid objective, so the chosen grid does not depend on it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .counters import arithmetic_intensity

GOLDEN = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class CostParams:
    latency: float = 1e-6      # seconds per message
    bandwidth: float = 1e10    # bytes per second
    gpus_per_node: int = 1

    def __post_init__(self):
        if self.latency < 0 or self.bandwidth <= 0 or self.gpus_per_node < 1:
            raise ValueError("need latency >= 0, bandwidth > 0, gpus_per_node >= 1")


@dataclass(frozen=True)
class GridShape:
    r: int
    c: int

    def __post_init__(self):
        if self.r < 1 or self.c < 1:
            raise ValueError(f"grid dimensions must be positive, got {self.r}x{self.c}")

    @property
    def p(self) -> int:
        return self.r * self.c

    @classmethod
    def parse(cls, text: str) -> "GridShape":
        r, _, c = text.lower().partition("x")
        return cls(int(r), int(c))

    def __str__(self):
        return f"{self.r}x{self.c}"


@dataclass(frozen=True)
class ProblemDims:
    n_m: int
    n_d: int
    n_t: int

    def local(self, grid: GridShape) -> tuple[int, int]:
        """``(local n_d, local n_m)`` for the ceiling partition."""
        return -(-self.n_d // grid.r), -(-self.n_m // grid.c)

    @property
    def log_ratio(self) -> float:
        return math.log10(self.n_d / self.n_m)


def comm_cost(grid: GridShape, dims: ProblemDims, params: CostParams) -> float:
    """Modeled broadcast + reduce seconds for one F and one F* matvec."""
    lat, beta = params.latency, params.bandwidth
    return ((lat + 8 * dims.n_t * dims.n_m / (beta * grid.c)) * math.log(grid.r)
            + (lat + 8 * dims.n_t * dims.n_d / (beta * grid.r)) * math.log(grid.c))


def modified_cost(r: float, p: int, l: float) -> float:
    """Scale-free communication objective ``(r/p) log r + (10^l / r) log(p/r)``."""
    if not 1 <= r <= p:
        raise ValueError(f"r must lie in [1, {p}], got {r}")
    return r / p * math.log(r) + 10.0**l / r * math.log(p / r)


def golden_section_min(f, lo: float, hi: float, tol: float = 1e-10) -> float:
    a, b = lo, hi
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol * max(1.0, abs(a) + abs(b)):
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = f(x2)
    return (a + b) / 2


def real_optimal_rows(p: int, l: float) -> float:
    """Real-valued minimizer of :func:`modified_cost` on ``[1, p]``.

    Endpoints are compared explicitly so a boundary minimum comes back as
    exactly ``1`` or ``p``.
    """
    if p == 1:
        return 1.0
    r_star = golden_section_min(lambda r: modified_cost(r, p, l), 1.0, float(p))
    best = min((1.0, float(p), r_star), key=lambda r: modified_cost(r, p, l))
    if best not in (1.0, float(p)):
        slack = 1e-6 * p
        if best - 1.0 < slack and modified_cost(1.0, p, l) <= modified_cost(best, p, l) + 1e-15:
            return 1.0
        if p - best < slack and modified_cost(float(p), p, l) <= modified_cost(best, p, l) + 1e-15:
            return float(p)
    return best


def factor_pairs(p: int) -> list[tuple[int, int]]:
    return [(r, p // r) for r in range(1, p + 1) if p % r == 0]


def select_grid(p: int, l: float, k: int = 1) -> GridShape:
    """Pick an ``r x c`` grid with ``r c = p`` for log ratio ``l``.

    Boundary minimizers give ``1 x p`` or ``p x 1`` directly. Otherwise the
    factor pairs are ranked by: ``k | r`` first, then ``k | c``; then the
    orientation rule (``r >= c`` when ``l >= 0``, ``r <= c`` otherwise);
    then the smallest modified cost; then closeness to the real minimizer;
    then smaller ``r``.
    """
    if p < 1 or k < 1:
        raise ValueError("need p >= 1 and k >= 1")
    r_tilde = real_optimal_rows(p, l)
    if r_tilde == 1.0:
        return GridShape(1, p)
    if r_tilde == float(p):
        return GridShape(p, 1)

    def rank(pair):
        r, c = pair
        if k == 1:
            tier = 0
        elif r % k == 0:
            tier = 0
        elif c % k == 0:
            tier = 1
        else:
            tier = 2
        oriented = (r >= c) if l >= 0 else (r <= c)
        return (tier, not oriented, modified_cost(r, p, l), abs(r - r_tilde), r)

    r, c = min(factor_pairs(p), key=rank)
    return GridShape(r, c)


def brute_force_grid(p: int, l: float) -> GridShape:
    """Exhaustive minimizer of the modified cost over all factor pairs."""
    r, c = min(factor_pairs(p), key=lambda rc: (modified_cost(rc[0], p, l), rc[0]))
    return GridShape(r, c)


INDIFFERENT = "indifferent"


def weak_scaling_shape(L: float, p: int):
    """Grid for weak scaling with fixed local sizes, ``L = n_d / n_m``.

    Returns :data:`INDIFFERENT` when ``L == 1`` since every shape costs the same.
    """
    if L <= 0:
        raise ValueError("L must be positive")
    if L == 1:
        return INDIFFERENT
    return GridShape(p, 1) if L > 1 else GridShape(1, p)


def grid_curve(p: int, l: float) -> list[tuple[int, int, float]]:
    """``(r, c, modified_cost)`` for every factor pair of ``p``."""
    return [(r, c, modified_cost(r, p, l)) for r, c in factor_pairs(p)]


@dataclass(frozen=True)
class StepCost:
    """One row of the per-worker cost table.

    ``ops`` is the asymptotic operation count, ``bytes`` the ideal memory
    traffic (compute rows) or message size (communication rows), and
    ``seconds`` the latency/bandwidth model (communication rows only).
    """

    direction: str   # "setup", "F" or "F*"
    step: str
    ops: float = 0.0
    bytes: float = 0.0
    seconds: float = 0.0


def _fft_ops(channels: int, n_t: int) -> float:
    return 2 * channels * n_t * math.log2(2 * n_t)


def step_cost_table(dims: ProblemDims, grid: GridShape, params: CostParams) -> list[StepCost]:
    """Per-worker cost of every matvec step, both directions.

    Broadcasts and reductions are charged to the processor dimension they
    actually run over: in F the parameter slice goes down ``r`` rows and
    partial data is reduced over ``c`` columns; F* is the mirror image.
    """
    n_d, n_m = dims.local(grid)
    n_t = dims.n_t
    lat, beta = params.latency, params.bandwidth

    def comm(direction, step, n, parts):
        return StepCost(direction, step, bytes=8 * n_t * n,
                        seconds=(lat + 8 * n_t * n / beta) * math.log(parts))

    rows = [StepCost("setup", "fft_matrix", _fft_ops(n_d * n_m, n_t), 2 * 16 * 2 * n_t * n_d * n_m)]
    for direction, n_in, n_out, bcast_parts, reduce_parts in (
        ("F", n_m, n_d, grid.r, grid.c),
        ("F*", n_d, n_m, grid.c, grid.r),
    ):
        rows += [
            comm(direction, "broadcast", n_in, bcast_parts),
            StepCost(direction, "pad", 2 * n_in * n_t, (8 + 16 * 2) * n_t * n_in),
            StepCost(direction, "fft", _fft_ops(n_in, n_t), 2 * 16 * 2 * n_t * n_in),
            StepCost(direction, "apply", n_d * n_m * (n_t + 1), 16 * (n_d * n_m + n_d + n_m) * (n_t + 1)),
            StepCost(direction, "ifft", _fft_ops(n_out, n_t), 2 * 16 * 2 * n_t * n_out),
            StepCost(direction, "unpad", 2 * n_out * n_t, (16 * 2 + 8) * n_t * n_out),
            comm(direction, "reduce", n_out, reduce_parts),
        ]
    return rows


def naive_apply_cost(dims: ProblemDims, grid: GridShape) -> float:
    """Direct block-triangular matvec work per worker, ``n_d n_m N_t^2 / 2``."""
    n_d, n_m = dims.local(grid)
    return n_d * n_m * dims.n_t**2 / 2


@dataclass(frozen=True)
class FlopReport:
    n_u: float
    n_m: float
    per_solve: float
    effective_rank: float
    conventional_total: float
    fft_setup: float
    fft_matvec: float
    fft_total: float

    @property
    def ratio(self) -> float:
        return self.conventional_total / self.fft_total


def conventional_cost_estimate(n_g: float, n_t: float, n_d: float, rank_fraction: float = 0.1) -> FlopReport:
    """FLOPs of a PDE-solve-based inversion vs the precomputed FFT approach.

    Model: 27-point stencil with 3 DOFs per grid point, RK4 (324 FLOPs per
    state DOF per step), parameters on a 2D surface ``N_m = N_g^(2/3)``,
    ``2 r`` Hessian-related solves or matvecs where ``r`` is the effective
    rank ``rank_fraction * N_d * N_t``.
    """
    n_u = 3 * n_g
    per_solve = 324 * n_u * n_t
    rank = n_d * n_t * rank_fraction
    n_m = round(n_g ** (2 / 3))
    setup = n_d * per_solve
    matvec = 2 * rank * 8 * n_m * n_d * n_t
    return FlopReport(n_u, n_m, per_solve, rank, 2 * rank * per_solve, setup, matvec, setup + matvec)


def intensity(n_d: int, n_m: int) -> Fraction:
    """Theoretical FLOPs/byte of the per-frequency complex matvec."""
    return arithmetic_intensity(n_d, n_m)
