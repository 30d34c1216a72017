"""Oracle-equivalence checks run by ``fastp2o verify``."""
from __future__ import annotations

import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from . import block_operator as bo
from . import distributed as dist
from . import inverse, lti, planner, toeplitz
from .fileio import load_operator, read_vector, write_compact, write_spectral, write_vector
from .fixtures import BUILTIN, FixtureConfig


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def rel_err(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    scale = max(np.abs(b).max(initial=0.0), np.finfo(float).tiny)
    return float(np.abs(a - b).max(initial=0.0) / scale)


def random_compact(rng, n_d, n_m, n_t) -> bo.CompactP2O:
    return bo.CompactP2O(rng.uniform(-1, 1, (n_t, n_d, n_m)))


def _check(name, err, tol) -> CheckResult:
    return CheckResult(name, err <= tol, f"max error {err:.2e} (tol {tol:.0e})")


def check_toeplitz(rng) -> CheckResult:
    worst = 0.0
    for n in (1, 2, 5, 8, 33, 64):
        spec = toeplitz.ToeplitzSpec(n, rng.uniform(-1, 1, n), rng.uniform(-1, 1, n - 1))
        dense = scipy.linalg.toeplitz(spec.first_col, np.r_[spec.first_col[0], spec.first_row_tail])
        x = rng.standard_normal(n)
        worst = max(worst, rel_err(toeplitz.toeplitz_matvec(spec, x), dense @ x),
                    rel_err(toeplitz.toeplitz_adjoint_matvec(spec, x), dense.T @ x))
    return _check("toeplitz kernel matches dense", worst, 1e-11)


def check_backends(rng, instances: int = 40) -> CheckResult:
    worst = 0.0
    for _ in range(instances):
        n_d, n_m = rng.integers(1, 9, size=2)
        n_t = int(rng.choice([1, 2, 8, 64]))
        compact = random_compact(rng, n_d, n_m, n_t)
        spec = bo.setup(compact, retain_soti=True)
        m = bo.SpaceTimeVector.from_soti(rng.standard_normal((n_m, n_t)))
        d = bo.SpaceTimeVector.from_soti(rng.standard_normal((n_d, n_t)))
        ref_f = bo.naive_apply_forward(compact, m.to(bo.Ordering.TOSI)).to(bo.Ordering.SOTI).values
        ref_a = bo.naive_apply_adjoint(compact, d.to(bo.Ordering.TOSI)).to(bo.Ordering.SOTI).values
        worst = max(worst,
                    rel_err(bo.apply_forward(spec, m).values, ref_f),
                    rel_err(bo.apply_forward_ewp(spec, m).values, ref_f),
                    rel_err(bo.apply_adjoint(spec, d).values, ref_a),
                    rel_err(bo.apply_adjoint_ewp(spec, d).values, ref_a))
    return _check("fft/ewp/naive backends agree", worst, 1e-11)


def check_adjoint_identity(rng, instances: int = 40) -> CheckResult:
    worst = 0.0
    for _ in range(instances):
        n_d, n_m = rng.integers(1, 9, size=2)
        n_t = int(rng.integers(1, 65))
        spec = bo.setup(random_compact(rng, n_d, n_m, n_t))
        m = rng.standard_normal((n_m, n_t))
        d = rng.standard_normal((n_d, n_t))
        lhs = np.vdot(bo.forward_array(spec, m), d)
        rhs = np.vdot(m, bo.adjoint_array(spec, d))
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300))
    return _check("<Fm, d> = <m, F*d>", worst, 1e-11)


def check_lti(fixtures) -> list[CheckResult]:
    worst_sim = worst_route = 0.0
    for cfg in fixtures:
        system = cfg.build()
        compact = lti.assemble_compact_p2o(system)
        other = lti.assemble_compact_p2o_adjoint_route(system)
        m = bo.SpaceTimeVector.from_tosi(cfg.rng(1).standard_normal((cfg.n_t, cfg.n_m)))
        sim = lti.simulate_forward(system, m).values
        fast = bo.apply_forward(bo.setup(compact), m.to(bo.Ordering.SOTI)).to(bo.Ordering.TOSI).values
        worst_sim = max(worst_sim, rel_err(fast, sim))
        worst_route = max(worst_route, rel_err(other.blocks, compact.blocks))
    return [_check("LTI simulation = assembled-operator matvec", worst_sim, 1e-11),
            _check("forward/adjoint assembly routes agree", worst_route, 1e-12)]


def check_distributed(rng) -> CheckResult:
    compact = random_compact(rng, 5, 7, 32)
    spec = bo.setup(compact)
    m = bo.SpaceTimeVector.from_soti(rng.standard_normal((7, 32)))
    d = bo.SpaceTimeVector.from_soti(rng.standard_normal((5, 32)))
    ref_f, ref_a = bo.apply_forward(spec, m).values, bo.apply_adjoint(spec, d).values
    worst = 0.0
    for grid in ("1x1", "1x4", "2x2", "4x1", "2x3"):
        part = dist.partition_operator(compact, planner.GridShape.parse(grid))
        worst = max(worst, rel_err(dist.distributed_forward(part, m).vector.values, ref_f),
                    rel_err(dist.distributed_adjoint(part, d).vector.values, ref_a))
    return _check("distributed grids match serial", worst, 1e-11)


def check_planner(max_p: int = 1024) -> CheckResult:
    misses = 0
    for l in range(-6, 1):
        for p in range(1, max_p + 1):
            chosen = planner.select_grid(p, l, 1)
            best = planner.brute_force_grid(p, l)
            if planner.modified_cost(chosen.r, p, l) > planner.modified_cost(best.r, p, l) * (1 + 1e-12):
                misses += 1
    fig = [planner.select_grid(80, l, 4).r for l in (-4, -3, -2)]
    ok = misses == 0 and fig == [1, 1, 4]
    return CheckResult("grid selection optimal", ok, f"{misses} suboptimal choices; p=80,k=4 rows {fig}")


def check_cost_estimate() -> CheckResult:
    rep = planner.conventional_cost_estimate(1e9, 1e4, 100, 0.1)
    ok = (abs(rep.per_solve / 9.72e15 - 1) < 1e-9 and abs(rep.conventional_total / 1.944e21 - 1) < 0.01
          and abs(rep.fft_total / 2.57e18 - 1) < 0.01 and rep.ratio > 750)
    return CheckResult("FLOP estimate reproduces reference values", ok,
                       f"per-solve {rep.per_solve:.3e}, conventional {rep.conventional_total:.3e}, "
                       f"fft {rep.fft_total:.3e}, ratio {rep.ratio:.1f}")


def check_cg(rng) -> CheckResult:
    compact = random_compact(rng, 3, 4, 8)
    spec = bo.setup(compact)
    reg = inverse.Regularization("identity", 0.1)
    d_obs = rng.standard_normal((3, 8))
    H = inverse.HessianOperator(spec, reg)
    res = inverse.cg_solve(H, bo.adjoint_array(spec, d_obs), tol=1e-12)
    # dense oracle in SOTI ordering
    perm_m = np.arange(4 * 8).reshape(8, 4).T.reshape(-1)
    perm_d = np.arange(3 * 8).reshape(8, 3).T.reshape(-1)
    F = bo.to_dense(compact)[np.ix_(perm_d, perm_m)]
    direct = np.linalg.solve(F.T @ F + 0.1 * np.eye(32), F.T @ d_obs.reshape(-1))
    return _check("CG matches dense solve", rel_err(res.m.reshape(-1), direct), 1e-8)


def check_roundtrip(rng) -> CheckResult:
    compact = random_compact(rng, 2, 3, 5)
    spec = bo.setup(compact)
    v = bo.SpaceTimeVector.from_soti(rng.standard_normal((3, 5)))
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        write_compact(tmp / "op.btop", compact)
        write_spectral(tmp / "spec.btop", spec)
        write_vector(tmp / "v.btvc", v)
        ok = (np.array_equal(load_operator(tmp / "op.btop").blocks, compact.blocks)
              and np.array_equal(load_operator(tmp / "spec.btop").freq_blocks, spec.freq_blocks)
              and np.array_equal(read_vector(tmp / "v.btvc").values, v.values))
    return CheckResult("binary file round trip is bit-exact", ok, "")


def run_all(seed: int = 0, fixture_dir: str | None = None) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    fixtures = BUILTIN
    if fixture_dir is not None:
        fixtures = [FixtureConfig.load(p) for p in sorted(Path(fixture_dir).glob("*.json"))]
    results = [check_toeplitz(rng), check_backends(rng), check_adjoint_identity(rng)]
    results += check_lti(fixtures)
    results += [check_distributed(rng), check_planner(), check_cost_estimate(),
                check_cg(rng), check_roundtrip(rng)]
    return results
