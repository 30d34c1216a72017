"""Command-line entry point: ``fastp2o <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import block_operator as bo
from . import distributed as dist
from . import inverse, lti, planner, verify
from .counters import OpCounter
from .errors import DimensionError, EmptyShardError, FormatError, NotSPDError, OrderingError
from .fileio import load_operator, read_vector, write_compact, write_spectral, write_vector
from .fixtures import FixtureConfig


def _write_json(path: Path, obj: dict) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _report(obj: dict, timing: dict, args) -> dict:
    if not args.no_timing:
        obj["timing"] = timing
    return obj


def _load_both(path) -> tuple[bo.CompactP2O | None, bo.SpectralP2O, float]:
    """Compact (if the file is time-domain) and spectral forms of an operator."""
    op = load_operator(path)
    if isinstance(op, bo.CompactP2O):
        t0 = time.perf_counter()
        spec = bo.setup(op, retain_soti=True)
        return op, spec, time.perf_counter() - t0
    return None, bo.SpectralP2O.from_freq_blocks(op.freq_blocks, retain_soti=True), 0.0


def cmd_generate(args) -> int:
    cfg = FixtureConfig.load(args.fixture)
    if args.seed is not None:
        cfg = FixtureConfig(**{**cfg.__dict__, "seed": args.seed})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    system = cfg.build()
    compact = lti.assemble_compact_p2o(system)
    write_compact(out / "operator.btop", compact)
    m_true = bo.SpaceTimeVector.from_tosi(cfg.rng(1).standard_normal((cfg.n_t, cfg.n_m)))
    d_clean = lti.simulate_forward(system, m_true).as_array()
    d_obs = d_clean if cfg.snr is None else inverse.add_noise(d_clean, cfg.snr, cfg.rng(2))
    write_vector(out / "m_true.btvc", m_true.to(bo.Ordering.SOTI))
    write_vector(out / "d_obs.btvc", bo.SpaceTimeVector.from_tosi(d_obs).to(bo.Ordering.SOTI))
    _write_json(out / "fixture.json", {"fixture": json.loads(cfg.to_json()),
                                       "spectral_radius": lti.spectral_radius(system.A)})
    print(f"wrote {out}/operator.btop (N_d={cfg.n_d}, N_m={cfg.n_m}, N_t={cfg.n_t})")
    return 0


def cmd_setup(args) -> int:
    op = load_operator(args.operator)
    if not isinstance(op, bo.CompactP2O):
        raise FormatError(f"{args.operator}: already a frequency-domain operator")
    t0 = time.perf_counter()
    spec = bo.setup(op)
    elapsed = time.perf_counter() - t0
    write_spectral(args.out, spec)
    rep = {"n_d": spec.n_d, "n_m": spec.n_m, "n_t": spec.n_t}
    _write_json(Path(args.out).with_suffix(".json"), _report(rep, {"setup_seconds": elapsed}, args))
    print(f"wrote {args.out}")
    return 0


def cmd_matvec(args) -> int:
    compact, spec, setup_s = _load_both(args.operator)
    vec = read_vector(args.input).to(bo.Ordering.SOTI)
    params = planner.CostParams(args.latency, args.bandwidth, args.gpus_per_node)
    grid = planner.GridShape.parse(args.grid)
    report: dict = {"backend": args.backend, "adjoint": args.adjoint, "grid": str(grid)}
    counter = None
    t0 = time.perf_counter()
    if args.backend == "naive":
        if grid.p != 1:
            raise ValueError("the naive backend runs on a 1x1 grid only")
        compact = compact if compact is not None else spec.to_compact()
        fn = bo.naive_apply_adjoint if args.adjoint else bo.naive_apply_forward
        counter = OpCounter()
        out = fn(compact, vec.to(bo.Ordering.TOSI), counter).to(bo.Ordering.SOTI)
    elif args.backend == "ewp":
        if grid.p != 1:
            raise ValueError("the ewp backend runs on a 1x1 grid only")
        fn = bo.apply_adjoint_ewp if args.adjoint else bo.apply_forward_ewp
        counter = OpCounter()
        out = fn(spec, vec, counter)
    else:
        part = dist.partition_operator(spec, grid)
        fn = dist.distributed_adjoint if args.adjoint else dist.distributed_forward
        res = fn(part, vec, threads=args.threads)
        out, counter = res.vector, res.counter
        report["comm_log"] = res.log.as_dict()
        report["comm_report"] = dist.comm_report(res.log, params)
    elapsed = time.perf_counter() - t0
    report["flops"] = counter.total_flops
    report["bytes"] = counter.total_bytes
    write_vector(args.out, out)
    timing = {"setup_seconds": setup_s, "matvec_seconds": elapsed,
              "stages": {k: v.seconds for k, v in counter.stages.items()}}
    _write_json(Path(args.out).with_suffix(".json"), _report(report, timing, args))
    print(f"wrote {args.out}")
    return 0


def cmd_solve(args) -> int:
    _, spec, _ = _load_both(args.operator)
    d_obs = read_vector(args.observations).to(bo.Ordering.SOTI)
    reg = inverse.Regularization(args.regularization, args.alpha)
    grid = planner.GridShape.parse(args.grid)
    part = None
    if grid.p > 1:
        part = dist.partition_operator(spec, grid)
    H = inverse.HessianOperator(spec, reg, part, threads=args.threads)
    rhs = inverse.adjoint_array(spec, d_obs.as_array())
    t0 = time.perf_counter()
    res = inverse.cg_solve(H, rhs, tol=args.tol, maxiter=args.maxiter, precondition=args.precondition)
    elapsed = time.perf_counter() - t0
    write_vector(args.out, bo.SpaceTimeVector.from_soti(res.m))
    rep = res.report()
    rep.update({"alpha": args.alpha, "regularization": reg.kind.value, "grid": str(grid),
                "objective": inverse.objective_eval(spec, res.m, d_obs.as_array(), reg),
                "hessian_applications": H.applications})
    _write_json(Path(args.out).with_suffix(".json"), _report(rep, {"solve_seconds": elapsed}, args))
    print(f"{'converged' if res.converged else 'NOT converged'} in {res.iterations} iterations, "
          f"relative residual {res.relative_residual:.3e}")
    return 0 if res.converged else 3


def cmd_plan_grid(args) -> int:
    if args.l is None:
        if args.n_d is None or args.n_m is None:
            raise ValueError("give -l or both --n-d and --n-m")
        l = float(np.log10(args.n_d / args.n_m))
    else:
        l = args.l
    grid = planner.select_grid(args.p, l, args.k)
    print(f"p={args.p} l={l:g} k={args.k}: r={grid.r} c={grid.c}")
    if args.curve:
        with open(args.curve, "w") as fh:
            fh.write("r,c,modified_cost\n")
            for r, c, cost in planner.grid_curve(args.p, l):
                fh.write(f"{r},{c},{cost!r}\n")
    return 0


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def cmd_bench(args) -> int:
    grids = [planner.GridShape.parse(g) for g in args.grids.split(",")]
    rows = bench_mod.sweep(_int_list(args.n_m), _int_list(args.n_d), _int_list(args.n_t), grids,
                           seed=args.seed, repeats=args.repeats)
    if args.no_timing:
        for row in rows:
            for key in row:
                if key.startswith("t_"):
                    row[key] = 0.0
    if args.out:
        with open(args.out, "w") as fh:
            bench_mod.write_csv(rows, fh)
    else:
        bench_mod.write_csv(rows, sys.stdout)
    return 0


def cmd_verify(args) -> int:
    results = verify.run_all(seed=args.seed, fixture_dir=args.fixtures)
    for r in results:
        print(f"[{'PASS' if r.passed else 'FAIL'}] {r.name}: {r.detail}")
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fastp2o", description="FFT-based block Toeplitz p2o matvecs")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None if p.prog.endswith("generate") else 0)
        p.add_argument("--no-timing", action="store_true", help="omit wall-clock fields from outputs")

    p = sub.add_parser("generate", help="build an LTI fixture and its compact operator")
    p.add_argument("fixture", help="fixture JSON file")
    p.add_argument("--out", required=True, help="output directory")
    common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("setup", help="time-domain operator -> frequency-domain operator")
    p.add_argument("operator")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_setup)

    p = sub.add_parser("matvec", help="apply F or F* to a vector file")
    p.add_argument("operator")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--adjoint", action="store_true")
    p.add_argument("--grid", default="1x1")
    p.add_argument("--backend", choices=["fft", "ewp", "naive"], default="fft")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--latency", type=float, default=1e-6)
    p.add_argument("--bandwidth", type=float, default=1e10)
    p.add_argument("--gpus-per-node", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_matvec)

    p = sub.add_parser("solve", help="solve (F*F + alpha R) m = F* d_obs with CG")
    p.add_argument("operator")
    p.add_argument("observations")
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float, default=1e-2)
    p.add_argument("--regularization", choices=["identity", "laplacian"], default="identity")
    p.add_argument("--precondition", action="store_true", help="use R^-1 as preconditioner")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--maxiter", type=int, default=None)
    p.add_argument("--grid", default="1x1")
    p.add_argument("--threads", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("plan-grid", help="choose a processor grid shape")
    p.add_argument("-p", type=int, required=True, help="number of workers")
    p.add_argument("-l", type=float, default=None, help="log10(N_d / N_m)")
    p.add_argument("--n-d", type=float, default=None)
    p.add_argument("--n-m", type=float, default=None)
    p.add_argument("-k", type=int, default=1, help="workers per node")
    p.add_argument("--curve", default=None, help="write the modified-cost curve as CSV")
    p.set_defaults(func=cmd_plan_grid)

    p = sub.add_parser("bench", help="per-stage timing/counter sweep to CSV")
    p.add_argument("--n-m", default="64,128")
    p.add_argument("--n-d", default="4")
    p.add_argument("--n-t", default="64")
    p.add_argument("--grids", default="1x1")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--out", default=None)
    common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("verify", help="run the oracle-equivalence checks")
    p.add_argument("--fixtures", default=None, help="directory of fixture JSON files")
    common(p)
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, DimensionError, OrderingError, EmptyShardError, NotSPDError,
            ValueError, OSError) as exc:
        print(f"fastp2o {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
