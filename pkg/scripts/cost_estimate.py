"""FLOP budget of a PDE-solve inversion versus the precomputed FFT operator.

    python scripts/cost_estimate.py --n-g 1e9 --n-t 1e4 --n-d 100
"""
import argparse

from fastp2o.planner import conventional_cost_estimate


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-g", type=float, default=1e9, help="spatial grid points")
    ap.add_argument("--n-t", type=float, default=1e4, help="time steps")
    ap.add_argument("--n-d", type=float, default=100, help="sensors")
    ap.add_argument("--rank-fraction", type=float, default=0.1)
    args = ap.parse_args(argv)

    rep = conventional_cost_estimate(args.n_g, args.n_t, args.n_d, args.rank_fraction)
    print(f"state DOFs          {rep.n_u:.3e}")
    print(f"parameters N_m      {rep.n_m:.3e}")
    print(f"FLOPs per PDE solve {rep.per_solve:.3e}")
    print(f"effective rank      {rep.effective_rank:.3e}")
    print(f"conventional total  {rep.conventional_total:.3e}")
    print(f"FFT setup           {rep.fft_setup:.3e}")
    print(f"FFT matvecs         {rep.fft_matvec:.3e}")
    print(f"FFT total           {rep.fft_total:.3e}")
    print(f"ratio               {rep.ratio:.1f}x")
    for n_t in (1e2, 1e3, 1e4, 1e5):
        r = conventional_cost_estimate(args.n_g, n_t, args.n_d, args.rank_fraction)
        print(f"  N_t={n_t:.0e}: ratio {r.ratio:.1f}x")


if __name__ == "__main__":
    main()
