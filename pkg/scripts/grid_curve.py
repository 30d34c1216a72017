"""Modified communication cost over the factor pairs of p for several l.

Writes one CSV row per (l, r) and prints the chosen grid for each l.

    python scripts/grid_curve.py -p 80 -k 4 --out grid_curve.csv
"""
import argparse
import csv
import sys

from fastp2o.planner import grid_curve, real_optimal_rows, select_grid


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("-p", type=int, default=80)
    ap.add_argument("-k", type=int, default=4, help="workers per node")
    ap.add_argument("--ls", default="-4,-3,-2,-1,0", help="comma-separated log10(N_d/N_m) values")
    ap.add_argument("--out", default=None)
    args = ap.parse_args(argv)

    ls = [float(x) for x in args.ls.split(",")]
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    writer = csv.writer(fh)
    writer.writerow(["l", "r", "c", "modified_cost"])
    for l in ls:
        for r, c, cost in grid_curve(args.p, l):
            writer.writerow([l, r, c, repr(cost)])
    if args.out:
        fh.close()
    for l in ls:
        g = select_grid(args.p, l, args.k)
        print(f"l={l:+g}: real minimizer r~{real_optimal_rows(args.p, l):.3f}, chosen {g}", file=sys.stderr)


if __name__ == "__main__":
    main()
