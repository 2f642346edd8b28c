"""Clique number bounds on seeded G(n, 0.5) graphs, optionally checked by exact search."""

import argparse
import time

from disjsos.bench import erdos_renyi, oracle_clique
from disjsos.bnb import clique_number_bounds


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=75)
    ap.add_argument("--seeds", default="1,2,3,4")
    ap.add_argument("--node-cap", type=int, default=2000)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--int-gap", type=int, default=1, help="stop once upper - lower <= this")
    ap.add_argument("--oracle", action="store_true", help="also run the exact clique search")
    args = ap.parse_args()
    for seed in (int(s) for s in args.seeds.split(",")):
        A = erdos_renyi(args.n, 0.5, seed)
        t0 = time.perf_counter()
        lo, hi, res = clique_number_bounds(A, K=10, node_cap=args.node_cap, workers=args.workers,
                                           int_gap=args.int_gap)
        wall = time.perf_counter() - t0
        omega = oracle_clique(A) if args.oracle else "?"
        print(f"G({args.n},0.5) seed {seed}: omega {omega}, bounds [{lo}, {hi}], "
              f"{res.subregion_count} subregions, {wall:.1f}s ({res.reason})")


if __name__ == "__main__":
    main()
