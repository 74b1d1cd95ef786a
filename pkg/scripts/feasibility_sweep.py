"""Sweep free and graph synthesis over orders and network sizes.

For each (N, n) the script synthesises collections from random top
eigenvalues, verifies them and reports the smallest first-order eigenvalue
and the gain bound, which show how quickly the spectra shrink with order.
"""
import argparse
import time

import numpy as np

from compsync import graphs
from compsync.collection import synthesize_free, synthesize_graph, verify_collection
from compsync.lyapunov import gain_lower_bound


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--max-order", type=int, default=6)
    ap.add_argument("--low", type=float, default=1.0, help="top eigenvalues drawn from U[low, high]")
    ap.add_argument("--high", type=float, default=10.0)
    ap.add_argument("--w", type=float, default=1.0)
    args = ap.parse_args()

    t0 = time.perf_counter()
    print(f"{'N':>3s} {'n':>3s} {'passed':>7s} {'min lambda_1':>13s} {'max gain':>10s}")
    for N in range(2, 9):
        for n in range(2, args.max_order + 1):
            ok, lam1, gain = 0, np.inf, 0.0
            for seed in range(args.seeds):
                top = np.random.default_rng(seed).uniform(args.low, args.high, N - 1)
                c = synthesize_free(N, n, top_eigs=top)
                ok += verify_collection(c).passed
                lam1 = min(lam1, c.lam[1, 1:].min())
                gain = max(gain, gain_lower_bound(c, args.w))
            print(f"{N:3d} {n:3d} {ok:4d}/{args.seeds:<2d} {lam1:13.3e} {gain:10.3e}")
    print(f"free sweep: {time.perf_counter() - t0:.1f} s")

    fails = 0
    for kind in ("path", "cycle", "complete", "random-connected"):
        for N in range(3, 13):
            L = graphs.laplacian(graphs.make_graph(kind, N, seed=N))
            for n in range(2, 6):
                c, _ = synthesize_graph(L, n)
                fails += not verify_collection(c, graph=L).passed
    print(f"graph sweep: {fails} failures")


if __name__ == "__main__":
    main()
