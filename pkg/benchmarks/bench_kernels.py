"""Compare the numba kernels against their numpy twins.

    python benchmarks/bench_kernels.py --scale 14 --repeat 5

Both variants are compiled/imported in the same process regardless of
AMTGRAPH_DISABLE_NUMBA, so the flag only matters for what the library
itself dispatches to.
"""
import argparse
import statistics
import time

import numpy as np

from amtgraph import build_csr, generate_urand, symmetrize
from amtgraph import kernels
from amtgraph.runtime import PartitionMap


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def bfs_case(G, L):
    lo, hi = PartitionMap(G.n, L).segment(0)

    def run(fn):
        parents = np.full(hi - lo, -1, np.int64)
        levels = np.full(hi - lo, -1, np.int64)
        seed = np.array([lo], np.int64)
        fn(G.row_offsets, G.targets, parents, levels, lo, hi, seed, seed, np.zeros(1, np.int64), True)

    return run


def scatter_case(G, L):
    lo, hi = PartitionMap(G.n, L).segment(0)
    ranks = np.full(hi - lo, 1.0 / G.n)
    deg = G.out_degrees()[lo:hi].astype(np.int64)

    def run(fn):
        fn(G.row_offsets, G.targets, ranks, deg, lo, hi, np.zeros(hi - lo), np.zeros(G.n), np.zeros(G.n, np.bool_))

    return run


def dedupe_case(G, L):
    rng = np.random.default_rng(0)
    k = G.m // L
    v = rng.integers(0, G.n, k)
    p = rng.integers(0, G.n, k)
    lvl = rng.integers(0, 8, k)

    def run(fn):
        fn(v, p, lvl, G.n)

    return run


CASES = {
    "bfs_expand": (bfs_case, kernels.bfs_expand_nb, kernels.bfs_expand_np),
    "pr_scatter_dense": (scatter_case, kernels.pr_scatter_dense_nb, kernels.pr_scatter_dense_np),
    "dedupe_min_level": (dedupe_case, kernels.dedupe_min_level_nb, kernels.dedupe_min_level_np),
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", type=int, default=14)
    ap.add_argument("--degree", type=int, default=16)
    ap.add_argument("--localities", type=int, default=1, help="kernel works on locality 0's segment")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    G = build_csr(symmetrize(generate_urand(args.scale, args.degree, 1)), directed=False)
    print(f"graph: urand scale={args.scale} degree={args.degree} n={G.n} m={G.m}, L={args.localities}")
    print(f"{'kernel':<18} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8}")
    for name, (make, nb, np_) in CASES.items():
        run = make(G, args.localities)
        run(nb)  # compile outside the timing
        t_nb = best_of(lambda: run(nb), args.repeat)
        t_np = best_of(lambda: run(np_), args.repeat)
        print(f"{name:<18} {t_nb * 1e3:>10.2f} {t_np * 1e3:>10.2f} {t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
