"""Benchmark: numba kernels vs the pure-numpy fallback.

Runs the same workloads through both implementations (imported directly, so
the VOTERLAB_BACKEND flag does not matter here) and prints a table. The
outputs of the two paths are identical by construction; this script also
spot-checks that while timing.

Usage: python benchmarks/bench_backends.py [--quick]
"""

import argparse
import time

import numpy as np

from voterlab import graphs
from voterlab.kernels import numba_impl as nb
from voterlab.kernels import numpy_impl as nv
from voterlab.rng import make_rng


def timed(fn, *args, repeat=3):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_consensus(n, trials):
    g = graphs.cycle_graph(n)
    init = np.arange(n, dtype=np.int64)

    def run(impl):
        total_rounds = 0
        for i in range(trials):
            rng = make_rng(1000 + i)
            opin = init.copy()
            lam = np.zeros(n, dtype=np.int64)
            impl.lambda_counts(g.indptr, g.indices, opin, lam)
            counts = np.bincount(opin, minlength=n).astype(np.int64)
            done = False
            r = 256
            while not done:
                block = rng.random((r, n))
                consumed, done = impl.consensus_standard_batch(
                    g.indptr, g.indices, g.degrees, opin, lam, counts, block
                )
                total_rounds += consumed
                r = min(r * 2, 4096)
        return total_rounds

    return run


def bench_conductance(n):
    g = graphs.cycle_graph(n)

    def run(impl):
        return impl.conductance_enumerate(g.indptr, g.indices, g.degrees)

    return run


def bench_chernoff(trials, ell):
    rng = make_rng(7)
    block = rng.random((ell, trials))

    def run(impl):
        z = np.empty(trials, dtype=np.int64)
        b = np.empty(trials, dtype=np.float64)
        impl.adaptive_sums(block, 20.0, 0.2, 0, z, b)
        return int(z.sum())

    return run


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="smaller workloads")
    args = parser.parse_args()

    if args.quick:
        workloads = [
            ("voter consensus, C64 x 20 trials", bench_consensus(64, 20)),
            ("exact conductance, C18", bench_conductance(18)),
            ("adaptive tail sums, 2e4 x 100", bench_chernoff(20_000, 100)),
        ]
    else:
        workloads = [
            ("voter consensus, C128 x 50 trials", bench_consensus(128, 50)),
            ("exact conductance, C22", bench_conductance(22)),
            ("adaptive tail sums, 2e5 x 100", bench_chernoff(200_000, 100)),
        ]

    # trigger numba compilation outside the timed region
    for _, fn in workloads:
        fn(nb)

    print(f"{'workload':<38} {'numba':>10} {'numpy':>10} {'speedup':>8}")
    for name, fn in workloads:
        t_nb, out_nb = timed(fn, nb)
        t_nv, out_nv = timed(fn, nv, repeat=1)
        matches = "" if _same(out_nb, out_nv) else "  MISMATCH!"
        print(f"{name:<38} {t_nb:>9.3f}s {t_nv:>9.3f}s {t_nv / t_nb:>7.1f}x{matches}")


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.all(np.asarray(a) == np.asarray(b))


if __name__ == "__main__":
    main()
