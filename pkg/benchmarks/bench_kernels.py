"""Timing comparison of the per-anchor loss kernels: jit loops vs numpy.

Runs each kernel on a range of PK batch sizes with both backends and
prints a table of per-call times and the speedup of the jit path. The
first jit call compiles, so every (kernel, size) cell is warmed before
timing.

Usage:
    python3 benchmarks/bench_kernels.py [--repeats 20] [--q 8]
"""

import argparse
import time

import numpy as np

from metriclab import _kernels_numpy as knp
from metriclab.backend import numba_available
from metriclab.numerics import pairwise_angular_D

SIZES = [(4, 8), (8, 8), (16, 8), (32, 8), (64, 8)]  # (P, Q)
DIM = 32


def make_batch(P, Q, dim, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(P * Q, dim))
    labels = np.repeat(np.arange(P), Q)
    return X, labels


def best_of(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_backend(mod, X, labels, D, repeats):
    calls = {
        "pos_terms": lambda: mod.pos_terms(X, labels, 1e-8),
        "neg_terms": lambda: mod.neg_terms(D, labels, 0.9),
        "triplet_terms": lambda: mod.triplet_terms(X, labels, 0.3, 1e-8),
    }
    out = {}
    for name, call in calls.items():
        call()  # warm-up (jit compile / cache fill)
        out[name] = best_of(call, repeats)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument("--q", type=int, default=8, help="samples per class")
    ap.add_argument("--dim", type=int, default=DIM)
    args = ap.parse_args()

    if not numba_available():
        print("numba is not importable here; nothing to compare")
        return 1
    from metriclab import _kernels_numba as knb

    print(
        "%-8s %-14s %12s %12s %9s"
        % ("batch", "kernel", "numpy [us]", "numba [us]", "speedup")
    )
    for P, _ in SIZES:
        Q = args.q
        X, labels = make_batch(P, Q, args.dim, seed=0)
        D = pairwise_angular_D(X)
        t_np = bench_backend(knp, X, labels, D, args.repeats)
        t_nb = bench_backend(knb, X, labels, D, args.repeats)
        for name in t_np:
            print(
                "%-8s %-14s %12.1f %12.1f %8.1fx"
                % (
                    "%dx%d" % (P, Q),
                    name,
                    1e6 * t_np[name],
                    1e6 * t_nb[name],
                    t_np[name] / t_nb[name],
                )
            )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
