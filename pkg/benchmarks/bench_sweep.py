"""Time the compiled and pure-Python reassignment kernels on identical inputs.

    python benchmarks/bench_sweep.py [--n 300] [--repeat 5]

Both kernels receive the same pre-drawn uniforms, gamma draws and Bartlett
factors, so they do identical work and return identical partitions.
"""

import argparse
import time

import numpy as np

from dpgls import _sweep_py
from dpgls.stats_kernels import bartlett_factor

try:
    from dpgls import _sweep as _cy
except ImportError:
    _cy = None


def scalar_inputs(n, K, seed):
    g = np.random.default_rng(seed)
    assign = np.concatenate([np.arange(K), g.integers(0, K, n - K)]).astype(np.int64)
    counts = np.zeros(n + 1, np.int64)
    counts[:K] = np.bincount(assign, minlength=K)
    values = np.zeros(n + 1)
    values[:K] = g.uniform(0.2, 5.0, K)
    return [g.standard_t(2, n), assign, values, counts, K, 1.0, 3.0, 2.0, g.random(n), g.standard_gamma(3.5, n)]


def matrix_inputs(n, K, seed, q=2):
    g = np.random.default_rng(seed)
    assign = np.concatenate([np.arange(K), g.integers(0, K, n - K)]).astype(np.int64)
    counts = np.zeros(n + 1, np.int64)
    counts[:K] = np.bincount(assign, minlength=K)
    chols = np.zeros((n + 1, q, q))
    chols[:K] = np.eye(q) * g.uniform(0.5, 2.0, (K, 1, 1))
    half = np.zeros(n + 1)
    half[:K] = np.log(np.diagonal(chols[:K], axis1=1, axis2=2)).sum(axis=1)
    A = bartlett_factor(q + 3.0, q, g, size=n)
    return [g.standard_t(2, (n, q)), assign, chols, half, counts, K, 1.0, q + 2.0, np.eye(q), np.eye(q), A, g.random(n)]


def fresh(args):
    return [a.copy() if isinstance(a, np.ndarray) else a for a in args]


def bench(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        a = fresh(args)
        t0 = time.perf_counter()
        fn(*a)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=300)
    ap.add_argument("--groups", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    cases = [
        ("scalar (inverse gamma)", "sweep_scalar", scalar_inputs(args.n, args.groups, 0)),
        ("matrix (inverse Wishart, Q=2)", "sweep_matrix", matrix_inputs(args.n, args.groups, 1)),
        ("scalar, panel size N*T=1500", "sweep_scalar", scalar_inputs(1500, args.groups, 2)),
    ]
    print(f"{'kernel':32s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for label, name, inputs in cases:
        t_py = bench(getattr(_sweep_py, name), inputs, args.repeat)
        if _cy is None:
            print(f"{label:32s} {1e3 * t_py:12.2f} {'n/a':>12s} {'n/a':>8s}")
            continue
        t_cy = bench(getattr(_cy, name), inputs, args.repeat)
        print(f"{label:32s} {1e3 * t_py:12.2f} {1e3 * t_cy:12.3f} {t_py / t_cy:7.0f}x")


if __name__ == "__main__":
    main()
