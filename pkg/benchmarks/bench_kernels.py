#!/usr/bin/env python3
"""Benchmark the jit-compiled kernels against their pure-numpy fallbacks.

Run:  python benchmarks/bench_kernels.py [--repeats 7]

Sizes cover the two regimes that matter in practice: small latent-space
batches hit in every training step, and wide raw-feature sweeps hit by the
classical baselines.
"""

import argparse
import time

import numpy as np

from vibgmm.kernels import _numpy as knp

try:
    from vibgmm.kernels import _numba as knb
except ImportError:
    knb = None


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_case(name, make_args, call, repeats):
    args = make_args()
    t_np = best_of(lambda: call(knp, *args), repeats)
    row = f"{name:<44} numpy {t_np * 1e3:9.3f} ms"
    if knb is not None:
        call(knb, *args)  # compile outside the timer
        t_nb = best_of(lambda: call(knb, *args), repeats)
        row += f"   numba {t_nb * 1e3:9.3f} ms   x{t_np / t_nb:6.2f}"
    print(row)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()
    rng = np.random.default_rng(0)

    if knb is None:
        print("numba unavailable; timing the numpy fallback only\n")

    def kl_args(b, c, d):
        return lambda: (
            rng.standard_normal((b, d)), rng.uniform(-1, 1, (b, d)),
            rng.standard_normal((c, d)), rng.uniform(-1, 1, (c, d)),
        )

    def kl_grad_args(b, c, d):
        base = kl_args(b, c, d)

        def make():
            return (*base(), rng.standard_normal((b, c)))

        return make

    def lg_args(n, c, d):
        return lambda: (
            rng.standard_normal((n, d)), rng.standard_normal((c, d)),
            rng.uniform(-1, 1, (c, d)),
        )

    def nc_args(n, k, d):
        return lambda: (rng.standard_normal((n, d)), rng.standard_normal((k, d)))

    cases = [
        ("kl_diag_matrix        B=100  C=10 D=10", kl_args(100, 10, 10),
         lambda m, *a: m.kl_diag_matrix(*a)),
        ("kl_diag_matrix        B=4096 C=50 D=32", kl_args(4096, 50, 32),
         lambda m, *a: m.kl_diag_matrix(*a)),
        ("kl_diag_matrix_grads  B=100  C=10 D=10", kl_grad_args(100, 10, 10),
         lambda m, *a: m.kl_diag_matrix_grads(*a)),
        ("kl_diag_matrix_grads  B=4096 C=50 D=32", kl_grad_args(4096, 50, 32),
         lambda m, *a: m.kl_diag_matrix_grads(*a)),
        ("log_gauss_diag_matrix N=1e4  C=10 D=10", lg_args(10_000, 10, 10),
         lambda m, *a: m.log_gauss_diag_matrix(*a)),
        ("log_gauss_diag_matrix N=1e4  C=10 D=784", lg_args(10_000, 10, 784),
         lambda m, *a: m.log_gauss_diag_matrix(*a)),
        ("nearest_centroid      N=1e4  K=10 D=784", nc_args(10_000, 10, 784),
         lambda m, *a: m.nearest_centroid(*a)),
        ("nearest_centroid      N=1e5  K=10 D=32", nc_args(100_000, 10, 32),
         lambda m, *a: m.nearest_centroid(*a)),
    ]
    for name, make_args, call in cases:
        bench_case(name, make_args, call, args.repeats)


if __name__ == "__main__":
    main()
