"""Time the numba and numpy row kernels on the same batches.

    python3 benchmarks/bench_kernels.py [--rows 200000] [--repeat 5]

Numba is compiled (and cached) on the warm-up call, which is not timed.
"""
import argparse
import time

import numpy as np

from means_lab import kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    cases = [
        ("gini(2,3)", lambda X: kernels.gini_rows_numpy(X, 2.0, 3.0), lambda X: kernels.gini_rows_numba(X, 2.0, 3.0)),
        ("gini(1.5,1.5)", lambda X: kernels.gini_rows_numpy(X, 1.5, 1.5),
         lambda X: kernels.gini_rows_numba(X, 1.5, 1.5)),
        ("holder(0.5)", lambda X: kernels.holder_rows_numpy(X, 0.5), lambda X: kernels.holder_rows_numba(X, 0.5)),
        ("holder(0)", lambda X: kernels.holder_rows_numpy(X, 0.0), lambda X: kernels.holder_rows_numba(X, 0.0)),
    ]
    print(f"active backend: {kernels.BACKEND}")
    print(f"{'kernel':<15}{'n':>4}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}{'max |diff|':>13}")
    for n in (2, 3, 10):
        X = rng.uniform(0.5, 5.0, (args.rows, n))
        for name, f_np, f_nb in cases:
            a, b = f_np(X), f_nb(X)  # warm-up / compile
            t_np = best_of(lambda: f_np(X), args.repeat)
            t_nb = best_of(lambda: f_nb(X), args.repeat)
            print(f"{name:<15}{n:>4}{t_np * 1e3:>12.2f}{t_nb * 1e3:>12.2f}{t_np / t_nb:>10.2f}"
                  f"{np.max(np.abs(a - b)):>13.2e}")


if __name__ == "__main__":
    main()
