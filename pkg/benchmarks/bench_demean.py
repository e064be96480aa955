#!/usr/bin/env python3
"""Benchmark the compiled demeaning kernel against the NumPy fallback.

The alternating-demeaning sweep is the hot loop of every fit, so Monte Carlo
and rolling-window workloads scale directly with it. Run after building the
extension:

    python benchmarks/bench_demean.py
"""

import time

import numpy as np

from searise.backend import available_backends


def make_problem(n_rows: int, n_cols: int, n_regions: int, n_cy: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    data = rng.normal(size=(n_rows, n_cols))
    codes = np.column_stack([
        rng.integers(0, n_regions, n_rows),
        rng.integers(0, n_cy, n_rows),
    ]).astype(np.int64)
    levels = np.array([n_regions, n_cy], dtype=np.int64)
    return data, codes, levels


def time_backend(fn, data, codes, levels, repeats: int) -> tuple[float, int]:
    best = np.inf
    iterations = 0
    for _ in range(repeats):
        work = np.ascontiguousarray(data.copy())
        t0 = time.perf_counter()
        iterations, _change, ok = fn(work, codes, levels, 1e-10, 10_000)
        best = min(best, time.perf_counter() - t0)
        assert ok
    return best, iterations


def main() -> None:
    backends = available_backends()
    cases = [
        ("panel-scale (711 x 5)", 711, 5, 79, 90),
        ("mid (5k x 6)", 5_000, 6, 200, 400),
        ("large (100k x 8)", 100_000, 8, 1_000, 2_000),
    ]
    print(f"backends: {', '.join(backends)}")
    print(f"{'case':>22} {'backend':>8} {'best time':>12} {'sweeps':>7} {'speedup':>8}")
    for label, n, k, g1, g2 in cases:
        data, codes, levels = make_problem(n, k, g1, g2)
        repeats = 9 if n <= 10_000 else 3
        base = None
        for name in ("python", "cython"):
            if name not in backends:
                continue
            elapsed, sweeps = time_backend(backends[name], data, codes, levels, repeats)
            speedup = "" if base is None else f"{base / elapsed:7.1f}x"
            if base is None:
                base = elapsed
            print(f"{label:>22} {name:>8} {elapsed * 1e3:10.2f}ms {sweeps:7d} {speedup:>8}")


if __name__ == "__main__":
    main()
