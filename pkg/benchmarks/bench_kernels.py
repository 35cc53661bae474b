"""Timing of the compiled kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--pairs N] [--points M] [--repeat K]

Both variants are run in-process on the same inputs; the numba versions are
called once before timing so compilation is excluded.
"""
import argparse
import timeit

import numpy as np

from fractional_korn import kernels
from fractional_korn._accel import HAS_NUMBA


def _inputs(n_pairs, n_points, seed=0):
    rng = np.random.default_rng(seed)
    du = rng.normal(size=(n_pairs, 2))
    theta = rng.normal(size=(n_pairs, 2))
    theta /= np.linalg.norm(theta, axis=1)[:, None]
    r = rng.uniform(1e-3, 1.0, n_pairs)
    w = rng.uniform(0.5, 2.0, n_pairs)
    pts = rng.uniform(-1, 1, (n_points, 2))
    vals = rng.normal(size=(n_points, 2))
    wts = rng.uniform(0, 1, n_points)
    return (du, theta, r, w), (pts, vals, wts)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pairs", type=int, default=1_000_000)
    ap.add_argument("--points", type=int, default=3000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    pair_args, grid_args = _inputs(args.pairs, args.points)
    p, e = 2.0, 2.8
    cases = [
        ("pair_values", lambda: kernels.pair_values_numpy(*pair_args, p, e, True),
         lambda: kernels.pair_values_numba(*pair_args, p, e, True)),
        ("pair_columns", lambda: kernels.pair_columns_numpy(pair_args[0], pair_args[1], pair_args[2], p, e),
         lambda: kernels.pair_columns_numba(pair_args[0], pair_args[1], pair_args[2], p, e)),
        ("grid_pair_sum", lambda: kernels.grid_pair_sum_numpy(*grid_args, p, e, True),
         lambda: kernels.grid_pair_sum_numba(*grid_args, p, e, True)),
    ]
    print(f"{'kernel':15s} {'numpy [s]':>10s} {'numba [s]':>10s} {'speedup':>8s} {'max rel diff':>13s}")
    for name, ref, fast in cases:
        a = ref()
        t_ref = min(timeit.repeat(ref, number=1, repeat=args.repeat))
        if not HAS_NUMBA:
            print(f"{name:15s} {t_ref:10.4f} {'n/a':>10s}")
            continue
        b = fast()
        t_fast = min(timeit.repeat(fast, number=1, repeat=args.repeat))
        diff = float(np.max(np.abs(np.asarray(a) - np.asarray(b)) / np.maximum(np.abs(a), 1e-300)))
        print(f"{name:15s} {t_ref:10.4f} {t_fast:10.4f} {t_ref / t_fast:8.1f} {diff:13.2e}")


if __name__ == "__main__":
    main()
