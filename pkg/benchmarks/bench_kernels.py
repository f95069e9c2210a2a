"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--n 4096]

Each kernel is called once to trigger compilation, then timed as the best of
``--repeat`` runs. Outputs are checked for equality before timing.
"""

import argparse
import time

import numpy as np

from rmap.kernels import numba_kernels, numpy_kernels


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(n, rng):
    pts = rng.normal(size=(n, 3))
    query = rng.normal(size=(n // 4, 3))
    ends = rng.uniform(-5, 5, size=(n // 4, 3))
    origin = np.array([0.07, -0.03, 0.11])
    rot = np.eye(3)
    return {
        "nearest_neighbor": lambda k: k.nearest_neighbor(query, pts),
        "knn(k=16)": lambda k: k.knn(query, pts, 16),
        "farthest_point_sampling": lambda k: k.farthest_point_sampling(pts, n // 8, 0),
        "traverse_rays": lambda k: k.traverse_rays(origin, ends, 0.15),
        "frustum_keys": lambda k: k.frustum_keys(origin, rot, 0.15, 90.0, 22.5, 6.0),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=4096, help="reference cloud size")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if numba_kernels is None:
        raise SystemExit("numba path unavailable (not installed or RMAP_DISABLE_NUMBA set)")

    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<26}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}  match")
    for name, call in cases(args.n, rng).items():
        ref = call(numpy_kernels)
        out = call(numba_kernels)  # compiles
        t_np = best_of(lambda: call(numpy_kernels), args.repeat)
        t_nb = best_of(lambda: call(numba_kernels), args.repeat)
        print(f"{name:<26}{t_np * 1e3:>12.2f}{t_nb * 1e3:>12.2f}{t_np / t_nb:>9.1f}x  {same(ref, out)}")


if __name__ == "__main__":
    main()
