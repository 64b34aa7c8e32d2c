"""Time the compiled and pure-Python kernels on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--seed 0]

Prints one line per (kernel, backend) with the best wall time and the
speedup of the compiled backend. Also checks that both backends agree.
"""

import argparse
import time

import numpy as np

from adsignal import kernels
from adsignal.core import revenue_weights
from adsignal.single_minded import _grid, count_factors


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def revenue_case(rng):
    W = rng.random((200_000, 8))
    r = revenue_weights(np.sort(rng.random(3))[::-1])
    return W, r


def dp_case(rng, d=10, c=256):
    deltas = rng.uniform(0.05, 1, d)
    y = -rng.uniform(0, 5, d)
    b = -(y - y.max()) / deltas
    sizes = rng.integers(1, 4, d)
    F = count_factors(np.sort(rng.random(3))[::-1])
    jcap = min(int(sizes.sum()), F.size - 1)
    return _grid(deltas, c), deltas, b, sizes, F[:jcap + 1], c, jcap


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    impls = kernels.backends()
    print(f"backends available: {', '.join(sorted(impls))} (selected: {kernels.BACKEND})")

    W, r = revenue_case(rng)
    dp_args = dp_case(rng)
    results = {}
    for name, impl in sorted(impls.items()):
        rev = impl.batch_revenue(W, r)
        vals, _ = kernels.dp_best_values(*dp_args, impl=impl)
        results[name] = (rev, vals)
        t_rev = best_time(lambda: impl.batch_revenue(W, r), args.repeat)
        t_dp = best_time(lambda: kernels.dp_best_values(*dp_args, impl=impl), args.repeat)
        results[name] += (t_rev, t_dp)
        print(f"{name:>7}  batch_revenue {W.shape[0]}x{W.shape[1]}: {t_rev * 1e3:9.2f} ms   "
              f"dp d={dp_args[1].size} c={dp_args[5]} ({dp_args[0].size} values): {t_dp * 1e3:9.2f} ms")

    if len(results) == 2:
        py, cy = results["python"], results["cython"]
        assert np.allclose(py[0], cy[0], atol=1e-12)
        fin = np.isfinite(py[1])
        assert np.array_equal(fin, np.isfinite(cy[1])) and np.allclose(py[1][fin], cy[1][fin], atol=1e-12)
        print(f"speedup  batch_revenue x{py[2] / cy[2]:.1f}   dp x{py[3] / cy[3]:.1f}   (outputs agree)")


if __name__ == "__main__":
    main()
