"""Time the numba and pure-numpy kernels side by side.

    python benchmarks/bench_kernels.py [--repeat 5]

Both implementations are imported directly, so the backend flag does not
matter here. The first numba call (JIT compile) is excluded.
"""
import argparse
from timeit import default_timer as timer

import numpy as np

from repeater_rate import _kernels
from repeater_rate._accel import HAVE_NUMBA


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = timer()
        fn()
        times.append(timer() - start)
    return min(times)


def cases():
    for n in (10, 100, 400):
        p = 0.431
        t_end = _kernels.tail_stop(n, p, 1e-10)
        yield (
            f"order_stat_means n={n}",
            lambda n=n, t=t_end: _kernels.order_stat_means_numba(n, p, t),
            lambda n=n, t=t_end: _kernels.order_stat_means_numpy(n, p, t),
        )
    key = _kernels.seed_key(0)
    for n in (4, 10):
        k_u, k_l = -(-(n + 3) // 2), (n + 1) // 2
        yield (
            f"simulate_sections n={n} trials=1e5",
            lambda n=n, u=k_u, l=k_l: _kernels.simulate_sections_numba(n, 0.431, 100_000, key, u, l, 0.0),
            lambda n=n, u=k_u, l=k_l: _kernels.simulate_sections_numpy(n, 0.431, 100_000, key, u, l, 0.0),
        )


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not installed; only the numpy path is timed")
    print(f"{'kernel':<36}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, fast, slow in cases():
        t_np = best_of(slow, args.repeat)
        if HAVE_NUMBA:
            fast()  # compile
            t_nb = best_of(fast, args.repeat)
            print(f"{name:<36}{t_nb * 1e3:>12.3f}{t_np * 1e3:>12.3f}{t_np / t_nb:>9.1f}x")
        else:
            print(f"{name:<36}{'-':>12}{t_np * 1e3:>12.3f}{'-':>10}")
    # sanity: same numbers from both paths
    a = _kernels.order_stat_means_numpy(50, 0.2, _kernels.tail_stop(50, 0.2, 1e-10))
    if HAVE_NUMBA:
        b = _kernels.order_stat_means_numba(50, 0.2, _kernels.tail_stop(50, 0.2, 1e-10))
        print(f"max |numba - numpy| for n=50 table: {np.max(np.abs(a - b)):.1e}")


if __name__ == "__main__":
    main()
