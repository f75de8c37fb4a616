"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--steps 100000] [--repeat 3]

Also checks that both backends return bitwise-identical arrays.
"""
import argparse
import timeit

import numpy as np

from queuesde import _kernels_py

try:
    from queuesde import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def _inputs(n, seed=0):
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal(n)
    dwh = rng.standard_normal(n) * 0.13 ** 0.7
    phi = 15 + 12 * np.sin(np.arange(n) * 2 * np.pi / 720)
    return xi, dwh, phi


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=100_000)
    ap.add_argument("--hosking-n", type=int, default=1024)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _kernels_c is None:
        print("compiled extension not built; only the Python backend is available")
    xi, dwh, phi = _inputs(args.steps)
    z = xi[: args.hosking_n].copy()
    h = 120 / 900
    cases = {
        "euler_vol": lambda m: m.euler_vol(0.1, 0.1, 0.2, 0.05, h, xi, False),
        "euler_queue": lambda m: m.euler_queue(15.0, 0.3, phi, np.full(args.steps, 0.2), dwh, h),
        "hosking_fgn": lambda m: m.hosking_fgn(0.7, z),
    }
    print(f"{'kernel':<12} {'python s':>10} {'compiled s':>11} {'speedup':>8}  identical")
    for name, call in cases.items():
        t_py = min(timeit.repeat(lambda: call(_kernels_py), number=1, repeat=args.repeat))
        if _kernels_c is None:
            print(f"{name:<12} {t_py:10.4f} {'-':>11} {'-':>8}  -")
            continue
        t_c = min(timeit.repeat(lambda: call(_kernels_c), number=1, repeat=args.repeat))
        a, b = call(_kernels_py), call(_kernels_c)
        a = a[0] if isinstance(a, tuple) else a
        b = b[0] if isinstance(b, tuple) else b
        same = np.array_equal(a, b, equal_nan=True)
        print(f"{name:<12} {t_py:10.4f} {t_c:11.5f} {t_py / t_c:7.0f}x  {same}")


if __name__ == "__main__":
    main()
