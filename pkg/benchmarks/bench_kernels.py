"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from coupledtl import kernels

CASES = {
    "hard_threshold d=32 n=20000 tau=8": lambda rng: (
        kernels.hard_threshold, (rng.standard_normal((32, 20000)), 8)),
    "hard_threshold d=256 n=2000 tau=32": lambda rng: (
        kernels.hard_threshold, (rng.standard_normal((256, 2000)), 32)),
    "label_min 500 probes x 5000 columns, 1000 labels": lambda rng: (
        kernels.label_min, (rng.random((500, 5000)), rng.integers(0, 1000, 5000), 1000)),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = sorted(kernels.available_backends())
    print(f"backends: {', '.join(backends)} (default {kernels.BACKEND})")
    rng = np.random.default_rng(0)
    for name, make in CASES.items():
        fn, fargs = make(rng)
        times = {}
        for b in backends:
            fn(*fargs, backend=b)  # warm-up
            times[b] = min(timeit.repeat(lambda: fn(*fargs, backend=b), number=1, repeat=args.repeat))
        line = "  ".join(f"{b} {t * 1e3:8.2f} ms" for b, t in times.items())
        if len(times) == 2:
            line += f"  speedup x{times['python'] / times['cython']:.2f}"
        print(f"{name:50s} {line}")


if __name__ == "__main__":
    main()
