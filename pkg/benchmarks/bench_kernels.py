"""Time the compiled and numpy kernel backends on identical inputs.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from stopbench.kernels import available_backends, get_backend

CASES = [
    # (kernel, m, n)
    ("hypervolume", 2, 100),
    ("hypervolume", 3, 50),
    ("hypervolume", 4, 30),
    ("hypervolume", 5, 20),
    ("nondominated_sort", 2, 200),
    ("nondominated_sort", 4, 200),
    ("crowding_distance", 3, 200),
]


def _front(rng, m, n):
    # points near the unit sphere: mostly mutually non-dominated
    P = np.abs(rng.normal(size=(n, m)))
    P /= np.linalg.norm(P, axis=1, keepdims=True)
    return P + rng.uniform(0, 0.05, size=P.shape)


def _call(mod, kernel, P):
    if kernel == "hypervolume":
        return lambda: mod.hypervolume(P, np.full(P.shape[1], 1.2))
    return lambda: getattr(mod, kernel)(P)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    names = available_backends()
    mods = {n: get_backend(n) for n in names}
    rng = np.random.default_rng(12345)
    print(f"{'kernel':<20}{'m':>3}{'n':>5}" + "".join(f"{n + ' ms':>14}" for n in names)
          + ("   speedup" if len(names) > 1 else ""))
    for kernel, m, n in CASES:
        P = _front(rng, m, n)
        times = {}
        for name, mod in mods.items():
            fn = _call(mod, kernel, P)
            number = max(1, int(0.2 / max(timeit.timeit(fn, number=1), 1e-6)))
            best = min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number
            times[name] = best * 1e3
        line = f"{kernel:<20}{m:>3}{n:>5}" + "".join(f"{times[k]:>14.3f}" for k in names)
        if len(names) > 1:
            line += f"{times['python'] / times['cython']:>10.1f}x"
        print(line)


if __name__ == "__main__":
    main()
