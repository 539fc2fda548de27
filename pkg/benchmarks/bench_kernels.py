"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--n 200 400 1000] [--repeat 2000]

Prints microseconds per call for each kernel and backend, the speedup, and
whether the two backends returned identical arrays.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from wavestab.kernels import _pykernels

try:
    from wavestab.kernels import _ckernels
except ImportError:  # not built
    _ckernels = None


def cases(n: int, rng: np.random.Generator):
    h = 1.0 / n
    u = rng.standard_normal(n + 1)
    ut = rng.standard_normal(n + 1)
    s = rng.standard_normal(n)
    coeffs = (0.5, 1.0, 0.1, -1.0, -1.0, 0.2, False, 0.0)
    return {
        "char_step": lambda m: m.char_step(u, s, h, *coeffs),
        "leapfrog_step": lambda m: m.leapfrog_step(u, ut, 0.5 * h, h, *coeffs),
        "transport_shift": lambda m: m.transport_shift(u, 0.3),
        "transport_upwind": lambda m: m.transport_upwind(u, 0.3, 0.5),
        "exp_kernel_cumulative": lambda m: m.exp_kernel_cumulative(u, h, 1.0),
    }


def same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return bool(np.array_equal(np.asarray(a), np.asarray(b)))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--n", type=int, nargs="+", default=[200, 1000])
    ap.add_argument("--repeat", type=int, default=2000)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled kernels not built; only the numpy backend is timed")
    rng = np.random.default_rng(0)
    print(f"{'kernel':24s} {'n':>6s} {'python us':>10s} {'cython us':>10s} {'speedup':>8s}  identical")
    for n in args.n:
        for name, call in cases(n, rng).items():
            tp = timeit.timeit(lambda: call(_pykernels), number=args.repeat) / args.repeat * 1e6
            if _ckernels is None:
                print(f"{name:24s} {n:6d} {tp:10.2f}")
                continue
            tc = timeit.timeit(lambda: call(_ckernels), number=args.repeat) / args.repeat * 1e6
            ok = same(call(_pykernels), call(_ckernels))
            print(f"{name:24s} {n:6d} {tp:10.2f} {tc:10.2f} {tp / tc:8.1f}  {ok}")


if __name__ == "__main__":
    main()
