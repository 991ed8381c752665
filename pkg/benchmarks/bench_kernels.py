"""Compare the compiled kernels with the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints the best-of-N time per call for each kernel and matrix size, and the
speedup of the compiled backend. Both backends must return identical results.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from tracklet_reid import _pykernels

try:
    from tracklet_reid import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def _boxes(rng, n):
    return np.column_stack([rng.uniform(0, 900, (n, 2)), rng.uniform(10, 150, (n, 2))])


def cases(rng):
    for n in (8, 32, 128):
        cost = np.ascontiguousarray(rng.uniform(0, 1, (n, n)))
        yield "solve_square", n, (cost,)
    for n in (8, 32, 128):
        yield "iou_matrix", n, (_boxes(rng, n), _boxes(rng, n))


def best_time(fn, args, repeat):
    number = 1
    while timeit.timeit(lambda: fn(*args), number=number) < 0.05:
        number *= 2
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels not available; build with `pip install -e . --no-build-isolation`")
        return 1
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<14}{'n':>5}{'python (us)':>14}{'cython (us)':>14}{'speedup':>10}")
    for name, n, inputs in cases(rng):
        py, cy = getattr(_pykernels, name), getattr(_ckernels, name)
        if not np.array_equal(np.asarray(py(*inputs)), np.asarray(cy(*inputs))):
            raise SystemExit(f"{name} n={n}: backends disagree")
        t_py = best_time(py, inputs, args.repeat)
        t_cy = best_time(cy, inputs, args.repeat)
        print(f"{name:<14}{n:>5}{t_py * 1e6:>14.1f}{t_cy * 1e6:>14.1f}{t_py / t_cy:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
