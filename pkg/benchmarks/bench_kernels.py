"""Compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--n 20000] [--repeat 3]

Both backends consume the same random stream, so the outputs are checked for
equality before timings are reported.
"""
import argparse
import time

import numpy as np

from ewens_pitman import _pykernels
from ewens_pitman.ep_sampler import geometric_schedule

try:
    from ewens_pitman import _ckernels
except ImportError:
    _ckernels = None


def _time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20000, help="trajectory length")
    ap.add_argument("--repeat", type=int, default=3, help="timing repeats (best kept)")
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--theta", type=float, default=1.0)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled kernels not built; run `python setup.py build_ext --inplace`")
        return 1
    cps = geometric_schedule(args.n)
    cases = {
        "simulate/rejection": lambda k: k.simulate(args.alpha, args.theta, args.n, cps, 5,
                                                   np.random.default_rng(1), 0)[0],
        "simulate/scan": lambda k: k.simulate(args.alpha, args.theta, args.n, cps, 5,
                                              np.random.default_rng(1), 1)[0],
        "simulate/counts": lambda k: k.simulate(args.alpha, args.theta, args.n, cps, 5,
                                                np.random.default_rng(1), 2)[0],
        "sample_counts n=6": lambda k: k.sample_counts(args.alpha, args.theta, 6, 20000,
                                                       np.random.default_rng(1), 0),
    }
    print(f"{'kernel':<22}{'cython [s]':>12}{'python [s]':>12}{'speedup':>10}  equal")
    for name, fn in cases.items():
        tc, oc = _time(lambda: fn(_ckernels), args.repeat)
        tp, op = _time(lambda: fn(_pykernels), 1)
        same = np.array_equal(oc, op)
        print(f"{name:<22}{tc:>12.4f}{tp:>12.4f}{tp / tc:>10.1f}  {same}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
