"""Time the numba kernels against their numpy twins on lab-sized inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--segments 200]

Both implementations are imported directly, so the comparison runs in one
process regardless of FDE_LAB_NUMBA.  The first numba call (compilation) is
excluded from the timings.
"""

import argparse
import time

import numpy as np

from fdelab import _kernels as kern


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(segments, rng):
    stack = rng.uniform(-1, 1, size=(segments, 65, 17))
    w = np.exp(np.linspace(-1.0, 0.0, 65))
    theta = np.linspace(-0.5, 0.0, 257)
    fine = rng.uniform(-1, 1, size=(257, 17))
    dist = kern.pairwise_weighted_sup_numpy(stack, w)
    return {
        "weighted_sup": (lambda impl: impl(stack[0], w)),
        "pairwise_weighted_sup": (lambda impl: impl(stack, w)),
        "farthest_point": (lambda impl: impl(dist, 20)),
        "modulus": (lambda impl: impl(fine, theta, 0.02)),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--segments", type=int, default=200)
    args = ap.parse_args(argv)
    if not kern.HAVE_NUMBA:
        print("numba is not available (or FDE_LAB_NUMBA=0); only the numpy timings are shown")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<24}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for name, call in cases(args.segments, rng).items():
        t_np, ref = best_of(lambda: call(getattr(kern, name + "_numpy")), args.repeat)
        if kern.HAVE_NUMBA:
            jit = getattr(kern, name + "_numba")
            call(jit)  # compile
            t_nb, out = best_of(lambda: call(jit), args.repeat)
            pairs = zip(ref, out) if isinstance(ref, tuple) else [(ref, out)]
            same = all(np.array_equal(a, b) for a, b in pairs)
            flag = "" if same else "  MISMATCH"
            print(f"{name:<24}{1e3 * t_np:>12.3f}{1e3 * t_nb:>12.3f}{t_np / t_nb:>9.1f}x{flag}")
        else:
            print(f"{name:<24}{1e3 * t_np:>12.3f}{'-':>12}{'-':>10}")


if __name__ == "__main__":
    main()
