"""Time the numba and pure-numpy paths of the O(N^2) kernels side by side.

    python benchmarks/bench_kernels.py [--sizes 256 1024 2048] [--repeat 3]

Both paths are called directly, so the NLBURGERS_NUMBA flag does not matter
here. The first numba call (compilation or cache load) is excluded.
"""

import argparse
import timeit

import numpy as np

from nlburgers import _accel


def cases(n, rng):
    h = 0.1
    w = np.exp(-np.abs(np.arange(n) - n / 2) * h)
    a = rng.uniform(0, 1, n)
    b = a**2
    return {
        "direct_convolve": (lambda f: f(w, a, h), _accel.direct_convolve_nb, _accel.direct_convolve_np),
        "pair_form": (lambda f: f(w, a, b, h), _accel.pair_form_nb, _accel.pair_form_np),
        "i2_sum p=3": (lambda f: f(w, a, 3, h), _accel.i2_sum_nb, _accel.i2_sum_np),
        "bernoulli_rk4": (
            lambda f: f(0.3, 1.0, -1.0, 20.0, 40 * n, 1),
            _accel.bernoulli_rk4_nb,
            _accel.bernoulli_rk4_np,
        ),
    }


def best_of(call, fn, repeat):
    return min(timeit.repeat(lambda: call(fn), number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[256, 1024, 2048])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    rng = np.random.default_rng(0)
    print(f"{'kernel':18s} {'N':>6s} {'numba [s]':>11s} {'numpy [s]':>11s} {'speedup':>8s} {'max rel diff':>13s}")
    for n in args.sizes:
        for name, (call, nb, npy) in cases(n, rng).items():
            ref_nb, ref_np = call(nb), call(npy)  # warm-up, and a parity check
            x, y = np.ravel(ref_nb[0] if isinstance(ref_nb, tuple) else ref_nb), np.ravel(
                ref_np[0] if isinstance(ref_np, tuple) else ref_np
            )
            diff = float(np.max(np.abs(x - y) / np.maximum(1e-300, np.abs(y))))
            t_nb = best_of(call, nb, args.repeat)
            t_np = best_of(call, npy, args.repeat)
            print(f"{name:18s} {n:6d} {t_nb:11.5f} {t_np:11.5f} {t_np / t_nb:8.1f} {diff:13.2e}")


if __name__ == "__main__":
    main()
