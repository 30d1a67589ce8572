"""Timing of the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one line per kernel: problem size, best-of-repeat wall time for each
path and the speed-up.  Results are checked for agreement before timing.
"""

import argparse
import timeit

import numpy as np

from torusflow import _kernels as K


def _cases(rng):
    m = 64 * 64
    coords = np.stack(np.meshgrid(np.arange(64) / 64, np.arange(64) / 64, indexing="ij"), -1).reshape(m, 2)
    vals = rng.standard_normal((m, 3))
    yield ("holder_pairs", f"m={m}", (vals, coords, np.ones(2), 0.5))

    times = np.linspace(1e-4, 1e-2, 200)
    g = rng.standard_normal((200, 256, 2))
    yield ("time_holder", "nt=200 m=256", (g, times, 0.625, 0.5))

    coefs = rng.standard_normal(65) + 1j * rng.standard_normal(65)
    freqs = np.arange(-32, 33, dtype=float)
    pts = rng.uniform(0, 2 * np.pi, 4096)
    yield ("trig_eval", "k=65 x=4096", (coefs, freqs, pts))

    rc = np.fft.rfft(rng.standard_normal(256)) / 256
    yield ("real_trig_eval", "n=256 x=4096", (rc, pts))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not K.HAVE_NUMBA:
        print("numba unavailable or disabled via TORUSFLOW_DISABLE_NUMBA; nothing to compare")
        return 0
    rng = np.random.default_rng(0)
    print(f"{'kernel':<16}{'size':<16}{'numpy [s]':>12}{'numba [s]':>12}{'speed-up':>10}")
    for name, size, a in _cases(rng):
        f_np = getattr(K, f"{name}_numpy")
        f_nb = getattr(K, f"{name}_numba")
        r_np, r_nb = f_np(*a), f_nb(*a)  # also triggers compilation
        np.testing.assert_allclose(np.asarray(r_nb), np.asarray(r_np), rtol=1e-9, atol=1e-12)
        t_np = min(timeit.repeat(lambda: f_np(*a), number=1, repeat=args.repeat))
        t_nb = min(timeit.repeat(lambda: f_nb(*a), number=1, repeat=args.repeat))
        print(f"{name:<16}{size:<16}{t_np:>12.4g}{t_nb:>12.4g}{t_np / t_nb:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
