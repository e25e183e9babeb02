"""Time the numba and pure-numpy kernel paths on representative workloads.

    python benchmarks/bench_kernels.py [--repeat 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np
from scipy.special import gammaln

from squeezedjc import kernels
from squeezedjc._accel import NUMBA_AVAILABLE


def _best(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def workloads():
    sign, logm = kernels.poly_log_table_nb(25.0, 0, 511, 300)
    l = np.arange(301)
    r = 0.9
    lw = 0.5 * np.log(1 / np.cosh(r)) + 0.5 * gammaln(2 * l + 1.0) - l * np.log(2.0) - gammaln(l + 1.0) + l * np.log(np.tanh(r))
    w = np.exp(-25.0 + np.arange(200) * np.log(25.0) - gammaln(np.arange(200) + 1.0))
    om = 2 * np.sqrt(np.arange(200.0))
    kap = (om > 0).astype(float)
    t = np.linspace(0, 30, 3001)
    n = 256
    c1 = np.zeros(n, complex)
    c1[:40] = 1 / np.sqrt(40)
    steps = np.full(100, 10, np.int64)
    hs = np.full(100, 1e-3)
    coeffs = (0.0, 0j, -1.2j, -0.5j)
    return {
        "poly_log_table (512 x 301, x=25)": lambda k: k.poly_log_table(25.0, 0, 511, 300),
        "row_series_sums (512 x 301)": lambda k: k.row_series_sums(sign, logm, lw, np.pi, 1e-12, 1e-30, 1e-40, 1e-300),
        "ground_population (200 terms x 3001 times)": lambda k: k.ground_population(w, om, kap, t),
        "rk4_propagate (N=256, 1000 steps)": lambda k: k.rk4_propagate(c1.copy(), np.zeros(n, complex), *coeffs, steps, hs, 230),
    }


class _Path:
    def __init__(self, suffix: str):
        for name in ("poly_log_table", "row_series_sums", "ground_population", "rk4_propagate"):
            setattr(self, name, getattr(kernels, f"{name}_{suffix}"))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not NUMBA_AVAILABLE:
        raise SystemExit("numba is not installed; nothing to compare")
    nb, npy = _Path("nb"), _Path("np")
    print(f"{'kernel':<46}{'numba [s]':>12}{'numpy [s]':>12}{'speed-up':>10}")
    for name, fn in workloads().items():
        fn(nb)  # compile or load from cache
        t_nb = _best(lambda: fn(nb), args.repeat)
        t_np = _best(lambda: fn(npy), args.repeat)
        print(f"{name:<46}{t_nb:>12.4f}{t_np:>12.4f}{t_np / t_nb:>10.1f}")


if __name__ == "__main__":
    main()
