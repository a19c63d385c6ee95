"""Time the numba and numpy kernels side by side.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints the best wall time per kernel and backend plus the largest absolute
difference between the two outputs.
"""
import argparse
import time

import numpy as np

from colim import kernels
from colim.sde import SimConfig, SystemParams, simulate


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def recurrence_case(d, steps, every, rng):
    M = rng.standard_normal((d, d))
    M -= (np.max(np.linalg.eigvals(M).real) + 1.0) * np.eye(d)
    h = 1e-3
    F = np.eye(d) + h * M + 0.5 * (h * M) @ (h * M)
    e = np.sqrt(h) * rng.standard_normal((steps, d))
    return F, e, np.zeros(d), every


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)

    if not hasattr(kernels, "linear_recurrence_numba"):
        print("numba unavailable (or COLIM_NUMBA=0); timing numpy only")
    print(f"{'kernel':<34}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}{'max |diff|':>13}")

    cases = []
    for d in (2, 6, 12):
        F, e, y0, every = recurrence_case(d, 1 << 15, 10, rng)
        cases.append((f"linear_recurrence d={d} L=32768",
                      lambda F=F, e=e, y0=y0: kernels.linear_recurrence_numpy(F, e, y0, every)[0],
                      lambda F=F, e=e, y0=y0: kernels.linear_recurrence_numba(F, e, y0, every)[0]))
    for n in (1, 5, 10):
        X = rng.standard_normal((100_001, n))
        lags = np.arange(4)
        cases.append((f"lagged_products n={n} N=1e5",
                      lambda X=X: kernels.lagged_products_numpy(X, lags),
                      lambda X=X: kernels.lagged_products_numba(X, lags)))

    for name, f_np, f_nb in cases:
        t_np, out_np = best_of(f_np, args.repeat)
        if hasattr(kernels, "linear_recurrence_numba"):
            f_nb()  # compile outside the timed region
            t_nb, out_nb = best_of(f_nb, args.repeat)
            diff = float(np.max(np.abs(out_np - out_nb)))
            print(f"{name:<34}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>10.1f}{diff:>13.2e}")
        else:
            print(f"{name:<34}{t_np:>12.4f}{'-':>12}{'-':>10}{'-':>13}")

    # end to end: one benchmark-sized trajectory on the active backend
    params = SystemParams(-np.eye(3), np.eye(3), 0.1)
    cfg = SimConfig(t1=1000.0, dt=1e-3, subsample_every=10, seed=1)
    simulate(params, SimConfig(t1=10.0, dt=1e-3, subsample_every=10, seed=1))
    t, _ = best_of(lambda: simulate(params, cfg), 1)
    print(f"\nsimulate colored n=3 t1=1000 on backend '{kernels.BACKEND}': {t:.3f} s")


if __name__ == "__main__":
    main()
