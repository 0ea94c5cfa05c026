"""Compiled vs pure-Python adaptive RK kernel.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Integrates the two Carleman benchmark systems plus a stiffer random
quadratic system with both backends, checks they agree, and prints the
median wall time of each.
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from odeworkbench import _fallback
from odeworkbench.suites import carleman_benchmarks

try:
    from odeworkbench import _kernels
except ImportError:  # not built
    _kernels = None


def cases():
    for name, ode in carleman_benchmarks().items():
        yield name, ode.F0, ode.F1, ode.F2, ode.u_in, ode.T
    rng = np.random.default_rng(7)
    d = 6
    F1 = -np.diag(rng.uniform(1.0, 20.0, d)) + 0.3 * rng.standard_normal((d, d))
    F2 = 0.02 * rng.standard_normal((d, d * d))
    yield "random6", 0.01 * rng.standard_normal(d), F1, F2, 0.1 * rng.standard_normal(d), 3.0


def timed(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t0)
    return statistics.median(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--tol", type=float, default=1e-10)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not available; only the fallback can run")
    print(f"{'case':<10} {'steps':>7} {'python [s]':>11} {'compiled [s]':>13} {'speedup':>8} {'max |diff|':>11}")
    for name, F0, F1, F2, u0, T in cases():
        a = (np.asarray(F0, float), np.asarray(F1, float), np.asarray(F2, float), np.asarray(u0, float), float(T), args.tol, args.tol)
        tp, (ts, us, _, _) = timed(_fallback.integrate_quadratic, a, args.repeat)
        if _kernels is None:
            print(f"{name:<10} {len(ts):>7} {tp:>11.4f} {'-':>13} {'-':>8} {'-':>11}")
            continue
        tc, (ts2, us2, _, _) = timed(_kernels.integrate_quadratic, a, args.repeat)
        diff = float(np.max(np.abs(np.asarray(us)[-1] - np.asarray(us2)[-1])))
        print(f"{name:<10} {len(ts):>7} {tp:>11.4f} {tc:>13.5f} {tp / tc:>7.1f}x {diff:>11.2e}")


if __name__ == "__main__":
    main()
