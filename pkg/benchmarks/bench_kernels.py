"""Compiled versus pure-Python kernel timings.

Run ``python3 benchmarks/bench_kernels.py [--repeat N]``.  Each kernel is
timed on the same fixed inputs with both backends; the table lists the
median seconds per call and the speedup.
"""
from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from cpflow import _kernels_py as pure
from cpflow import tensor3 as t3

try:
    from cpflow import _kernels as compiled
except ImportError:  # extension not built
    compiled = None


def cases(rng: np.random.Generator) -> dict:
    c = np.ascontiguousarray(t3.random_unit_det_spd(rng, 1.0))
    far = np.ascontiguousarray(np.diag([9.0, 1.0, 1.0 / 9.0]))
    l5 = np.ascontiguousarray(0.3 * rng.normal(size=5))
    nodes = np.ascontiguousarray(rng.normal(size=(9, 5)))
    gx, gw = (np.ascontiguousarray(a) for a in np.polynomial.legendre.leggauss(4))
    return {
        "eigh3": (lambda k: k.eigh3(c), 2000),
        "sym_apply(log)": (lambda k: k.sym_apply(c, 1, 0.0), 2000),
        "point_value_grad": (lambda k: k.point_value_grad(l5, c, 1.0, 1.0, 0.5, 3.0), 2000),
        "path_cost(8 segments)": (lambda k: k.path_cost(nodes, 1.0, gx, gw), 200),
        "project": (lambda k: k.project(far, 3.0, 1e-2, 1e-10, 1e3), 20),
    }


def median_time(fun, backend, calls: int, repeat: int) -> float:
    samples = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(calls):
            fun(backend)
        samples.append((time.perf_counter() - t0) / calls)
    return statistics.median(samples)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    print(f"{'kernel':24s} {'python [s]':>12s} {'compiled [s]':>13s} {'speedup':>8s}")
    for name, (fun, calls) in cases(np.random.default_rng(0)).items():
        tp = median_time(fun, pure, max(1, calls // 20), args.repeat)
        if compiled is None:
            print(f"{name:24s} {tp:12.3e} {'n/a':>13s} {'n/a':>8s}")
            continue
        tc = median_time(fun, compiled, calls, args.repeat)
        print(f"{name:24s} {tp:12.3e} {tc:13.3e} {tp / tc:8.1f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
