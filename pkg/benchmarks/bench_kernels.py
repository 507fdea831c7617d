"""Throughput comparison of the compiled event kernel vs the pure-Python fallback.

Runs the same seeded workload through both implementations of csbp_paths
(identical output is asserted, not assumed) and reports events per second.
The workload is the truncated-Pareto mechanism, whose jump decomposition
exercises every jump-sampling branch of the kernel.

Usage: python3 benchmarks/bench_kernels.py [n_paths]
"""

import sys
import time

import numpy as np

from qsdflow import _kernels_py
from qsdflow.fixtures import load_fixture
from qsdflow.mechanisms import jump_decomposition

try:
    from qsdflow import _kernels
except ImportError:
    _kernels = None

TP = load_fixture("truncated_pareto_half")


def run(mod, n_paths: int):
    deco = jump_decomposition(TP)
    masses = np.ascontiguousarray([p[0] for p in deco.parts], dtype=np.float64)
    kinds = np.ascontiguousarray([p[1] for p in deco.parts], dtype=np.int64)
    par_a = np.ascontiguousarray([p[2] for p in deco.parts], dtype=np.float64)
    par_b = np.ascontiguousarray([p[3] for p in deco.parts], dtype=np.float64)
    times = np.ascontiguousarray([1.0, 2.0, 5.0])
    states = np.empty((n_paths, 3))
    absorb = np.empty(n_paths)
    flags = np.empty(n_paths, dtype=np.int8)
    events = np.empty(n_paths, dtype=np.int64)
    start = time.perf_counter()
    mod.csbp_paths(
        1.0, deco.D, masses, kinds, par_a, par_b, times, 5.0, 1e6, 10**7,
        7, 0, n_paths, states, absorb, flags, events,
    )
    elapsed = time.perf_counter() - start
    return (states, absorb, flags, events), int(events.sum()), elapsed


def main() -> int:
    n_paths = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
    out_py, n_events, t_py = run(_kernels_py, n_paths)
    print(f"pure python : {n_paths} paths, {n_events} events, "
          f"{t_py:.3f} s, {n_events / t_py:,.0f} events/s")
    if _kernels is None:
        print("compiled    : not available (install built the fallback only)")
        return 1
    out_cy, n_events_cy, t_cy = run(_kernels, n_paths)
    print(f"compiled    : {n_paths} paths, {n_events_cy} events, "
          f"{t_cy:.3f} s, {n_events_cy / t_cy:,.0f} events/s")
    for a, b in zip(out_py, out_cy):
        assert np.array_equal(a, b, equal_nan=True), "backends disagree"
    print(f"speedup     : {t_py / t_cy:.1f}x (outputs bit-identical)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
