"""Benchmark the numba transport kernel against the pure-Python fallback.

The fallback executes the very same function body uncompiled, so this
measures the JIT speedup in isolation and inside a full bootstrap-debias
run of the Wasserstein benchmark family.

Run:
    python benchmarks/bench_kernels.py

Setting DEBIAS_NUMBA=0 before importing debias selects the fallback for the
whole package; here both variants are timed in one process.
"""

import time

import numpy as np

from debias import _kernels
from debias.core import BootstrapPlan, shift_debias
from debias.problems import generate_instance
from debias.resampling import RandomStream
from debias.transport import TransportProblem, solve_transport, squared_distance_cost

# repeats shrink with size: the uncompiled path is minutes-slow at n >= 100
SIZE_REPEATS = ((10, 50), (30, 20), (60, 5), (100, 2))


def make_problem(rng, n):
    x = rng.normal(size=(n, 3))
    y = rng.normal(size=(n, 3))
    return squared_distance_cost(x, y), np.full(n, 1.0 / n), np.full(n, 1.0 / n)


def time_kernel(kernel, instances):
    t0 = time.perf_counter()
    checksum = 0.0
    for cost, supply, demand in instances:
        flow, _, _, status, _ = kernel(cost, supply.copy(), demand.copy(), 1e-11)
        assert status == 0
        checksum += float(np.sum(flow * cost))
    return time.perf_counter() - t0, checksum


def bench_kernel_direct():
    print(f"{'size':>6} {'numba':>12} {'python':>12} {'speedup':>9}")
    rng = np.random.default_rng(0)
    for n, repeats in SIZE_REPEATS:
        instances = [make_problem(rng, n) for _ in range(repeats)]
        cost, supply, demand = instances[0]
        _kernels.transport_simplex(cost, supply.copy(), demand.copy(), 1e-11)  # warm the JIT
        t_jit, c1 = time_kernel(_kernels.transport_simplex, instances)
        t_py, c2 = time_kernel(_kernels.transport_simplex_nojit, instances)
        assert abs(c1 - c2) < 1e-9 * max(1.0, abs(c1))
        print(f"{n:>6} {t_jit / repeats * 1e3:>10.2f}ms {t_py / repeats * 1e3:>10.2f}ms "
              f"{t_py / t_jit:>8.1f}x")


def bench_end_to_end():
    """One shift-debias estimate of a squared Wasserstein distance: K + 1
    transport solves per call."""
    inst = generate_instance("P7", {"d": 3}, RandomStream(1))
    plan = BootstrapPlan(rounds=40)

    def run():
        obs = inst.sample_observations(25, RandomStream(2))
        return shift_debias(inst.objective, obs, plan, RandomStream(3)).debiased_value

    original = _kernels.transport_simplex
    run()  # warm
    t0 = time.perf_counter()
    v1 = run()
    t_jit = time.perf_counter() - t0
    _kernels.transport_simplex = _kernels.transport_simplex_nojit
    try:
        t0 = time.perf_counter()
        v2 = run()
        t_py = time.perf_counter() - t0
    finally:
        _kernels.transport_simplex = original
    assert v1 == v2
    print(f"\nshift debias of W2^2 (n=25, K=40): numba {t_jit * 1e3:.0f}ms, "
          f"python {t_py * 1e3:.0f}ms, speedup {t_py / t_jit:.1f}x")


if __name__ == "__main__":
    print(f"numba enabled: {_kernels.NUMBA_ENABLED}")
    bench_kernel_direct()
    bench_end_to_end()
