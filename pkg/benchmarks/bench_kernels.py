"""Compare the compiled and pure-Python kernel backends.

Run with ``python3 benchmarks/bench_kernels.py``. Prints the best-of-N wall
time per workload for each backend and the speedup, and checks that both
backends give the same numbers.
"""

import argparse
import time

import numpy as np

from bilevel_mi import kernels, scalar, solver


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def workloads(backend):
    rng = np.random.default_rng(0)
    v = rng.normal(0.0, 20.0, 100_000)
    spec = solver.BiLevelSpec(1 / 6, 3.0, 1.0, 50.0, 0.1)
    state = solver.FixedPointState(0.013, 1.37, 103.9, 5.3e-4, 104.0, 0.031)
    outer, sd, mu_scale, tau = solver.tail_rule(spec, state)
    gh = scalar._GH64

    def prox():
        return backend.prox_logistic_array(50.0, 1.0, v)

    def moments():
        return backend.tail_moments(outer.nodes, outer.weights, sd, mu_scale, tau,
                                    state.gamma, gh.nodes, gh.weights, *scalar._LOGISTIC)

    def solve():
        saved = kernels.tail_moments, kernels.prox_logistic_array
        kernels.tail_moments = backend.tail_moments
        kernels.prox_logistic_array = backend.prox_logistic_array
        try:
            return solver.solve(spec).state.as_array()
        finally:
            kernels.tail_moments, kernels.prox_logistic_array = saved

    return {"prox 1e5 points": prox, "tail moments": moments, "full solve": solve}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    py = kernels.get_backend("python")
    try:
        cy = kernels.get_backend("cython")
    except ImportError:
        print("compiled backend not built; only the Python fallback is available")
        cy = None
    print(f"{'workload':<18}{'python [s]':>12}{'cython [s]':>12}{'speedup':>10}{'max diff':>12}")
    for name, fn in workloads(py).items():
        t_py = best_of(fn, args.repeat)
        if cy is None:
            print(f"{name:<18}{t_py:>12.4f}")
            continue
        fast = workloads(cy)[name]
        t_cy = best_of(fast, args.repeat)
        diff = np.max(np.abs(np.asarray(fn()) - np.asarray(fast())))
        print(f"{name:<18}{t_py:>12.4f}{t_cy:>12.4f}{t_py / t_cy:>10.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
