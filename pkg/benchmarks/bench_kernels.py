"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N] [--scenario NAME ...]

Each row is the best of N wall-clock runs for one workload. Both backends
must give the same answer, which is checked before timing starts.
"""

import argparse
import time

import numpy as np

from loanmix import kernels
from loanmix.equilibrium import PR, solve_fixed_point
from loanmix.oracle import OracleConfig, grid_search_share, uniforms
from loanmix.scenario import load_scenario


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def workloads(name):
    sc = load_scenario(name)
    eq = solve_fixed_point(PR, sc.params, sc.solver)
    ctx = eq.context()
    ys = sc.params.signal_grid.values[::40]
    grid = OracleConfig(grid_points=10_001)
    return {
        f"{name}: equilibrium": lambda: solve_fixed_point(PR, sc.params, sc.solver,
                                                          cutoffs=False).abar,
        f"{name}: grid search x{len(ys)}": lambda: [grid_search_share(y, ctx, grid) for y in ys],
    }


def run(backend, jobs, repeat):
    kernels.use(backend)
    out = {}
    for label, fn in jobs.items():
        out[label] = (fn(), best_of(fn, repeat))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--scenario", nargs="*", default=["crra", "cara", "quadratic"])
    args = ap.parse_args(argv)

    jobs = {}
    for name in args.scenario:
        jobs.update(workloads(name))
    jobs["uniforms 1e6"] = lambda: uniforms(7, 0, 10**6, 1)[-1]

    backends = kernels.available()
    results = {b: run(b, jobs, args.repeat) for b in backends}
    if len(backends) == 1:
        print("compiled extension not built; timing the fallback only")

    print(f"{'workload':<34}" + "".join(f"{b:>12}" for b in backends)
          + ("     speedup" if len(backends) == 2 else ""))
    for label in jobs:
        row = f"{label:<34}" + "".join(f"{results[b][label][1]:>11.4f}s" for b in backends)
        if len(backends) == 2:
            a, b = results["cython"][label], results["python"][label]
            if not np.allclose(np.asarray(a[0], float), np.asarray(b[0], float),
                               rtol=0, atol=1e-10):
                raise SystemExit(f"backends disagree on {label}")
            row += f"{b[1] / a[1]:>11.1f}x"
        print(row)
    kernels.use(backends[0])


if __name__ == "__main__":
    main()
