"""Time the compiled and numpy backward-induction kernels on the same problems.

    python benchmarks/bench_kernels.py [--repeat 3]
"""
import argparse
import time

import numpy as np

from survbandit import backend, scenarios, sim, solver


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if "cython" not in backend.available():
        print("compiled backend not built; run `pip install -e . --no-build-isolation`")
        return
    cases = {
        "gambler T=3": scenarios.gambler(1, 3),
        "gambler T=200": scenarios.gambler(30, 200),
        "assistant T=200 b=100": scenarios.assistant(100, 200),
        "random10 T=50 b=50": sim.random_problem(10, 41, 4, 20, 0, initial_budget=50, horizon=50),
    }
    print(f"{'case':<24}{'cython s':>12}{'python s':>12}{'speedup':>10}  identical")
    for name, p in cases.items():
        tc, rc = _time(lambda: solver.solve(p, kernels=backend.get("cython")), args.repeat)
        tp, rp = _time(lambda: solver.solve(p, kernels=backend.get("python")), args.repeat)
        same = all(np.array_equal(getattr(rc, k), getattr(rp, k), equal_nan=True)
                   for k in ("v", "q", "surv", "wret")) and np.array_equal(rc.policy, rp.policy)
        print(f"{name:<24}{tc:>12.4f}{tp:>12.4f}{tp / tc:>10.1f}  {same}")


if __name__ == "__main__":
    main()
