"""Benchmark the shared-support BCS kernels against each other.

Runs every importable kernel (pure NumPy, and the compiled extension when
built) on the same synthetic multi-station problems and reports wall time
per solve plus the speedup relative to the python kernel.  Two workload
shapes are covered:

* "spike" -- a single dominant arrival per station plus noise, the shape a
  positioning fix produces (few active atoms, many candidate columns);
* "dense" -- several comparable arrivals, which drives the active set and
  therefore the posterior-refresh cost up.

Usage:
    python3 benchmarks/bench_kernels.py [--sizes 1024,3072] [--repeats 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from uwbsim.recovery.backend import available_kernels


def _make_problem(n: int, rr: float, n_st: int, k: int, seed: int):
    """Random-projection measurements of k spikes per station.

    The returned noise level is the pooled measurement rms, matching how the
    positioning pipeline estimates it; feeding the exact noise std instead
    lets hundreds of marginal noise atoms into the active set, which is not
    a workload any caller produces.
    """
    rng = np.random.default_rng(seed)
    m = int(round(rr * n))
    support = rng.choice(n, size=k, replace=False)
    psis, ys = [], []
    for _ in range(n_st):
        phi = rng.choice([-1.0, 1.0], size=(m, n)) / np.sqrt(m)
        x = np.zeros(n)
        x[support] = rng.uniform(0.5, 1.5, size=k)
        y = phi @ x + 0.05 * rng.standard_normal(m)
        psis.append(phi)
        ys.append(y)
    grams = [p.T @ p for p in psis]
    beta = float(np.sqrt(np.mean([y @ y / y.size for y in ys])))
    return psis, ys, grams, beta


def _time_solve(kernel, psis, ys, grams, beta, repeats: int):
    best = np.inf
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = kernel.solve_shared(psis, ys, beta, grams=grams)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="1024,2048,3072",
                        help="comma-separated candidate counts N")
    parser.add_argument("--repeats", type=int, default=3,
                        help="timing repeats; the best run is reported")
    args = parser.parse_args(argv)

    kernels = available_kernels()
    sizes = [int(s) for s in args.sizes.split(",") if s]
    print(f"kernels: {', '.join(sorted(kernels))}")
    header = f"{'workload':10s} {'N':>5s} " + "".join(f"{k:>12s}" for k in sorted(kernels))
    print(header + ("     speedup" if len(kernels) > 1 else ""))

    for label, k_spikes in (("spike", 3), ("dense", 12)):
        for n in sizes:
            psis, ys, grams, beta = _make_problem(n, rr=0.25, n_st=3, k=k_spikes,
                                                  seed=1000 + n + k_spikes)
            times = {}
            actives = {}
            iters = 0
            for name in sorted(kernels):
                dt, res = _time_solve(kernels[name], psis, ys, grams, beta,
                                      args.repeats)
                times[name] = dt
                actives[name] = np.sort(res["active"])
                iters = res["iterations"]
            row = f"{label:10s} {n:5d} " + "".join(
                f"{times[k] * 1e3:10.1f}ms" for k in sorted(kernels))
            if len(kernels) > 1:
                row += f"  {times['python'] / times['compiled']:9.2f}x"
                if not np.array_equal(actives["python"], actives["compiled"]):
                    row += "  [SUPPORT MISMATCH]"
            print(row + f"   ({iters} updates)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
