"""Compare the numba and numpy kernels on the same workloads.

Each workload runs once per backend to warm up (numba compiles on first use
or loads its cache), then ``--repeat`` timed runs. The largest absolute
difference between the two backends' outputs is printed as well; the random
streams are bitwise shared, so it reflects floating-point rounding only.

    python3 benchmarks/bench_backends.py --paths 2000 --steps 1000
"""
import argparse
import time

import numpy as np

from sysrisk.core_model import IdealBankPath, ModelParams, Schedule
from sysrisk.lq_control import ControlWeights, CooperationRates, rates_from_riccati, solve_riccati
from sysrisk.pseudo_mf import simulate_pmf
from sysrisk.sde_engine import simulate


def workloads(n_paths, n_steps):
    c = Schedule.constant
    dt = 1.0 / n_steps
    params = ModelParams(10, 0.1, 0.1, c(0.8), c(0.6), c(0.5, kind="correlation"),
                         c(0.0, kind="correlation"), 0.1, 0.06)
    rates = CooperationRates.constant(10.0, 10.0, 0.0, 1.0)
    ideal = IdealBankPath.constant(0.1, 0.06, 0.0, 1.0)
    w = ControlWeights.uniform(0.1)
    pmf_rates = rates_from_riccati(solve_riccati(w, 0.3, 0.2, 0.3, 0.3), w, 0.3, 0.2)

    def system(backend):
        e = simulate(params, rates, ideal, 0.0, 1.0, None, n_paths, dt, 7, backend=backend)
        return e.G

    def pmf(backend):
        e = simulate_pmf(pmf_rates, 0.3, 0.2, 0.3, 0.3, None, 0.0, 1.0, n_paths, dt, 7,
                         backend=backend)
        return e.Z

    def riccati(backend):
        return solve_riccati(w, 0.3, 0.2, 0.3, 0.3, n_steps=100_000, backend=backend).a

    return {"system (N=10)": (system, n_paths * n_steps),
            "pseudo mean bank": (pmf, n_paths * n_steps),
            "riccati rk4 (1e5 steps)": (riccati, 100_000)}


def best_of(fn, backend, repeat):
    fn(backend)
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn(backend)
        times.append(time.perf_counter() - start)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--paths", type=int, default=2000)
    ap.add_argument("--steps", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    print(f"{'workload':26s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s} "
          f"{'ns/unit':>8s} {'max |diff|':>11s}")
    for name, (fn, units) in workloads(args.paths, args.steps).items():
        t_nb, out_nb = best_of(fn, "numba", args.repeat)
        t_np, out_np = best_of(fn, "numpy", args.repeat)
        diff = float(np.max(np.abs(out_nb - out_np)))
        print(f"{name:26s} {t_nb:10.4f} {t_np:10.4f} {t_np / t_nb:8.1f} "
              f"{1e9 * t_nb / units:8.1f} {diff:11.3g}")


if __name__ == "__main__":
    main()
