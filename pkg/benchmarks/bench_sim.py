"""Benchmark: compiled Euler-Maruyama kernel vs the numpy fallback.

Runs the certified 2-d saddle-point strategy over a grid of path counts
and prints wall times and the speedup ratio.  Usage:

    python benchmarks/bench_sim.py [--paths 2000] [--dt 1e-3] [--horizon 20]
"""

import argparse
import dataclasses
import pathlib
import sys
import time

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from mflq import equilibrium, riccati, simulate  # noqa: E402
from mflq.cli import load_problem  # noqa: E402
from mflq.model import zero_sum_reduce  # noqa: E402

FIXTURE = pathlib.Path(__file__).resolve().parent.parent / "fixtures" / "ex5_5.json"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--paths", type=int, default=2000)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--horizon", type=float, default=20.0)
    args = ap.parse_args()

    spec, _ = load_problem(str(FIXTURE))
    zs = zero_sum_reduce(spec)
    sol = riccati.solve_zerosum_are(zs)
    strat = equilibrium.synthesize_strategy(sol, zs)
    base = simulate.SimOptions(T=args.horizon, dt=args.dt, paths=args.paths, seed=42)

    if not simulate.USING_COMPILED_KERNEL:
        print("compiled kernel not built; benchmarking the numpy path only")

    results = {}
    for kernel in ("numpy", "compiled") if simulate.USING_COMPILED_KERNEL else ("numpy",):
        opts = dataclasses.replace(base, kernel=kernel)
        t0 = time.perf_counter()
        ens = simulate.simulate_closed_loop(zs, strat, [1.0, 1.0], opts)
        dt = time.perf_counter() - t0
        est = simulate.estimate_cost(ens, zs, strat, 1)
        results[kernel] = (dt, est.mean)
        steps = int(round(args.horizon / args.dt))
        rate = args.paths * steps / dt / 1e6
        print(f"{kernel:>8}: {dt:7.2f} s   ({rate:6.1f} M path-steps/s)   J = {est.mean:.5f}")

    if len(results) == 2:
        t_np, m_np = results["numpy"]
        t_cy, m_cy = results["compiled"]
        print(f"speedup: {t_np / t_cy:.2f}x   |mean diff| = {abs(m_np - m_cy):.3e}")


if __name__ == "__main__":
    main()
