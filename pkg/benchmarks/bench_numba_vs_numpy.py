"""Benchmark the hot constrained-dynamics kernels: numba versus plain numpy.

Builds the same kernel closures twice, once compiled and once interpreted,
and times single vector-field evaluations plus a short trajectory for each
catalog system.  Run with

    python benchmarks/bench_numba_vs_numpy.py [--evals N] [--steps N]

The compiled path needs numba available and NHRCH_NUMBA unset or truthy;
otherwise only the numpy rows are printed.
"""

import argparse
import time

import numpy as np

from nhrch import accel, catalog
from nhrch.constraints import NonholonomicSystem
from nhrch.integrator import IntegrationConfig, integrate


def time_call(fn, *args, reps):
    fn(*args)  # warm (JIT compile on the numba path)
    tic = time.perf_counter()
    for _ in range(reps):
        fn(*args)
    return (time.perf_counter() - tic) / reps


def bench_system(entry, evals, steps):
    rows = []
    modes = [("numpy", False)]
    if accel.NUMBA_ENABLED:
        modes.append(("numba", True))
    z0 = entry.default_state
    for label, use_numba in modes:
        system = NonholonomicSystem(entry.spec, use_numba=use_numba)
        q, p = system.split(z0)
        per_eval = time_call(system.kernels.x_tilde, q, p, reps=evals)
        cfg = IntegrationConfig(step=1e-3, t_end=steps * 1e-3)
        tic = time.perf_counter()
        integrate(system, z0, cfg)
        traj_time = time.perf_counter() - tic
        rows.append((label, per_eval, traj_time))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--evals", type=int, default=2000,
                        help="repetitions for the single-evaluation timing")
    parser.add_argument("--steps", type=int, default=2000,
                        help="steps for the trajectory timing")
    args = parser.parse_args()

    print(f"numba available: {accel.HAVE_NUMBA}, enabled: {accel.NUMBA_ENABLED}")
    header = f"{'system':24s} {'mode':7s} {'x_tilde [us]':>14s} {'{} steps [s]':>14s}".format(args.steps)
    print(header)
    print("-" * len(header))
    for name in ("free_particle_2d", "knife_edge", "vertical_rolling_disk", "chaplygin_sleigh"):
        entry = catalog.get_entry(name)
        rows = bench_system(entry, args.evals, args.steps)
        for label, per_eval, traj_time in rows:
            print(f"{name:24s} {label:7s} {per_eval * 1e6:14.1f} {traj_time:14.3f}")
        if len(rows) == 2:
            speed_eval = rows[0][1] / rows[1][1]
            speed_traj = rows[0][2] / rows[1][2]
            print(f"{'':24s} {'ratio':7s} {speed_eval:13.1f}x {speed_traj:13.1f}x")


if __name__ == "__main__":
    main()
