"""Compare the numba and numpy kernel backends on blob fields of growing size.

    python benchmarks/bench_backends.py [--resolutions 8 12 16] [--repeat 3]

For each core resolution, times one all-pairs velocity evaluation and one
pair-energy sum per backend (median of ``--repeat`` runs, after a warm-up call
that absorbs numba compilation) and reports the largest velocity difference.
"""

import argparse
import time

import numpy as np

from helicalvortex.biot_savart import pair_energy_sum, particle_velocities
from helicalvortex.vortex_sim import InitProfile, SimConfig, init_blob

BACKENDS = ("numba", "numpy")


def median_time(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return float(np.median(times))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--resolutions", type=int, nargs="+", default=[8, 12, 16])
    parser.add_argument("--epsilon", type=float, default=0.05)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    print(f"{'res':>4} {'N':>5} {'backend':>7} {'velocity_s':>11} {'energy_s':>10} {'max_diff':>10}")
    for res in args.resolutions:
        field = init_blob(SimConfig(epsilon=args.epsilon, profile=InitProfile(core_resolution=res)))
        vel = {b: particle_velocities(field, backend=b) for b in BACKENDS}
        diff = float(np.max(np.abs(vel["numba"] - vel["numpy"])))
        for b in BACKENDS:
            tv = median_time(lambda: particle_velocities(field, backend=b), args.repeat)
            te = median_time(lambda: pair_energy_sum(field, backend=b), args.repeat)
            print(f"{res:>4} {len(field):>5} {b:>7} {tv:>11.4f} {te:>10.4f} {diff:>10.2e}")


if __name__ == "__main__":
    main()
