"""Histogram TV distance to the target for ensembles started at a point mass.

Each kind advances 20000 chains from ``(4, 4)`` on the 2-d test Gaussian.
The last column is the TV between two independent exact samples of the same
size, which is the floor a converged ensemble can reach with 32 x 32 cells.

    python demos/tv_decay.py
"""

import numpy as np

from skewmc.diagnostics import ensemble_tv_curve, histogram_tv_distance
from skewmc.verify.suites import standard_kernels

MARKS = (0, 1, 2, 5, 10, 20, 40)
N = 20_000


def main():
    rng = np.random.default_rng(0)
    kernels = standard_kernels()
    target = next(iter(kernels.values())).target
    ref = target.sample(N, rng)
    floor = histogram_tv_distance(target.sample(N, rng), ref)
    print(f"{'kind':<26}" + "".join(f"{f'k={k}':>8}" for k in MARKS) + f"{'floor':>8}")
    x0 = np.tile([4.0, 4.0], (N, 1))
    for kind, kern in kernels.items():
        curve = ensemble_tv_curve(kern, x0, MARKS, ref, rng)
        print(f"{kind:<26}" + "".join(f"{curve[k]:8.3f}" for k in MARKS) + f"{floor:8.3f}")


if __name__ == "__main__":
    main()
