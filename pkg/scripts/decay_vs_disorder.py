"""Fitted fractional-moment decay rate as a function of t.

Smaller t means stronger disorder and should give faster decay.

    python3 scripts/decay_vs_disorder.py --ts 0.2 0.5 0.8 --samples 2000
"""

import argparse

import numpy as np

from unitary_anderson.model import ModelParams, PhaseDistribution
from unitary_anderson.moments import decay_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ts", type=float, nargs="+", default=[0.2, 0.5, 0.8])
    ap.add_argument("--d", type=int, default=1)
    ap.add_argument("--s", type=float, default=0.1)
    ap.add_argument("--z-abs", type=float, default=1.001)
    ap.add_argument("--z-arg", type=float, default=0.4)
    ap.add_argument("--max-dist", type=int, default=40)
    ap.add_argument("--samples", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    z = args.z_abs * np.exp(1j * args.z_arg)
    dists = np.arange(4, args.max_dist + 1, 4) if args.d == 1 else np.arange(1, args.max_dist + 1)
    print("t,rate,rate_stderr,r_squared,points")
    for t in args.ts:
        prof = decay_experiment(ModelParams(t, args.d), PhaseDistribution.uniform(), args.d, z, args.s, dists,
                                args.samples, args.seed, args.workers)
        f = prof.fit
        print(f"{t},{f.rate:.5f},{f.rate_stderr:.5f},{f.r_squared:.5f},{f.n_points}")


if __name__ == "__main__":
    main()
