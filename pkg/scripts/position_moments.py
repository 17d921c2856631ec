"""Position moments sup_n || |X|^p U^n e_0 || for the free and the random operator.

The free walk spreads ballistically; the random one saturates.

    python3 scripts/position_moments.py --N 400 --samples 100
"""

import argparse
import warnings

import numpy as np

from unitary_anderson.model import LatticeBox, ModelParams, PhaseDistribution
from unitary_anderson.moments import TruncationWarning, plateau_ratio, position_moment_curve


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--t", type=float, default=0.3)
    ap.add_argument("--p", type=float, default=2.0)
    ap.add_argument("--N", type=int, default=400)
    ap.add_argument("--half-width", type=int, default=300)
    ap.add_argument("--samples", type=int, default=100)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    box = LatticeBox.interval(-args.half_width, args.half_width - 1)
    psi = np.zeros(box.volume)
    psi[box.index(0)] = 1.0
    p = ModelParams(args.t)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        loc, se = position_moment_curve(p, PhaseDistribution.uniform(), box, psi, args.p, args.N,
                                        args.samples, args.seed, args.workers)
        # the free walk reaches the edge quickly, so stop it earlier
        n_free = min(args.N, args.half_width // 2)
        free, _ = position_moment_curve(p, None, box, psi, args.p, n_free, 1, 0)
    print("n,random,stderr,free")
    for n in sorted(m for m in {0, 1, 5, 10, 25, 50, 100, n_free, args.N} if m <= args.N):
        f = f"{free[n]:.4g}" if n <= n_free else ""
        print(f"{n},{loc[n]:.4g},{se[n]:.2g},{f}")
    print(f"# plateau ratio: random {plateau_ratio(loc):.4f}, free {plateau_ratio(free):.3f}")


if __name__ == "__main__":
    main()
