"""Pilot for the Lifshits window constant b.

Draws top eigenvalue arguments once per L and reports p_hat for a range of b,
which is how the default b=16 was chosen.

    python3 scripts/lifshitz_pilot.py --samples 10000 --workers 8
"""

import argparse
import time

import numpy as np

from unitary_anderson.model import ModelParams, PhaseDistribution
from unitary_anderson.spectral import top_args


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--t", type=float, default=0.5)
    ap.add_argument("--hi", type=float, default=2.0, help="phases uniform on [0, hi]")
    ap.add_argument("--Ls", type=int, nargs="+", default=[2, 4, 6, 8])
    ap.add_argument("--bs", type=float, nargs="+", default=[1, 2, 4, 8, 16, 32])
    ap.add_argument("--samples", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    p = ModelParams(args.t)
    dist = PhaseDistribution.uniform(0, args.hi)
    t0 = time.time()
    tops = {L: top_args(p, dist, L, args.samples, args.seed, args.workers) for L in args.Ls}
    print(f"# {args.samples} samples per L in {time.time() - t0:.1f}s")
    print("b," + ",".join(f"L={L}" for L in args.Ls))
    for b in args.bs:
        ph = [np.mean(np.abs(np.exp(1j * tops[L]) - np.exp(1j * p.edge)) <= b / L**2) for L in args.Ls]
        print(f"{b:g}," + ",".join(f"{x:.4f}" for x in ph))


if __name__ == "__main__":
    main()
