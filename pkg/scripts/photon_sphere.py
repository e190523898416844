"""Integrate the Schwarzschild photon-sphere orbit and report radius and null drift per period.

    python scripts/photon_sphere.py --periods 10 --mass 1.0 --out photon_sphere.csv
"""

import argparse
import csv

import numpy as np

from microloc import flow
from microloc.geometry import MetricSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--periods", type=int, default=10)
    ap.add_argument("--mass", type=float, default=1.0)
    ap.add_argument("--samples-per-period", type=int, default=200)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    spec = MetricSpec.schwarzschild(args.mass)
    start = flow.photon_sphere_start(spec)
    period = flow.angular_period(spec, start)
    n = args.periods * args.samples_per_period + 1
    strip = flow.integrate_bicharacteristic(spec, start, (0.0, args.periods * period), n)
    scale = float(start.xi @ start.xi)
    q = np.array([flow.hamiltonian_value(spec, x, xi) for x, xi in zip(strip.xs, strip.xis)])
    print(f"angular period {period:.12g}, {args.periods} periods")
    for p in range(args.periods):
        sl = slice(p * args.samples_per_period, (p + 1) * args.samples_per_period + 1)
        print(f"period {p + 1:>3}: max |r-3M|/M = {np.max(np.abs(strip.xs[sl, 1] - 3 * args.mass)) / args.mass:.3e}"
              f"  max |q|/|xi0|^2 = {np.max(np.abs(q[sl])) / scale:.3e}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tau", "r", "phi", "q"])
            for t, x, qq in zip(strip.taus, strip.xs, q):
                w.writerow([format(v, ".16e") for v in (t, x[1], x[3], qq)])


if __name__ == "__main__":
    main()
