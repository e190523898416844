"""Compare generic-mode Dirac Hamilton orbits for several masses along one Schwarzschild ray."""

import argparse

import numpy as np

from microloc import flow
from microloc.geometry import MetricSpec, PhasePoint
from microloc.spin import gammas_at, slash
from microloc.symbols import dirac, null_covector, rpt_factorize


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--masses", type=float, nargs="+", default=[0.0, 0.5, 1.0, 5.0])
    ap.add_argument("--tau", type=float, default=4.0)
    args = ap.parse_args()

    spec = MetricSpec.schwarzschild(1.0)
    x = np.array([0.0, 8.0, 1.2, 0.3])
    xi = null_covector(spec, x, [0.3, 0.5, -0.2])
    strip = flow.integrate_bicharacteristic(spec, PhasePoint(x, xi), (0.0, args.tau), 41)
    w0 = slash(gammas_at(spec, x), xi) @ np.array([1.0, 0.3j, -0.2, 0.5])
    orbits = {}
    for m in args.masses:
        op = dirac(spec, m)
        ds = flow.DenckerSpec(op, rpt_factorize(op, n_samples=20), flow.TransportMode.GENERIC)
        orbits[m] = flow.hamilton_orbit(ds, strip, w0).fibres
    ref = orbits[args.masses[0]]
    for m in args.masses[1:]:
        dev = max(flow.projective_deviation(a, b) for a, b in zip(ref, orbits[m]))
        print(f"m={args.masses[0]:g} vs m={m:g}: max projective deviation {dev:.3e}")


if __name__ == "__main__":
    main()
