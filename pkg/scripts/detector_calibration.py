"""Sweep k_max * eps for the wave front detector on the built-in examples.

Prints, per setting, the number of Singular sectors for the delta, the
1/(x + i eps) and the smooth control, plus the (v, Lap v) dominance ratio.

    python scripts/detector_calibration.py --eps 2e-3 --ratios 0.05 0.1 0.2 0.4
"""

import argparse
import time

import numpy as np

from microloc.hadamard import sample_examples
from microloc.wfdetect import SINGULAR, DetectorConfig, pol_detect, wf_detect


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", type=float, default=2e-3)
    ap.add_argument("--ratios", type=float, nargs="+", default=[0.05, 0.1, 0.2, 0.4])
    ap.add_argument("--width", type=float, default=0.15)
    args = ap.parse_args()

    eps = args.eps
    line = np.arange(-1.5, 1.5 + 1e-12, eps / 8)
    samples = {name: sample_examples(name, line, eps)
               for name in ("delta", "one_over_x_plus_ieps", "smooth_gaussian", "v_delta_v")}
    print("k_max*eps  delta  1/(x+ie)  smooth  dominance  seconds")
    for ratio in args.ratios:
        k_max = ratio / eps
        cfg = DetectorConfig(width=args.width, k_min=k_max / 16, k_max=k_max)
        t0 = time.perf_counter()
        counts = [wf_detect(samples[n], cfg, [0.0]).verdicts(0.0).count(SINGULAR)
                  for n in ("delta", "one_over_x_plus_ieps", "smooth_gaussian")]
        pols = pol_detect(samples["v_delta_v"], cfg, [0.0])
        dom = min((p.dominance for p in pols), default=float("nan"))
        print(f"{ratio:9.3g}  {counts[0]:5d}  {counts[1]:8d}  {counts[2]:6d}  {dom:9.3g}  "
              f"{time.perf_counter() - t0:7.2f}")


if __name__ == "__main__":
    main()
