#!/usr/bin/env python3
"""Amplitude and gap exponents of the critical-point ladder for several p, against (p+1)/2 and (1-p)/4."""

import argparse

from shb import FORWARD, Problem, integrate
from shb.ladder import extract_ladder, sequence_diagnostics

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=float, nargs="+", default=[2.0, 3.0, 5.0])
    ap.add_argument("--k", type=float, default=1.5)
    args = ap.parse_args()
    for p in args.p:
        prob = Problem.prototype(args.k, p=p)
        traj = integrate(prob, (0.8, 0.0, 0.0, 0.0), FORWARD)
        rep = sequence_diagnostics(extract_ladder(traj), prob)
        gaps = "  ".join(f"{name}={fit.slope:+.4f}" for name, fit in rep.gap_exponents.items())
        print(f"p={p:g}: amp={rep.amp_exponent.slope:.4f} (expect {(p + 1) / 2:g})  "
              f"{gaps} (expect {(1 - p) / 4:+g})  rungs fitted={rep.fit_rungs}")
