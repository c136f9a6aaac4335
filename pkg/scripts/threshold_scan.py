#!/usr/bin/env python3
"""Scan k across the threshold k_f = 2: blow-up verdicts from (0.8, 0, 0, 0) and periodic shooting."""

import argparse
import logging

import numpy as np

from shb import FORWARD, Problem, StopPolicy, detect_blowup
from shb.errors import BracketingFailed
from shb.shooting import find_periodic

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k", type=float, nargs="+", default=list(np.round(np.linspace(0.5, 4.0, 8), 3)))
    ap.add_argument("--s-max", type=float, default=40.0)
    args = ap.parse_args()
    logging.basicConfig(level=logging.ERROR)
    print(f"{'k':>6} {'regime':>10} {'verdict':>20} {'R_upper':>12} {'a*':>14} {'period':>10}")
    for k in args.k:
        prob = Problem.prototype(k)
        rep = detect_blowup(prob, (0.8, 0.0, 0.0, 0.0), FORWARD, stop=StopPolicy(s_max=args.s_max))
        try:
            sol = find_periodic(prob)
            a_star, period = f"{sol.a_star:.10g}", f"{sol.period:.6g}"
        except BracketingFailed:
            a_star, period = "none", "-"
        print(f"{k:6.3g} {prob.regime:>10} {rep.verdict:>20} {rep.R_upper:12.6g} {a_star:>14} {period:>10}")
