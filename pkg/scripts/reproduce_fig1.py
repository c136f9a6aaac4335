#!/usr/bin/env python3
"""Overlay the solutions from (0.8, 0, 0, 0) for k=1.5 and k=3.5 and list their extremum magnitudes."""

import argparse

from shb import Problem, StopPolicy, integrate
from shb.cli import main as cli_main
from shb.ladder import extract_ladder


def extremum_table(k, s_max=40.0):
    traj = integrate(Problem.prototype(k), (0.8, 0.0, 0.0, 0.0), stop=StopPolicy(s_max=s_max))
    lad = extract_ladder(traj)
    return traj, lad


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/fig1")
    args = ap.parse_args()
    cli_main(["figure", "--out", args.out])
    for k in (1.5, 3.5):
        traj, lad = extremum_table(k)
        print(f"k={k}: stop={traj.stop_reason} at s={traj.s_end:.6f}")
        for m, w in zip(lad.m, lad.wm):
            print(f"  m={m:10.6f}  w(m)={w: .6e}")
    print(f"figure written to {args.out}/figure.svg")
