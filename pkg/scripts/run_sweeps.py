#!/usr/bin/env python3
"""Iteration-ratio sweeps against the predicted inflation laws.

Top-k and spherical compression sweep the contraction parameter alpha
(1/(1-X) overlay); plain and wrapped randomized sparse dithering sweep
the variance omega (1+X overlay).  Outputs land under out/sweeps/.
"""

import sys

from gradcodec.cli import main

SWEEPS = [
    ("topk", "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9", "synth:ridge:d=50,n=200,seed=7"),
    ("rsd", "0.05,0.1,0.25,0.5,1.0", "synth:ridge:d=50,n=200,seed=7"),
    ("rsd-wrapped", "0.05,0.1,0.25,0.5,1.0", "synth:ridge:d=50,n=200,seed=7"),
    ("sc", "0.1,0.3,0.5,0.7,0.9", "synth:ridge:d=10,n=80,seed=7"),
    ("dsd", "0.05,0.1,0.25,0.5", "synth:ridge:d=50,n=200,seed=7"),
]


def run():
    rc = 0
    for family, grid, dataset in SWEEPS:
        rc |= main([
            "sweep", "--family", family, "--grid", grid,
            "--dataset", dataset, "--out", "out/sweeps",
        ])
    return rc


if __name__ == "__main__":
    sys.exit(run())
