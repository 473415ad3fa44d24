#!/usr/bin/env python3
"""Error-versus-bytes benchmark on the synthetic desk-scale problems.

Writes one trace CSV per operator plus a combined SVG under out/bench/.
Pass a LIBSVM path (and --loss) to run on a real dataset instead.
"""

import sys

from gradcodec.cli import main

DEFAULTS = {
    "ridge": "synth:ridge:d=50,n=200,seed=7",
    "logistic": "synth:logistic:d=50,n=200,seed=7",
}


def run(argv):
    dataset = argv[1] if len(argv) > 1 else None
    rc = 0
    if dataset:
        loss = argv[2] if len(argv) > 2 else "ridge"
        rc |= main([
            "bench", "--dataset", dataset, "--loss", loss, "--best-topk",
            "--out", f"out/bench/{loss}",
        ])
    else:
        for loss, spec in DEFAULTS.items():
            rc |= main([
                "bench", "--dataset", spec, "--loss", loss, "--best-topk",
                "--out", f"out/bench/{loss}",
            ])
    return rc


if __name__ == "__main__":
    sys.exit(run(sys.argv))
