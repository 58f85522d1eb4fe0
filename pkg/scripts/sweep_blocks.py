#!/usr/bin/env python3
"""Score the pipeline for each attention-block count N and emit pcc_vs_n.csv.

Generates a synthetic pair first unless --i1/--i2/--gt are given.
"""

import argparse
import sys
from pathlib import Path

from wbanet.cli import main as wbanet_main


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--i1")
    ap.add_argument("--i2")
    ap.add_argument("--gt")
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epochs", type=int, default=10)
    ap.add_argument("--blocks-from", type=int, default=1)
    ap.add_argument("--blocks-to", type=int, default=5)
    ap.add_argument("-o", "--out", default="out/sweep")
    args = ap.parse_args()

    out = Path(args.out)
    if not (args.i1 and args.i2 and args.gt):
        data = out / "data"
        rc = wbanet_main(["synth", "--size", str(args.size),
                          "--seed", str(args.seed), "-o", str(data)])
        if rc != 0:
            return rc
        args.i1 = str(data / "i1.pgm")
        args.i2 = str(data / "i2.pgm")
        args.gt = str(data / "gt.pgm")

    return wbanet_main(["sweep-blocks", "--i1", args.i1, "--i2", args.i2,
                        "--gt", args.gt, "--epochs", str(args.epochs),
                        "--seed", str(args.seed),
                        "--blocks-from", str(args.blocks_from),
                        "--blocks-to", str(args.blocks_to), "-o", str(out)])


if __name__ == "__main__":
    sys.exit(main())
