#!/usr/bin/env python3
"""Generate a synthetic speckled pair and run the full detection pipeline.

Equivalent to:
    wbanet synth --size 128 --looks 4 --seed 0 -o out/data
    wbanet run --i1 out/data/i1.pgm --i2 out/data/i2.pgm \
        --gt out/data/gt.pgm -o out/run
"""

import argparse
import sys
from pathlib import Path

from wbanet.cli import main as wbanet_main


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("--looks", type=float, default=4.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epochs", type=int, default=10)
    ap.add_argument("-o", "--out", default="out")
    args = ap.parse_args()

    out = Path(args.out)
    data = out / "data"
    rc = wbanet_main(["synth", "--size", str(args.size),
                      "--looks", str(args.looks), "--seed", str(args.seed),
                      "-o", str(data)])
    if rc != 0:
        return rc
    return wbanet_main(["run", "--i1", str(data / "i1.pgm"),
                        "--i2", str(data / "i2.pgm"),
                        "--gt", str(data / "gt.pgm"),
                        "--epochs", str(args.epochs),
                        "--seed", str(args.seed), "-o", str(out / "run")])


if __name__ == "__main__":
    sys.exit(main())
