"""Weak scaling on the L-shaped elasticity case (Taylor-Hood P3/P2), one- and two-level."""
import sys

from ddlab.harness.cli import main

if __name__ == "__main__":
    sys.exit(main([
        "run", "--case", "l_shape_elasticity", "--scheme", "th", "--degree", "3",
        "--schedule", "10:4, 14:8, 20:16",
        "--precond", "ORAS,SORAS,MRAS-ndtns,SMRAS-ndtns,MRAS-tdnns,SMRAS-tdnns",
        "--coarse", "0,3,5", "--out", "results/l_shape", *sys.argv[1:],
    ]))
