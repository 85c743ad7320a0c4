"""Dump the local generalized eigenvalues used by the coarse space (L-shape, N=8)."""
import sys

from ddlab.harness.cli import main

if __name__ == "__main__":
    sys.exit(main([
        "run", "--case", "l_shape_elasticity", "--scheme", "th", "--degree", "2",
        "--schedule", "10:8", "--precond", "MRAS-ndtns,MRAS-tdnns", "--coarse", "20",
        "--dump-spectrum", "--dump-partition", "--out", "results/spectrum", *sys.argv[1:],
    ]))
