"""Heterogeneous steel/rubber beam: effect of the coarse size on the symmetrised methods."""
import sys

from ddlab.harness.cli import main

if __name__ == "__main__":
    sys.exit(main([
        "run", "--case", "hetero_beam", "--scheme", "th", "--degree", "2",
        "--schedule", "10:8",
        "--precond", "ORAS,SORAS,SMRAS-ndtns,SMRAS-tdnns",
        "--coarse", "0,3,7", "--out", "results/beam", *sys.argv[1:],
    ]))
