"""Weak scaling on the lid-driven cavity (hdG BDM1), one- and two-level."""
import sys

from ddlab.harness.cli import main

if __name__ == "__main__":
    sys.exit(main([
        "run", "--case", "cavity", "--scheme", "hdg", "--degree", "1",
        "--schedule", "24:4, 34:8, 48:16",
        "--precond", "ORAS,SORAS,MRAS-tvnf,SMRAS-tvnf,MRAS-nvtf,SMRAS-nvtf",
        "--coarse", "0,5", "--out", "results/cavity", *sys.argv[1:],
    ]))
