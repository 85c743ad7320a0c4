"""Command line: ``ddlab run --case cavity --schedule 12:4,17:8 ...``."""
from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import ConfigError, ExperimentSpec, parse_config
from .runner import emit_report, rows_csv, run_experiment, trace_csv


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ddlab", description="Weak-scaling runs of two-level Schwarz preconditioners.")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a weak-scaling experiment")
    run.add_argument("--config", help="key = value file; command-line flags override it")
    run.add_argument("--case")
    run.add_argument("--scheme", choices=["th", "hdg"])
    run.add_argument("--degree", type=int)
    run.add_argument("--schedule", help="file of 'resolution N' lines, or inline '10:4,14:8'")
    run.add_argument("--precond", help="comma list, e.g. ORAS,SORAS,MRAS-ndtns,SMRAS-tdnns")
    run.add_argument("--coarse", help="comma list of coarse sizes; 0 is one-level, theta=0.1 a threshold")
    run.add_argument("--overlap", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--maxit", type=int)
    run.add_argument("--tol", type=float)
    run.add_argument("--partition", choices=["graph", "uniform_grid"])
    run.add_argument("--pu", choices=["smooth", "boolean"])
    run.add_argument("--robin-alpha", type=float)
    run.add_argument("--tau", type=float)
    run.add_argument("--out", default="results", help="output directory")
    run.add_argument("--dump-mesh", action="store_true")
    run.add_argument("--dump-system", action="store_true")
    run.add_argument("--dump-partition", action="store_true")
    run.add_argument("--dump-spectrum", action="store_true")
    run.add_argument("-v", "--verbose", action="store_true")
    return ap


_KEYS = {"case": "case", "scheme": "scheme", "degree": "degree", "schedule": "schedule", "precond": "preconditioners",
         "coarse": "coarse", "overlap": "overlap", "seed": "seed", "maxit": "maxit", "tol": "tol",
         "partition": "partition", "pu": "pu", "robin_alpha": "robin_alpha", "tau": "tau"}


def _write(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)


def _wanted(name: str, args) -> bool:
    base = os.path.basename(name)
    if base == "mesh.txt":
        return args.dump_mesh
    if base == "system.mtx":
        return args.dump_system
    if base == "partition.csv":
        return args.dump_partition
    return args.dump_spectrum and base.startswith("spectrum_")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    values = {}
    if args.config:
        with open(args.config) as fh:
            # config files accept the flag spellings too (precond = ...)
            values.update({_KEYS.get(k, k): v for k, v in parse_config(fh.read()).items()})
    for flag, key in _KEYS.items():
        v = getattr(args, flag)
        if v is not None:
            values[key] = v
    try:
        if "case" not in values or "schedule" not in values:
            raise ConfigError("--case and --schedule are required (flag or config)")
        spec = ExperimentSpec.from_config(values)
    except (ConfigError, ValueError) as exc:
        print(f"ddlab: {exc}", file=sys.stderr)
        return 2

    dumps = {} if (args.dump_mesh or args.dump_system or args.dump_partition or args.dump_spectrum) else None
    rows = run_experiment(spec, dumps)
    out = args.out
    _write(os.path.join(out, "config.txt"), spec.echo())
    _write(os.path.join(out, "report.csv"), emit_report(rows, "csv"))
    _write(os.path.join(out, "report.md"), "```\n" + spec.echo() + "```\n\n" + emit_report(rows, "markdown"))
    _write(os.path.join(out, "rows.csv"), rows_csv(rows))
    for i, r in enumerate(rows):
        if r.trace is not None:
            _write(os.path.join(out, f"trace_{i:03d}.csv"), trace_csv(r.trace))
    for name, text in (dumps or {}).items():
        if _wanted(name, args):
            _write(os.path.join(out, name), text)
    print(emit_report(rows, "markdown"), end="")
    failed = [r for r in rows if r.iterations == "failed" or (r.converged and not r.verified)]
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
