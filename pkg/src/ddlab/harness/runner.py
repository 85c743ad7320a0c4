"""Weak-scaling runs: build, solve with every preconditioner, tabulate."""
from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from ..coarse import build_two_level, compute_spectra, spectrum_csv
from ..decomposition import decompose
from ..discretization import Discretization, build_space, write_matrix_market
from ..mesh import build_structured_mesh, write_mesh
from ..problems import canonical_test_case, initial_guess
from ..schwarz import CoarseSpec, build_one_level
from ..solvers import ErrorMonitor, KrylovTrace, factorize, preconditioned_solve
from .config import ExperimentSpec

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-5
SCHEDULE_SPREAD = 0.2  # allowed relative spread of triangles per subdomain


class ExperimentError(RuntimeError):
    pass


@dataclass
class VerificationReport:
    error: float  # ||U_ref - U|| / ||U_ref - U_0||
    residual: float  # ||A U - F|| / ||F||

    def passed(self, error_tol: float = 1e-6, residual_tol: float = RESIDUAL_TOL) -> bool:
        return self.error < error_tol and self.residual < residual_tol


def verify_solution(system, candidate: np.ndarray, reference: np.ndarray,
                    initial: Optional[np.ndarray] = None) -> VerificationReport:
    candidate, reference = np.asarray(candidate, float), np.asarray(reference, float)
    if candidate.shape != reference.shape or candidate.shape != (system.size,):
        raise ValueError("candidate, reference and system sizes differ")
    initial = np.zeros_like(reference) if initial is None else np.asarray(initial, float)
    e0 = np.linalg.norm(reference - initial)
    err = np.linalg.norm(reference - candidate)
    error = err / e0 if e0 > 0 else float(err > 0)
    fn = np.linalg.norm(system.F)
    res = np.linalg.norm(system.A @ candidate - system.F)
    return VerificationReport(float(error), float(res / fn if fn > 0 else res))


@dataclass
class ReportRow:
    dof: int
    n_subdomains: int
    method: str
    coarse: str  # "-" for one level, else the coarse-size label
    iterations: str  # count, ">maxit" or "failed"
    wall_time: float
    seed: int
    coarse_dim: int = 0
    error: float = float("nan")
    residual: float = float("nan")
    verified: bool = False
    triangles_per_subdomain: float = 0.0
    reference_time: float = 0.0
    note: str = ""
    config: str = ""
    trace: Optional[KrylovTrace] = field(default=None, repr=False, compare=False)

    @property
    def column(self) -> str:
        """Table column label, e.g. ``NDTNS-SMRAS`` or ``NDTNS-SMRAS (5)``."""
        return self.method if self.coarse == "-" else f"{self.method} ({self.coarse})"

    @property
    def converged(self) -> bool:
        return self.iterations.isdigit()


ROW_FIELDS = [f.name for f in fields(ReportRow) if f.name != "trace"]


def _coarse_label(spec: Optional[CoarseSpec]) -> str:
    return "-" if spec is None else spec.label


def _spectra_request(specs: list) -> Optional[CoarseSpec]:
    """One eigen request covering every coarse spec of a run."""
    specs = [s for s in specs if s is not None]
    if not specs:
        return None
    need = max(s.count if s.selection == "fixed" else s.max_count for s in specs)
    return CoarseSpec(count=need)


def run_cell(spec: ExperimentSpec, n: int, N: int, dumps: Optional[dict] = None) -> list[ReportRow]:
    """All rows of one (resolution, N) entry; they share the mesh, the
    reference solution, the decomposition and the local factorizations."""
    tc = canonical_test_case(spec.case)
    mesh = build_structured_mesh(tc.shape, n)
    disc = Discretization(build_space(mesh, spec.scheme, spec.degree), tc.problem, spec.tau)
    system = disc.assemble()
    t0 = time.perf_counter()
    reference = factorize(system.A).solve(system.F)
    ref_time = time.perf_counter() - t0
    x0 = initial_guess(tc.initial_guess, system.size, spec.seed)
    decomposition = decompose(disc.space, N, spec.overlap, spec.partition, disc.augmented, pu=spec.pu)
    per_sub = mesh.n_triangles / N
    echo = spec.echo().strip().replace("\n", "; ")
    if dumps is not None:
        dumps["mesh.txt"] = write_mesh(mesh)
        dumps["system.mtx"] = write_matrix_market(system.A)
        dumps["partition.csv"] = decomposition.partition_csv()

    rows = []
    coarse_specs = spec.coarse_specs
    request = _spectra_request(coarse_specs)
    for pspec in spec.preconditioner_specs:
        base = dict(dof=system.size, n_subdomains=N, method=pspec.name, seed=spec.seed,
                    triangles_per_subdomain=per_sub, reference_time=ref_time, config=echo)
        try:
            t0 = time.perf_counter()
            one = build_one_level(pspec, decomposition, disc)
            setup = time.perf_counter() - t0
        except Exception as exc:  # a failed build aborts only this preconditioner's rows
            log.warning("n=%d N=%d %s: build failed: %s", n, N, pspec.name, exc)
            for cspec in coarse_specs:
                rows.append(ReportRow(coarse=_coarse_label(cspec), iterations="failed", wall_time=0.0,
                                      note=f"{type(exc).__name__}: {exc}", **base))
            continue
        spectra, spectra_error = None, None
        if request is not None:
            try:
                spectra = compute_spectra(disc, decomposition, one, request, spec.dense_limit)
            except Exception as exc:
                log.warning("n=%d N=%d %s: GenEO failed: %s", n, N, pspec.name, exc)
                spectra_error = f"{type(exc).__name__}: {exc}"
            if dumps is not None and spectra is not None:
                dumps[f"spectrum_{pspec.name}.csv"] = spectrum_csv(spectra)
                for s in spectra:
                    dumps[f"spectrum_{pspec.name}_{s.subdomain}.csv"] = spectrum_csv([s])
        for cspec in coarse_specs:
            label = _coarse_label(cspec)
            try:
                t0 = time.perf_counter()
                if cspec is None:
                    precond, dim = one, 0
                elif spectra_error is not None:
                    raise RuntimeError(spectra_error)
                else:
                    precond, _ = build_two_level(disc, decomposition, one, system.A, cspec, spectra=spectra)
                    dim = precond.coarse.dim
                x, trace = preconditioned_solve(system.A, system.F, precond, x0,
                                                ErrorMonitor(reference, spec.tol, (system.A, system.F), RESIDUAL_TOL),
                                                spec.maxit, spec.equilibrate)
                wall = time.perf_counter() - t0 + setup
            except Exception as exc:
                log.warning("n=%d N=%d %s %s: failed: %s", n, N, pspec.name, label, exc)
                rows.append(ReportRow(coarse=label, iterations="failed", wall_time=0.0,
                                      note=f"{type(exc).__name__}: {exc}", **base))
                continue
            check = verify_solution(system, x, reference, x0)
            note = "" if trace.converged else trace.stop_reason
            if trace.converged and check.residual >= RESIDUAL_TOL:
                note = "residual check failed"
            rows.append(ReportRow(coarse=label, iterations=trace.label, wall_time=wall, coarse_dim=dim,
                                  error=check.error, residual=check.residual,
                                  verified=bool(trace.converged and check.residual < RESIDUAL_TOL),
                                  note=note, trace=trace, **base))
            log.info("n=%d N=%d %s: %s", n, N, rows[-1].column, rows[-1].iterations)
    return rows


def check_schedule(spec: ExperimentSpec) -> list[float]:
    """Triangles per subdomain along the schedule; raises when the spread
    exceeds the weak-scaling tolerance."""
    tc = canonical_test_case(spec.case)
    sizes = [build_structured_mesh(tc.shape, n).n_triangles / N for n, N in spec.schedule]
    if spec.check_schedule and len(sizes) > 1 and (max(sizes) - min(sizes)) / max(sizes) >= SCHEDULE_SPREAD:
        raise ExperimentError(
            f"elements per subdomain vary too much along the schedule: {[round(s, 1) for s in sizes]}"
        )
    return sizes


def run_experiment(spec: ExperimentSpec, dumps: Optional[dict] = None) -> list[ReportRow]:
    """Rows for every schedule entry, preconditioner and coarse size.

    ``dumps``, when given, is filled per schedule entry with text artifacts
    (mesh, matrix, partition, spectra) keyed by ``"n<res>_N<N>/<file>"``.
    """
    check_schedule(spec)
    rows = []
    for n, N in spec.schedule:
        cell = {} if dumps is not None else None
        rows.extend(run_cell(spec, n, N, cell))
        if dumps is not None:
            dumps.update({f"n{n}_N{N}/{k}": v for k, v in cell.items()})
    return rows


# ----------------------------------------------------------------------
# reports


def _columns(rows: list[ReportRow]) -> list[str]:
    seen = []
    for coarse in dict.fromkeys(r.coarse for r in rows):
        for r in rows:
            if r.coarse == coarse and r.column not in seen:
                seen.append(r.column)
    return seen


def _table(rows: list[ReportRow]) -> tuple[list[str], list[list[str]]]:
    columns = _columns(rows)
    keys = list(dict.fromkeys((r.dof, r.n_subdomains) for r in rows))
    cells = {(r.dof, r.n_subdomains, r.column): r.iterations for r in rows}
    body = [[str(dof), str(N)] + [cells.get((dof, N, c), "") for c in columns] for dof, N in keys]
    return ["DOF", "N"] + columns, body


def emit_report(rows: list[ReportRow], format: str = "csv") -> str:
    """Iteration table with one line per (DOF, N) and one column per
    method and coarse size, one-level columns first."""
    if not rows:
        raise ValueError("no rows to report")
    header, body = _table(rows)
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(body)
        return buf.getvalue()
    if format == "markdown":
        lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
        lines += ["| " + " | ".join(line) + " |" for line in body]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {format!r}")


def parse_report(text: str) -> list[tuple[int, int, str, str]]:
    """(DOF, N, column, iterations) cells of a CSV table from ``emit_report``."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    out = []
    for line in reader:
        dof, N = int(line[0]), int(line[1])
        for col, val in zip(header[2:], line[2:]):
            if val:
                out.append((dof, N, col, val))
    return out


def rows_csv(rows: list[ReportRow]) -> str:
    """Every row field, one line per row (``trace`` excluded)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ROW_FIELDS)
    for r in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in (getattr(r, f) for f in ROW_FIELDS)])
    return buf.getvalue()


def parse_rows_csv(text: str) -> list[ReportRow]:
    reader = csv.DictReader(io.StringIO(text))
    types = {f.name: f.type for f in fields(ReportRow)}
    out = []
    for line in reader:
        kw = {}
        for name, value in line.items():
            t = types[name]
            if t == "int":
                kw[name] = int(value)
            elif t == "float":
                kw[name] = float(value)
            elif t == "bool":
                kw[name] = value == "True"
            else:
                kw[name] = value
        out.append(ReportRow(**kw))
    return out


def trace_csv(trace: KrylovTrace) -> str:
    lines = ["iteration,residual,error"]
    lines += [f"{i},{r:.17g},{'' if e is None else f'{e:.17g}'}" for i, r, e in trace.rows()]
    return "\n".join(lines) + "\n"
