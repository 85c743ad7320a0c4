import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ddlab.harness.cli import main
from ddlab.harness.config import (ConfigError, ExperimentSpec, parse_coarse, parse_config, parse_preconditioner,
                                  parse_schedule)
from ddlab.harness.runner import (ReportRow, emit_report, parse_report, parse_rows_csv, rows_csv, run_experiment,
                                  verify_solution)
from conftest import make_disc

SMALL = dict(case="cavity", schedule="4:2", preconditioners=["MRAS-tvnf"], coarse=["0", "2"], check_schedule=False)


def test_parse_config_comments_and_override():
    text = "case = cavity  # trailing\n\n# full line\nseed=3\nrobin-alpha = 2\nseed = 4\n"
    assert parse_config(text) == {"case": "cavity", "seed": "4", "robin_alpha": "2"}
    with pytest.raises(ConfigError):
        parse_config("no equals sign")


@given(st.lists(st.tuples(st.integers(1, 99), st.integers(1, 64)), min_size=1, max_size=6))
def test_schedule_inline_round_trip(pairs):
    assert parse_schedule(", ".join(f"{n}:{N}" for n, N in pairs)) == pairs


def test_schedule_file(tmp_path):
    path = tmp_path / "sched.txt"
    path.write_text("# res N\n10 4\n14 8  # bigger\n\n")
    assert parse_schedule(str(path)) == [(10, 4), (14, 8)]


@pytest.mark.parametrize("bad", ["", "10", "10:x", "0:4", "10:4:2"])
def test_schedule_rejects(bad):
    with pytest.raises(ConfigError):
        parse_schedule(bad)


def test_preconditioner_names_in_either_order():
    a, b = parse_preconditioner("MRAS-ndtns"), parse_preconditioner("NDTNS-MRAS")
    assert (a.family, a.interface) == (b.family, b.interface) == ("MRAS", "ndtns")
    assert parse_preconditioner("ORAS", 3.0).robin_alpha == 3.0
    with pytest.raises(ConfigError):
        parse_preconditioner("A-B-C")


def test_parse_coarse():
    assert parse_coarse("0") is None
    assert parse_coarse("5").count == 5
    th = parse_coarse("theta=0.2")
    assert th.selection == "threshold" and th.theta == 0.2
    with pytest.raises(ConfigError):
        parse_coarse("-1")


@pytest.mark.parametrize("override", [dict(case="nope"), dict(preconditioners=["MRAS-ndtns"]),
                                      dict(partition="metis"), dict(pu="hat"), dict(overlap=-1),
                                      dict(maxit=0), dict(tol=0.0), dict(coarse=[])])
def test_spec_validation(override):
    with pytest.raises((ConfigError, ValueError)):
        ExperimentSpec(**{**SMALL, **override})


def test_spec_defaults_and_echo_round_trip():
    spec = ExperimentSpec(**SMALL)
    assert spec.scheme == "th" and spec.degree == 2 and spec.schedule == [(4, 2)]
    again = ExperimentSpec.from_config(parse_config(spec.echo()))
    assert again == spec
    with pytest.raises(ConfigError):
        ExperimentSpec.from_config({"case": "cavity", "schedule": "4:2", "colour": "red"})


def _row(dof, N, method, coarse, its):
    return ReportRow(dof, N, method, coarse, its, 0.5, 0, coarse_dim=0 if coarse == "-" else 4,
                     error=1e-7, residual=1e-8, verified=True, note="x,y")


def test_report_single_row():
    text = emit_report([_row(100, 4, "ORAS", "-", "12")])
    assert text == "DOF,N,ORAS\n100,4,12\n"
    assert parse_report(text) == [(100, 4, "ORAS", "12")]


def test_report_shape_and_round_trip():
    rows = []
    for dof, N in ((100, 4), (200, 8)):
        for m in ("ORAS", "SORAS", "TVNF-MRAS"):
            rows.append(_row(dof, N, m, "-", str(N + 1)))
        rows.append(_row(dof, N, "TVNF-MRAS", "5", ">1000"))
        rows.append(_row(dof, N, "SORAS", "5", "failed"))
    lines = emit_report(rows).strip().splitlines()
    assert len(lines) == 3
    assert lines[0].split(",")[2:] == ["ORAS", "SORAS", "TVNF-MRAS", "TVNF-MRAS (5)", "SORAS (5)"]
    assert sorted(parse_report(emit_report(rows))) == sorted((r.dof, r.n_subdomains, r.column, r.iterations)
                                                             for r in rows)
    md = emit_report(rows, "markdown").splitlines()
    assert md[0].startswith("| DOF | N |") and len(md) == 4
    assert parse_rows_csv(rows_csv(rows)) == rows
    with pytest.raises(ValueError):
        emit_report(rows, "latex")
    with pytest.raises(ValueError):
        emit_report([])


def test_verify_solution_trivial_cases():
    system = make_disc("cavity", 3).assemble()
    x = np.linalg.solve(system.A.toarray(), system.F)
    exact = verify_solution(system, x, x)
    assert exact.error == 0.0 and exact.residual < 1e-10 and exact.passed()
    zero = verify_solution(system, np.zeros_like(x), x)
    assert zero.error == pytest.approx(1.0) and zero.residual == pytest.approx(1.0)
    assert not zero.passed()
    with pytest.raises(ValueError):
        verify_solution(system, x[:-1], x)


def test_run_experiment_is_deterministic():
    a, b = run_experiment(ExperimentSpec(**SMALL)), run_experiment(ExperimentSpec(**SMALL))
    assert [(r.column, r.iterations, r.coarse_dim, r.dof) for r in a] == \
           [(r.column, r.iterations, r.coarse_dim, r.dof) for r in b]
    assert all(r.converged and r.verified for r in a)
    assert [r.coarse for r in a] == ["-", "2"] and a[1].coarse_dim > 0
    assert all(math.isclose(x.error, y.error) for x, y in zip(a, b))


def test_cli_writes_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["run", "--case", "cavity", "--schedule", "4:2", "--precond", "TVNF-MRAS", "--coarse", "0,2",
                 "--out", str(out), "--dump-spectrum", "--dump-partition"])
    assert code == 0
    for name in ("config.txt", "report.csv", "report.md", "rows.csv", "trace_000.csv"):
        assert (out / name).exists(), name
    assert list(out.glob("n4_N2/spectrum_*.csv"))
    assert list(out.glob("n4_N2/partition.csv"))
    assert "TVNF-MRAS (2)" in capsys.readouterr().out
    spec = ExperimentSpec.from_config(parse_config((out / "config.txt").read_text()))
    assert spec.coarse == ["0", "2"]


def test_cli_config_file_and_errors(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("case = cavity\nschedule = 4:2\nprecond = ORAS\ncoarse = 0\ncheck_schedule = false\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["run", "--case", "cavity", "--out", str(tmp_path / "b")]) == 2
    assert main(["run", "--case", "cavity", "--schedule", "4:2", "--precond", "MRAS-tdnns",
                 "--out", str(tmp_path / "c")]) == 2
    assert "ddlab:" in capsys.readouterr().err
