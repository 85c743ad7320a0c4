"""Experiment harness: configuration, weak-scaling runner and reports."""
from .config import ConfigError, ExperimentSpec, parse_coarse, parse_config, parse_preconditioner, parse_schedule
from .runner import (
    ExperimentError,
    ReportRow,
    VerificationReport,
    check_schedule,
    emit_report,
    parse_report,
    parse_rows_csv,
    rows_csv,
    run_cell,
    run_experiment,
    trace_csv,
    verify_solution,
)

__all__ = [
    "ConfigError", "ExperimentSpec", "parse_coarse", "parse_config", "parse_preconditioner", "parse_schedule",
    "ExperimentError", "ReportRow", "VerificationReport", "check_schedule", "emit_report", "parse_report",
    "parse_rows_csv", "rows_csv", "run_cell", "run_experiment", "trace_csv", "verify_solution",
]
