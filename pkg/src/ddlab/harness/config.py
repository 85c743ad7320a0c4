"""Experiment configuration: flat ``key = value`` files and the ExperimentSpec."""
from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field
from typing import Optional

from ..decomposition import PARTITION_METHODS, PU_KINDS
from ..discretization import DEFAULT_ROBIN_ALPHA, DEFAULT_TAU
from ..problems import CASE_NAMES, canonical_test_case
from ..schwarz import CoarseSpec, PreconditionerSpec


class ConfigError(ValueError):
    pass


def parse_config(text: str) -> dict:
    """``key = value`` per line; ``#`` starts a comment; later keys win."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def parse_schedule(text: str) -> list[tuple[int, int]]:
    """Resolution/subdomain pairs from ``"10:4, 14:8"`` or from lines of
    ``resolution N`` (also ``resolution:N``), ``#`` comments allowed."""
    if os.path.isfile(text):
        with open(text) as fh:
            text = fh.read()
    pairs = []
    for raw in text.replace(",", "\n").splitlines():
        item = raw.split("#", 1)[0].strip()
        if not item:
            continue
        parts = item.replace(":", " ").split()
        if len(parts) != 2:
            raise ConfigError(f"schedule entry {raw.strip()!r} is not 'resolution N'")
        try:
            n, N = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise ConfigError(f"schedule entry {raw.strip()!r} is not integer") from exc
        if n < 1 or N < 1:
            raise ConfigError(f"schedule entry {raw.strip()!r} must be positive")
        pairs.append((n, N))
    if not pairs:
        raise ConfigError("schedule is empty")
    return pairs


def parse_preconditioner(item: str, robin_alpha: float = DEFAULT_ROBIN_ALPHA) -> PreconditionerSpec:
    """``ORAS``, ``SORAS``, ``MRAS-ndtns``, ``NDTNS-SMRAS`` and the like."""
    parts = [p for p in item.strip().replace("_", "-").split("-") if p]
    if len(parts) == 1:
        return PreconditionerSpec(parts[0], "robin", robin_alpha)
    if len(parts) == 2:
        a, b = parts
        family, interface = (a, b) if a.upper().endswith("RAS") else (b, a)
        return PreconditionerSpec(family, interface, robin_alpha)
    raise ConfigError(f"cannot read preconditioner {item!r}")


def parse_coarse(item: str) -> Optional[CoarseSpec]:
    """``0`` (one level), ``M`` (M smallest per subdomain) or ``theta=0.1``."""
    item = item.strip()
    if item.startswith("theta"):
        _, _, value = item.partition("=")
        return CoarseSpec(selection="threshold", theta=float(value))
    count = int(item)
    if count < 0:
        raise ConfigError("coarse size must be non-negative")
    return None if count == 0 else CoarseSpec(count=count)


def _split(value) -> list[str]:
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    return [str(v) for v in value]


@dataclass
class ExperimentSpec:
    """One weak-scaling study: a test case on a schedule of (resolution, N)
    pairs, every preconditioner crossed with every coarse size."""

    case: str
    schedule: list
    scheme: Optional[str] = None  # defaults to the case's scheme
    degree: Optional[int] = None
    overlap: int = 1
    preconditioners: list = field(default_factory=lambda: ["MRAS", "SMRAS"])
    coarse: list = field(default_factory=lambda: ["0", "5"])
    seed: int = 0
    maxit: int = 1000
    tol: float = 1e-6
    partition: str = "graph"
    pu: str = "smooth"
    robin_alpha: float = DEFAULT_ROBIN_ALPHA
    tau: float = DEFAULT_TAU
    equilibrate: bool = True
    dense_limit: int = 0
    check_schedule: bool = True

    def __post_init__(self):
        if self.case not in CASE_NAMES:
            raise ConfigError(f"unknown case {self.case!r}; expected one of {CASE_NAMES}")
        tc = canonical_test_case(self.case)
        self.scheme = (self.scheme or tc.default_scheme).lower()
        if self.degree is None:
            self.degree = tc.default_degree if self.scheme == "th" else 1
        self.degree = int(self.degree)
        if isinstance(self.schedule, str):
            self.schedule = parse_schedule(self.schedule)
        self.schedule = [(int(n), int(N)) for n, N in self.schedule]
        if not self.schedule:
            raise ConfigError("schedule is empty")
        self.preconditioners = _split(self.preconditioners)
        self.coarse = _split(self.coarse)
        if not self.preconditioners or not self.coarse:
            raise ConfigError("need at least one preconditioner and one coarse size")
        kind = tc.problem.kind
        for p in self.preconditioners:
            parse_preconditioner(p, self.robin_alpha).check_problem(kind)
        for c in self.coarse:
            parse_coarse(c)
        if self.partition not in PARTITION_METHODS:
            raise ConfigError(f"unknown partition method {self.partition!r}")
        if self.pu not in PU_KINDS:
            raise ConfigError(f"unknown partition of unity {self.pu!r}")
        if self.overlap < 0 or self.maxit < 1 or not self.tol > 0:
            raise ConfigError("overlap >= 0, maxit >= 1 and tol > 0 are required")
        self.seed = int(self.seed)

    @property
    def preconditioner_specs(self) -> list[PreconditionerSpec]:
        return [parse_preconditioner(p, self.robin_alpha) for p in self.preconditioners]

    @property
    def coarse_specs(self) -> list[Optional[CoarseSpec]]:
        return [parse_coarse(c) for c in self.coarse]

    @classmethod
    def from_config(cls, values: dict) -> "ExperimentSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        casts = {"degree": int, "overlap": int, "seed": int, "maxit": int, "tol": float,
                 "robin_alpha": float, "tau": float, "dense_limit": int}
        kw = {}
        for key, value in values.items():
            if key in casts and isinstance(value, str):
                value = casts[key](value)
            elif key in ("equilibrate", "check_schedule") and isinstance(value, str):
                value = value.lower() in ("1", "true", "yes", "on")
            kw[key] = value
        return cls(**kw)

    def echo(self) -> str:
        """The full configuration as ``key = value`` lines (parseable back)."""
        lines = []
        for key, value in asdict(self).items():
            if key == "schedule":
                value = ", ".join(f"{n}:{N}" for n, N in value)
            elif isinstance(value, list):
                value = ", ".join(value)
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"
