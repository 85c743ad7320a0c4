"""One-level restricted Schwarz preconditioners: ORAS, SORAS, MRAS, SMRAS.

All four share one skeleton
``z = sum_i R_i^T D_i B_i^{-1} [D_i] R_i r``; the families differ only in
the interface condition used to assemble the local matrices ``B_i`` and in
whether the partition of unity is applied on both sides (symmetrised).
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .decomposition import Decomposition
from .discretization import DEFAULT_ROBIN_ALPHA, Discretization, LinearSystem
from .solvers import Factorization, SingularMatrixError, factorize

FAMILIES = ("ORAS", "SORAS", "MRAS", "SMRAS")
MODIFIED_CONDITIONS = {"stokes": ("tvnf", "nvtf"), "elasticity": ("tdnns", "ndtns")}


class PreconditionerError(ValueError):
    pass


@dataclass(frozen=True)
class CoarseSpec:
    """GenEO selection: the ``count`` smallest |lambda| per subdomain
    (``selection="fixed"``) or all with |lambda| < ``theta``
    (``selection="threshold"``, at most ``max_count`` per subdomain)."""

    selection: str = "fixed"
    count: int = 5
    theta: float = 0.1
    max_count: int = 30
    shift: Optional[float] = None

    def __post_init__(self):
        if self.selection not in ("fixed", "threshold"):
            raise PreconditionerError(f"unknown coarse selection {self.selection!r}")
        if self.count < 0:
            raise PreconditionerError("coarse count must be non-negative")
        if self.selection == "threshold" and not self.theta > 0:
            raise PreconditionerError("threshold theta must be positive")

    @property
    def label(self) -> str:
        return str(self.count) if self.selection == "fixed" else f"theta={self.theta:g}"


@dataclass(frozen=True)
class PreconditionerSpec:
    family: str
    interface: str = "robin"
    robin_alpha: float = DEFAULT_ROBIN_ALPHA
    coarse: Optional[CoarseSpec] = None

    def __post_init__(self):
        fam = self.family.upper()
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "interface", self.interface.lower())
        if fam not in FAMILIES:
            raise PreconditionerError(f"unknown preconditioner family {self.family!r}")
        if fam in ("ORAS", "SORAS") and self.interface != "robin":
            raise PreconditionerError(f"{fam} uses Robin interface conditions, got {self.interface!r}")
        if fam in ("MRAS", "SMRAS") and self.interface not in ("tvnf", "nvtf", "tdnns", "ndtns"):
            raise PreconditionerError(f"{fam} needs a TVNF/NVTF/TDNNS/NDTNS interface, got {self.interface!r}")

    @property
    def levels(self) -> int:
        return 1 if self.coarse is None else 2

    @property
    def symmetrised(self) -> bool:
        return self.family in ("SORAS", "SMRAS")

    def check_problem(self, kind: str) -> None:
        if self.family in ("MRAS", "SMRAS") and self.interface not in MODIFIED_CONDITIONS[kind]:
            raise PreconditionerError(
                f"interface condition {self.interface!r} does not match a {kind} problem "
                f"(expected one of {MODIFIED_CONDITIONS[kind]})"
            )

    @property
    def name(self) -> str:
        return f"{self.interface.upper()}-{self.family}" if self.family in ("MRAS", "SMRAS") else self.family


class OneLevelPreconditioner:
    """Local factorizations plus restriction data; ``apply`` is linear."""

    def __init__(self, family: str, decomposition: Decomposition, local_systems: list,
                 factorizations: list, workers: int = 1):
        self.family = family
        self.decomposition = decomposition
        self.local_systems = local_systems
        self.factorizations = factorizations
        self.workers = workers

    @property
    def symmetrised(self) -> bool:
        return self.family in ("SORAS", "SMRAS")

    def _local(self, i: int, r: np.ndarray) -> np.ndarray:
        d = self.decomposition.dof_sets[i]
        w = self.decomposition.pu_weights[i]
        ri = r[d] * w if self.symmetrised else r[d]
        ri = self._homogeneous_interface(self.local_systems[i], ri)
        return w * self.factorizations[i].solve(ri)

    @staticmethod
    def _homogeneous_interface(system: LinearSystem, r: np.ndarray) -> np.ndarray:
        """B_i^{-1} acts on the space with homogeneous interface constraints,
        so the right-hand side of interface-constrained rows is zero."""
        rows = system.interface_constrained
        if len(rows) == 0:
            return r
        if system.rotation is None:
            r = r.copy()
            r[rows] = 0.0
            return r
        t = system.rotation.T @ r
        t[rows] = 0.0
        return system.rotation @ t

    def apply(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if len(r) != self.decomposition.ndofs:
            raise ValueError(f"vector of length {len(r)} does not match {self.decomposition.ndofs} dofs")
        n_sub = self.decomposition.n_subdomains
        if self.workers > 1:
            with ThreadPoolExecutor(self.workers) as pool:
                parts = list(pool.map(lambda i: self._local(i, r), range(n_sub)))
        else:
            parts = [self._local(i, r) for i in range(n_sub)]
        z = np.zeros_like(r)
        for i, zi in enumerate(parts):  # fixed ascending order
            z[self.decomposition.dof_sets[i]] += zi
        return z

    __call__ = apply


def assemble_local_systems(disc: Discretization, decomposition: Decomposition, interface: str,
                           robin_alpha: float = DEFAULT_ROBIN_ALPHA) -> list[LinearSystem]:
    out = []
    for i, elems in enumerate(decomposition.overlapped_elements):
        sys_i = disc.assemble(elems, interface, robin_alpha)
        if not np.array_equal(sys_i.dofs, decomposition.dof_sets[i]):
            raise PreconditionerError(f"subdomain {i}: local dofs do not match the restriction")
        out.append(sys_i)
    return out


def build_one_level(spec: PreconditionerSpec, decomposition: Decomposition, disc: Discretization,
                    workers: int = 1, local_systems: Optional[list] = None) -> OneLevelPreconditioner:
    spec.check_problem(disc.problem.kind)
    if local_systems is None:
        local_systems = assemble_local_systems(disc, decomposition, spec.interface, spec.robin_alpha)
    facts: list[Factorization] = []
    for i, s in enumerate(local_systems):
        try:
            facts.append(factorize(s.A))
        except SingularMatrixError as exc:
            raise SingularMatrixError(f"local matrix of subdomain {i} is singular: {exc}", exc.pivot) from exc
    return OneLevelPreconditioner(spec.family, decomposition, local_systems, facts, workers)
