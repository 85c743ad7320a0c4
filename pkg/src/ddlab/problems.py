"""Continuous problem descriptions: Stokes, nearly incompressible elasticity,
their boundary conditions and the canonical test cases."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .mesh import DomainShape

VectorField = Callable[[np.ndarray, np.ndarray], np.ndarray]

# Boundary / interface condition kinds. TDNNS and NDTNS are the elasticity
# analogues of TVNF and NVTF and share their algebraic treatment.
BC_KINDS = ("dirichlet", "neumann", "tvnf", "nvtf", "tdnns", "ndtns")
TANGENTIAL_CONSTRAINED = frozenset({"tvnf", "tdnns"})
NORMAL_CONSTRAINED = frozenset({"nvtf", "ndtns"})


class ProblemError(ValueError):
    pass


def zero_field(x, y):
    x = np.asarray(x, dtype=float)
    return np.zeros(x.shape + (2,))


@dataclass(frozen=True)
class BoundaryCondition:
    """One condition on a tagged part of the boundary.

    ``value`` is the Dirichlet data (vector field) for ``dirichlet``, the
    traction (vector field) for ``neumann``, and the scalar stress datum
    ``g(x, y)`` for the four normal/tangential kinds.
    """

    kind: str
    value: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in BC_KINDS:
            raise ProblemError(f"unknown boundary condition kind {self.kind!r}")


def lame_parameters(E: float, poisson: float) -> tuple[float, float]:
    """Lamé coefficients (lambda, mu) from Young's modulus and Poisson ratio."""
    if E <= 0:
        raise ProblemError(f"Young modulus must be positive, got {E}")
    if not 0.0 <= poisson < 0.5:
        raise ProblemError(f"Poisson ratio must lie in [0, 0.5), got {poisson}")
    lam = E * poisson / ((1 + poisson) * (1 - 2 * poisson))
    mu = E / (2 * (1 + poisson))
    return lam, mu


@dataclass(frozen=True)
class StokesProblem:
    viscosity: float = 1.0
    body_force: VectorField = zero_field
    bcs: dict = field(default_factory=dict)  # tag -> BoundaryCondition

    kind = "stokes"

    def __post_init__(self):
        if not self.viscosity > 0:
            raise ProblemError("viscosity must be positive")

    def viscous_coefficient(self, region: np.ndarray) -> np.ndarray:
        return np.full(len(region), float(self.viscosity))

    def inverse_lambda(self, region: np.ndarray) -> np.ndarray:
        return np.zeros(len(region))

    def robin_coefficient(self, region: np.ndarray, alpha: float) -> np.ndarray:
        # alpha * nu, the Stokes analogue of the elasticity Robin weight
        return alpha * np.full(len(region), float(self.viscosity))


@dataclass(frozen=True)
class ElasticityProblem:
    """Mixed displacement/pressure elasticity, one material per region id."""

    materials: dict = field(default_factory=lambda: {0: (1.0, 0.3)})  # region -> (E, poisson)
    body_force: VectorField = zero_field
    bcs: dict = field(default_factory=dict)

    kind = "elasticity"

    def __post_init__(self):
        for E, nu in self.materials.values():
            lame_parameters(E, nu)

    def lame(self, region: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        missing = set(np.unique(region).tolist()) - set(self.materials)
        if missing:
            raise ProblemError(f"no material for region ids {sorted(missing)}")
        table = {r: lame_parameters(*m) for r, m in self.materials.items()}
        lam = np.array([table[r][0] for r in region])
        mu = np.array([table[r][1] for r in region])
        return lam, mu

    def viscous_coefficient(self, region):
        return self.lame(region)[1]

    def inverse_lambda(self, region):
        return 1.0 / self.lame(region)[0]

    def robin_coefficient(self, region, alpha):
        lam, mu = self.lame(region)
        return 2 * alpha * mu * (2 * mu + lam) / (lam + 3 * mu)


def check_bcs(problem, tags) -> None:
    """Every mesh tag must have exactly one condition."""
    missing = [t for t in tags if t not in problem.bcs]
    if missing:
        raise ProblemError(f"no boundary condition for tags {missing}")


@dataclass(frozen=True)
class TestCase:
    name: str
    shape: DomainShape
    problem: object
    initial_guess: str  # "zero" or "random"
    default_scheme: str
    default_degree: int

    __test__ = False  # not a pytest class


def _cavity_lid(x, y):
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape + (2,))
    inside = (x > 1e-12) & (x < 1 - 1e-12)
    out[..., 0] = np.where(inside, 1.0, 0.0)
    return out


def _t_profile(x, y):
    y = np.asarray(y, dtype=float)
    out = np.zeros(y.shape + (2,))
    out[..., 0] = 4 * y * (1 - y)
    return out


def _downward(x, y):
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape + (2,))
    out[..., 1] = -1.0
    return out


CASE_NAMES = ("l_shape_elasticity", "hetero_beam", "cavity", "t_shape")

STEEL = (210e9, 0.3)
RUBBER = (1e8, 0.4999)


def canonical_test_case(name: str) -> TestCase:
    """Setup of one of the four two-dimensional benchmark problems."""
    if name == "l_shape_elasticity":
        shape = DomainShape("l_shape", boundary_rule="l_clamp")
        problem = ElasticityProblem(
            materials={0: (1e5, 0.4999)},
            body_force=_downward,
            bcs={"dirichlet": BoundaryCondition("dirichlet"), "neumann": BoundaryCondition("neumann")},
        )
        return TestCase(name, shape, problem, "zero", "th", 3)
    if name == "hetero_beam":
        shape = DomainShape("rectangle", width=5.0, height=1.0, layers=(10, "y"), boundary_rule="beam_clamp")
        # band 0 at the bottom is steel, then alternating
        materials = {k: (STEEL if k % 2 == 0 else RUBBER) for k in range(10)}
        problem = ElasticityProblem(
            materials=materials,
            body_force=_downward,
            bcs={"dirichlet": BoundaryCondition("dirichlet"), "neumann": BoundaryCondition("neumann")},
        )
        return TestCase(name, shape, problem, "zero", "th", 3)
    if name == "cavity":
        shape = DomainShape("unit_square", boundary_rule="cavity")
        problem = StokesProblem(
            viscosity=1.0,
            bcs={"lid": BoundaryCondition("dirichlet", _cavity_lid), "wall": BoundaryCondition("dirichlet")},
        )
        return TestCase(name, shape, problem, "random", "th", 2)
    if name == "t_shape":
        shape = DomainShape("t_shape", boundary_rule="t_inflow")
        problem = StokesProblem(
            viscosity=1.0,
            bcs={
                "inflow": BoundaryCondition("dirichlet", _t_profile),
                "outflow": BoundaryCondition("dirichlet", _t_profile),
                "wall": BoundaryCondition("dirichlet"),
            },
        )
        return TestCase(name, shape, problem, "zero", "th", 3)
    raise ProblemError(f"unknown test case {name!r}; expected one of {CASE_NAMES}")


def load_materials(text: str) -> dict:
    """Parse ``region = E, poisson`` lines (``#`` starts a comment)."""
    out = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, val = line.partition("=")
        E, nu = (float(v) for v in val.split(","))
        lame_parameters(E, nu)
        out[int(key)] = (E, nu)
    return out


def initial_guess(rule: str, n: int, seed: int) -> np.ndarray:
    if rule == "zero":
        return np.zeros(n)
    if rule == "random":
        return np.random.default_rng(np.uint64(seed)).standard_normal(n)
    raise ProblemError(f"unknown initial guess rule {rule!r}")
