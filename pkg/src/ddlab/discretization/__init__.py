from .assembly import (
    DEFAULT_ROBIN_ALPHA,
    DEFAULT_TAU,
    INTERFACE_KINDS,
    AssemblyError,
    Discretization,
    LinearSystem,
    assemble_global,
    assemble_hdg,
    assemble_local,
    assemble_taylor_hood,
    write_matrix_market,
)
from .projection import FacetProjection
from .space import MULTIPLIER, PRESSURE, VELOCITY, Space, SpaceError, build_space

__all__ = [
    "DEFAULT_ROBIN_ALPHA", "DEFAULT_TAU", "INTERFACE_KINDS", "AssemblyError", "Discretization",
    "LinearSystem", "assemble_global", "assemble_hdg", "assemble_local", "assemble_taylor_hood",
    "write_matrix_market", "FacetProjection", "MULTIPLIER", "PRESSURE", "VELOCITY", "Space",
    "SpaceError", "build_space",
]
