"""L2 projection of facet functions onto P_m(E)."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .quadrature import gauss_segment


@dataclass(frozen=True)
class FacetProjection:
    """Projection onto polynomials of ``degree`` on a facet of length ``length``.

    Functions are sampled on the facet parameter s in [0, 1]; the basis is
    the shifted Legendre family, so the facet mass matrix is diagonal.
    """

    degree: int = 0
    length: float = 1.0

    @cached_property
    def _rule(self):
        return gauss_segment(2 * self.degree + 8)

    def basis(self, s: np.ndarray) -> np.ndarray:
        return np.polynomial.legendre.legvander(2 * np.asarray(s, dtype=float) - 1, self.degree)

    @cached_property
    def mass(self) -> np.ndarray:
        s, w = self._rule
        B = self.basis(s)
        return self.length * np.einsum("q,qa,qb->ab", w, B, B)

    def coefficients(self, fun) -> np.ndarray:
        """Coefficients of the projection of the callable ``fun(s)``."""
        s, w = self._rule
        rhs = self.length * self.basis(s).T @ (w * fun(s))
        return np.linalg.solve(self.mass, rhs)

    def evaluate(self, coeffs: np.ndarray, s: np.ndarray) -> np.ndarray:
        return self.basis(s) @ coeffs

    def project(self, fun):
        """The projected function as a callable of s."""
        c = self.coefficients(fun)
        return lambda s: self.evaluate(c, s)
