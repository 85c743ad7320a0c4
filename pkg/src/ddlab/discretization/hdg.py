"""Element kernels for the lowest-order hybrid DG scheme.

Velocity: BDM1 with two normal moments per facet,
``N_{E,j}(v) = |E|^{-1} int_E (v . n_E) q_j ds`` with ``q_0 = 1`` and
``q_1 = 2s - 1`` (s runs from the low to the high vertex), so the shared
facets of two triangles carry identical dofs. Multiplier: one value per
facet, the tangential component along the global facet tangent ``t_E``.
Pressure: one constant per triangle.

Local element dof order: 6 BDM dofs (facet-major), 3 multipliers, 1 pressure.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..mesh import Mesh
from .quadrature import gauss_segment, gauss_triangle
from .taylor_hood import geometry, physical_points

N_LOCAL = 10


def _monomials(X, Y):
    """Vector monomial basis of [P1]^2 at scaled coordinates -> (..., 6, 2)."""
    one, zero = np.ones_like(X), np.zeros_like(X)
    comps = [(one, zero), (X, zero), (Y, zero), (zero, one), (zero, X), (zero, Y)]
    return np.stack([np.stack(c, axis=-1) for c in comps], axis=-2)


def edge_moments(s: np.ndarray) -> np.ndarray:
    """Facet test polynomials (q_0, q_1) at facet parameters s in [0, 1]."""
    return np.stack([np.ones_like(s), 2 * s - 1], axis=-1)


@dataclass(frozen=True, eq=False)
class BDM1:
    """Per-triangle BDM1 basis expressed in scaled monomials."""

    mesh: Mesh

    @cached_property
    def _scaling(self):
        return self.mesh.centroids, self.mesh.diameters

    @cached_property
    def coefficients(self) -> np.ndarray:
        """C[t, m, b]: phi_b = sum_m C[t, m, b] monomial_m."""
        mesh = self.mesh
        c, h = self._scaling
        s, w = gauss_segment(4)
        q = edge_moments(s)
        nT = mesh.n_triangles
        N = np.zeros((nT, 6, 6))
        for i in range(3):
            f = mesh.triangle_facets[:, i]
            a, b = mesh.facets[f, 0], mesh.facets[f, 1]
            pts = mesh.vertices[a][:, None, :] + s[None, :, None] * (mesh.vertices[b] - mesh.vertices[a])[:, None, :]
            X = (pts[..., 0] - c[:, 0, None]) / h[:, None]
            Y = (pts[..., 1] - c[:, 1, None]) / h[:, None]
            mono_n = np.einsum("tqmi,ti->tqm", _monomials(X, Y), mesh.facet_normals[f])
            # (1/|E|) int_E = sum_q w_q over the unit parameter
            N[:, 2 * i:2 * i + 2, :] = np.einsum("q,qj,tqm->tjm", w, q, mono_n)
        return np.linalg.inv(N)

    def values(self, cells: np.ndarray, pts: np.ndarray) -> np.ndarray:
        """Basis values at physical points pts (n, nq, 2) of ``cells`` -> (n, nq, 6, 2)."""
        c, h = self._scaling
        X = (pts[..., 0] - c[cells, 0, None]) / h[cells, None]
        Y = (pts[..., 1] - c[cells, 1, None]) / h[cells, None]
        return np.einsum("tqmi,tmb->tqbi", _monomials(X, Y), self.coefficients[cells])

    @cached_property
    def gradients(self) -> np.ndarray:
        """Constant gradients G[t, b, i, j] = d(phi_b)_i / dx_j."""
        C = self.coefficients
        h = self._scaling[1][:, None]
        G = np.zeros((self.mesh.n_triangles, 6, 2, 2))
        G[:, :, 0, 0] = C[:, 1, :] / h
        G[:, :, 0, 1] = C[:, 2, :] / h
        G[:, :, 1, 0] = C[:, 4, :] / h
        G[:, :, 1, 1] = C[:, 5, :] / h
        return G


def facet_points(mesh: Mesh, facets: np.ndarray, s: np.ndarray) -> np.ndarray:
    a, b = mesh.facets[facets, 0], mesh.facets[facets, 1]
    pa, pb = mesh.vertices[a], mesh.vertices[b]
    return pa[:, None, :] + s[None, :, None] * (pb - pa)[:, None, :]


def element_kernels(mesh: Mesh, bdm: BDM1, viscous, inverse_lambda, symmetric: bool, tau: float, body_force):
    """Element matrices (nT, 10, 10), loads and pressure weights."""
    nT = mesh.n_triangles
    area = np.abs(mesh.signed_areas)
    G = bdm.gradients
    E = 0.5 * (G + np.transpose(G, (0, 1, 3, 2)))
    Ke = np.zeros((nT, N_LOCAL, N_LOCAL))
    if symmetric:
        Ke[:, :6, :6] = 2 * np.einsum("t,taij,tbij->tab", viscous * area, E, E)
    else:
        Ke[:, :6, :6] = np.einsum("t,taij,tbij->tab", viscous * area, G, G)
    div = G[:, :, 0, 0] + G[:, :, 1, 1]
    Ke[:, :6, 9] = -area[:, None] * div
    Ke[:, 9, :6] = Ke[:, :6, 9]
    Ke[:, 9, 9] = -inverse_lambda * area

    # facet terms; only facet means of the tangential jump enter for k = 1
    flux_tensor = 2 * E if symmetric else G
    penalty = (2 * viscous if symmetric else viscous) * tau / mesh.diameters
    s, w = gauss_segment(4)
    for i in range(3):
        f = mesh.triangle_facets[:, i]
        L = mesh.facet_lengths[f]
        t = mesh.facet_tangents[f]
        n = mesh.facet_normals[f] * mesh.outward_sign(f, np.arange(nT))[:, None]
        flux = np.zeros((nT, N_LOCAL))
        flux[:, :6] = viscous[:, None] * np.einsum("ti,tbij,tj->tb", t, flux_tensor, n)
        phi = bdm.values(np.arange(nT), facet_points(mesh, f, s))
        jint = np.zeros((nT, N_LOCAL))
        jint[:, :6] = L[:, None] * np.einsum("q,tqbi,ti->tb", w, phi, t)
        jint[:, 6 + i] = -L
        Ke -= np.einsum("ta,tb->tab", jint, flux) + np.einsum("ta,tb->tab", flux, jint)
        Ke += (penalty / L)[:, None, None] * np.einsum("ta,tb->tab", jint, jint)

    qp, qw = gauss_triangle(6)
    _, _, _, adet = geometry(mesh)
    x = physical_points(mesh, qp)
    f = np.asarray(body_force(x[..., 0], x[..., 1]), dtype=float)
    phi = bdm.values(np.arange(nT), x)
    Fe = np.zeros((nT, N_LOCAL))
    Fe[:, :6] = np.einsum("t,q,tqbi,tqi->tb", adet, qw, phi, f)
    We = np.zeros((nT, N_LOCAL))
    We[:, 9] = area
    return Ke, Fe, We
