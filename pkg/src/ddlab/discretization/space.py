"""Degree-of-freedom maps for Taylor-Hood and hybrid DG (BDM) spaces."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from ..mesh import Mesh
from . import lagrange

VELOCITY, PRESSURE, MULTIPLIER = 0, 1, 2


class SpaceError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Space:
    mesh: Mesh
    scheme: str  # "th" or "hdg"
    degree: int
    n_velocity: int
    n_pressure: int
    n_multiplier: int
    element_dofs: np.ndarray  # (nT, nloc) global dofs, velocity block first
    dof_block: np.ndarray  # (ndofs,) VELOCITY / PRESSURE / MULTIPLIER
    dof_entity: np.ndarray  # (ndofs, 2): (entity dimension, entity index)
    # Taylor-Hood only
    node_coords: Optional[np.ndarray] = None  # velocity Lagrange nodes
    element_nodes: Optional[np.ndarray] = None  # (nT, nb) velocity nodes per element
    facet_nodes: Optional[np.ndarray] = None  # (nF, k+1) velocity nodes per facet
    pressure_coords: Optional[np.ndarray] = None

    @property
    def ndofs(self) -> int:
        return len(self.dof_block)

    @property
    def n_local(self) -> int:
        return self.element_dofs.shape[1]

    @cached_property
    def pressure_dofs(self) -> np.ndarray:
        return np.flatnonzero(self.dof_block == PRESSURE)

    def velocity_pair(self, node: np.ndarray) -> np.ndarray:
        """Global (x, y) velocity dofs of Taylor-Hood nodes."""
        node = np.asarray(node)
        return np.stack([2 * node, 2 * node + 1], axis=-1)


def _lagrange_numbering(mesh: Mesh, k: int):
    """Global node indices per element and per facet for continuous P_k."""
    nV, nF, nT = mesh.n_vertices, mesh.n_facets, mesh.n_triangles
    ne, ni = k - 1, lagrange.n_interior(k)
    tri = mesh.triangles
    cols = [tri[:, 0], tri[:, 1], tri[:, 2]]
    for i in range(3):
        f = mesh.triangle_facets[:, i]
        forward = tri[:, i] < tri[:, (i + 1) % 3]
        for j in range(ne):
            cols.append(np.where(forward, nV + f * ne + j, nV + f * ne + (ne - 1 - j)))
    for j in range(ni):
        cols.append(nV + nF * ne + np.arange(nT) * ni + j)
    elem_nodes = np.column_stack(cols).astype(np.int64)
    n_nodes = nV + nF * ne + nT * ni

    ref = lagrange.reference_nodes(k)
    p = mesh.vertices[tri]
    J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)  # columns
    phys = p[:, None, 0, :] + np.einsum("tij,nj->tni", J, ref)
    coords = np.zeros((n_nodes, 2))
    coords[elem_nodes.ravel()] = phys.reshape(-1, 2)

    fn = [mesh.facets[:, 0], mesh.facets[:, 1]]
    fn += [nV + np.arange(nF) * ne + j for j in range(ne)]
    facet_nodes = np.column_stack(fn).astype(np.int64)

    entity = np.zeros((n_nodes, 2), dtype=np.int64)
    entity[:nV] = np.column_stack([np.zeros(nV), np.arange(nV)])
    entity[nV:nV + nF * ne] = np.column_stack([np.ones(nF * ne), np.repeat(np.arange(nF), ne)])
    entity[nV + nF * ne:] = np.column_stack([np.full(nT * ni, 2), np.repeat(np.arange(nT), ni)])
    return elem_nodes, facet_nodes, coords, entity


def build_space(mesh: Mesh, scheme: str, degree: int) -> Space:
    """Dof map for ``TH`` (k >= 2, up to 3) or ``HDG`` (k = 1)."""
    scheme = scheme.lower()
    if scheme == "th":
        if degree < 2:
            raise SpaceError("Taylor-Hood needs velocity degree k >= 2")
        if degree > 3:
            raise SpaceError("Taylor-Hood is implemented for k = 2, 3")
        vnodes, vfacet, vcoords, ventity = _lagrange_numbering(mesh, degree)
        pnodes, _, pcoords, pentity = _lagrange_numbering(mesh, degree - 1)
        nvn, npn = len(vcoords), len(pcoords)
        nb = vnodes.shape[1]
        vel = np.empty((mesh.n_triangles, 2 * nb), dtype=np.int64)
        vel[:, 0::2] = 2 * vnodes
        vel[:, 1::2] = 2 * vnodes + 1
        element_dofs = np.hstack([vel, 2 * nvn + pnodes])
        dof_block = np.r_[np.full(2 * nvn, VELOCITY), np.full(npn, PRESSURE)]
        dof_entity = np.vstack([np.repeat(ventity, 2, axis=0), pentity])
        return Space(
            mesh, "th", degree, 2 * nvn, npn, 0, element_dofs, dof_block, dof_entity,
            node_coords=vcoords, element_nodes=vnodes, facet_nodes=vfacet, pressure_coords=pcoords,
        )
    if scheme == "hdg":
        if degree != 1:
            raise SpaceError("hybrid DG is implemented for the lowest order k = 1")
        nF, nT = mesh.n_facets, mesh.n_triangles
        tf = mesh.triangle_facets
        element_dofs = np.column_stack(
            [2 * tf[:, 0], 2 * tf[:, 0] + 1, 2 * tf[:, 1], 2 * tf[:, 1] + 1, 2 * tf[:, 2], 2 * tf[:, 2] + 1,
             2 * nF + tf[:, 0], 2 * nF + tf[:, 1], 2 * nF + tf[:, 2], 3 * nF + np.arange(nT)]
        ).astype(np.int64)
        dof_block = np.r_[np.full(2 * nF, VELOCITY), np.full(nF, MULTIPLIER), np.full(nT, PRESSURE)]
        dof_entity = np.vstack([
            np.column_stack([np.ones(2 * nF), np.repeat(np.arange(nF), 2)]),
            np.column_stack([np.ones(nF), np.arange(nF)]),
            np.column_stack([np.full(nT, 2), np.arange(nT)]),
        ]).astype(np.int64)
        return Space(mesh, "hdg", 1, 2 * nF, nT, nF, element_dofs, dof_block, dof_entity)
    raise SpaceError(f"unknown scheme {scheme!r}")
