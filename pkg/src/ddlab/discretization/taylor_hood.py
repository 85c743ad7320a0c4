"""Element and facet kernels for Taylor-Hood P_k / P_{k-1} elements.

Local element dof order: velocity (node a, component c) at 2*a + c for the
P_k nodes, followed by the P_{k-1} pressure nodes.
"""
from __future__ import annotations

import numpy as np

from ..mesh import Mesh
from . import lagrange
from .quadrature import gauss_segment, gauss_triangle


def geometry(mesh: Mesh):
    """Affine maps: origin (nT,2), Jacobian J[t,i,j] = dx_i/dxi_j, inverse, |det|."""
    p = mesh.vertices[mesh.triangles]
    J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    Jinv = np.linalg.inv(J)
    return p[:, 0], J, Jinv, np.abs(det)


def physical_points(mesh: Mesh, ref_pts: np.ndarray) -> np.ndarray:
    x0, J, _, _ = geometry(mesh)
    return x0[:, None, :] + np.einsum("tij,qj->tqi", J, ref_pts)


def velocity_block(grads: np.ndarray, w: np.ndarray, viscous: np.ndarray, symmetric: bool) -> np.ndarray:
    """Vector Laplacian (``symmetric=False``) or 2*mu*eps:eps block.

    ``grads`` holds physical gradients (nT, nq, nb, 2); ``w`` the quadrature
    weights already multiplied by |det J| (nT, nq).
    """
    nT, _, nb, _ = grads.shape
    Kd = np.einsum("tq,tqax,tqby->tabxy", w, grads, grads)  # sum_q G[a,x] G[b,y]
    Kg = np.einsum("tabxx->tab", Kd)
    out = np.zeros((nT, nb, 2, nb, 2))
    for c in range(2):
        out[:, :, c, :, c] += Kg
    if symmetric:
        # row (a, c), column (b, d): G[a, d] G[b, c]
        out += np.transpose(Kd, (0, 1, 4, 2, 3))
    out *= viscous[:, None, None, None, None]
    return out.reshape(nT, 2 * nb, 2 * nb)


def element_kernels(mesh: Mesh, k: int, viscous, inverse_lambda, symmetric: bool, body_force):
    """Element matrices (nT, n, n), loads (nT, n) and pressure weights (nT, n)."""
    qp, qw = gauss_triangle(2 * k + 2)
    _, _, Jinv, adet = geometry(mesh)
    phi, dphi = lagrange.evaluate(k, qp)
    psi, _ = lagrange.evaluate(k - 1, qp)
    nb, npb = phi.shape[1], psi.shape[1]
    G = np.einsum("qbi,tij->tqbj", dphi, Jinv)
    w = adet[:, None] * qw[None, :]
    nT = mesh.n_triangles
    n = 2 * nb + npb
    Ke = np.zeros((nT, n, n))
    Ke[:, :2 * nb, :2 * nb] = velocity_block(G, w, viscous, symmetric)
    # -int q div v; velocity dof (a, c) has divergence G[a, c]
    Bt = -np.einsum("tq,tqac,qm->tacm", w, G, psi).reshape(nT, 2 * nb, npb)
    Ke[:, :2 * nb, 2 * nb:] = Bt
    Ke[:, 2 * nb:, :2 * nb] = np.transpose(Bt, (0, 2, 1))
    Mp = np.einsum("tq,qm,ql->tml", w, psi, psi)
    Ke[:, 2 * nb:, 2 * nb:] = -inverse_lambda[:, None, None] * Mp

    x = physical_points(mesh, qp)
    f = np.asarray(body_force(x[..., 0], x[..., 1]), dtype=float)
    Fe = np.zeros((nT, n))
    Fe[:, :2 * nb] = np.einsum("tq,qa,tqc->tac", w, phi, f).reshape(nT, 2 * nb)
    We = np.zeros((nT, n))
    We[:, 2 * nb:] = np.einsum("tq,qm->tm", w, psi)
    return Ke, Fe, We


def facet_parameters(k: int) -> np.ndarray:
    """Positions in [0, 1] (low to high vertex) of the facet nodes in facet-node order."""
    return np.r_[0.0, 1.0, np.arange(1, k) / k]


def facet_basis(k: int, s: np.ndarray) -> np.ndarray:
    """1D Lagrange basis through the facet nodes, evaluated at ``s`` -> (len(s), k+1)."""
    nodes = facet_parameters(k)
    V = np.vander(nodes, k + 1, increasing=True)
    return np.vander(s, k + 1, increasing=True) @ np.linalg.inv(V)


def facet_mass(k: int) -> np.ndarray:
    """Reference P_k mass matrix on a unit-length facet."""
    s, w = gauss_segment(2 * k)
    B = facet_basis(k, s)
    return np.einsum("q,qa,qb->ab", w, B, B)
