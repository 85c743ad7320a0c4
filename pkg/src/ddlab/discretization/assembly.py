"""Global and subdomain-local assembly of the constrained saddle-point systems.

Boundary and interface conditions are attached to facets. Dirichlet data is
eliminated symmetrically (identity rows and columns, data lifted into the
right-hand side). Normal/tangential velocity constraints of Taylor-Hood
nodes are eliminated in a rotated normal-tangent frame and the result is
rotated back, so every returned matrix lives in the original dof frame.
When the velocity normal trace is constrained on the whole boundary of a
Stokes problem, the pressure is fixed by one extra Lagrange multiplier for
the constraint ``int p = 0`` (the augmentation dof, index ``space.ndofs``).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.sparse as sp

from ..problems import NORMAL_CONSTRAINED, TANGENTIAL_CONSTRAINED, check_bcs
from . import hdg, taylor_hood
from .quadrature import gauss_segment
from .space import Space

INTERFACE_KINDS = ("robin", "neumann", "inherit", "tvnf", "nvtf", "tdnns", "ndtns")
DEFAULT_TAU = 10.0
DEFAULT_ROBIN_ALPHA = 10.0


class AssemblyError(ValueError):
    pass


@dataclass
class LinearSystem:
    """``A U = F`` on the dof subset ``dofs`` of the global numbering.

    ``dofs`` may include the augmentation index ``space.ndofs``.
    ``constrained`` lists local row indices that were turned into identity
    rows; ``rotation`` is the orthogonal node rotation used for
    normal/tangential constraints (None when unused).
    """

    A: sp.csr_matrix
    F: np.ndarray
    dofs: np.ndarray
    constrained: np.ndarray
    augmented: bool = False
    aug_active: bool = False
    rotation: Optional[sp.csr_matrix] = None
    interface_facets: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    # rows (rotated frame) held only by interface conditions; their data is homogeneous
    interface_constrained: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def size(self) -> int:
        return self.A.shape[0]


def _facet_kind(problem, mesh, facet, interface):
    if mesh.facet_cells[facet, 1] < 0:
        bc = problem.bcs[mesh.tag_of(facet)]
        return bc.kind, bc
    return interface, None


class Discretization:
    """Problem bound to a space; caches the element kernels."""

    def __init__(self, space: Space, problem, tau: float = DEFAULT_TAU):
        if not tau > 0:
            raise AssemblyError(f"stabilisation tau must be positive, got {tau}")
        check_bcs(problem, space.mesh.tag_labels)
        self.space = space
        self.problem = problem
        self.tau = float(tau)
        self.mesh = space.mesh

    @property
    def symmetric_gradient(self) -> bool:
        return self.problem.kind == "elasticity"

    @cached_property
    def bdm(self) -> hdg.BDM1:
        return hdg.BDM1(self.mesh)

    @cached_property
    def kernels(self):
        mesh, problem = self.mesh, self.problem
        visc = problem.viscous_coefficient(mesh.region)
        inv_lam = problem.inverse_lambda(mesh.region)
        if self.space.scheme == "th":
            return taylor_hood.element_kernels(
                mesh, self.space.degree, visc, inv_lam, self.symmetric_gradient, problem.body_force
            )
        return hdg.element_kernels(
            mesh, self.bdm, visc, inv_lam, self.symmetric_gradient, self.tau, problem.body_force
        )

    @cached_property
    def augmented(self) -> bool:
        """Whether the global system carries the mean-zero pressure dof."""
        if self.problem.kind != "stokes":
            return False
        kinds = {self.problem.bcs[t].kind for t in self.mesh.tag_labels}
        return kinds <= ({"dirichlet"} | NORMAL_CONSTRAINED)

    @property
    def ndofs(self) -> int:
        return self.space.ndofs + int(self.augmented)

    @property
    def aug_index(self) -> int:
        return self.space.ndofs

    @cached_property
    def dirichlet(self) -> tuple[np.ndarray, np.ndarray]:
        """Globally Dirichlet-constrained dofs and their values."""
        bf = self.mesh.boundary_facets
        kinds = [_facet_kind(self.problem, self.mesh, f, None) for f in bf]
        sel = [(f, bc) for f, (k, bc) in zip(bf, kinds) if k == "dirichlet"]
        return self._dirichlet_values(sel)

    # ------------------------------------------------------------------
    # facet-level pieces

    def _dirichlet_values(self, facet_bcs):
        space, mesh = self.space, self.mesh
        dofs, vals = [], []
        if space.scheme == "th":
            for f, bc in facet_bcs:
                nodes = space.facet_nodes[f]
                x = space.node_coords[nodes]
                u = np.zeros((len(nodes), 2)) if bc is None or bc.value is None else np.asarray(bc.value(x[:, 0], x[:, 1]))
                dofs.append(space.velocity_pair(nodes).ravel())
                vals.append(u.ravel())
        else:
            nF = mesh.n_facets
            s, w = gauss_segment(12)
            for f, bc in facet_bcs:
                if bc is None or bc.value is None:
                    v = np.zeros(3)
                else:
                    x = hdg.facet_points(mesh, np.array([f]), s)[0]
                    u = np.asarray(bc.value(x[:, 0], x[:, 1]))
                    un = u @ mesh.facet_normals[f]
                    ut = u @ mesh.facet_tangents[f]
                    q = hdg.edge_moments(s)
                    v = np.r_[w @ (un[:, None] * q), w @ ut]
                dofs.append(np.array([2 * f, 2 * f + 1, 2 * nF + f]))
                vals.append(v)
        if not dofs:
            return np.zeros(0, dtype=np.int64), np.zeros(0)
        dofs, vals = np.concatenate(dofs), np.concatenate(vals)
        # shared nodes receive identical data; keep the first occurrence
        dofs, first = np.unique(dofs, return_index=True)
        return dofs, vals[first]

    def _robin_blocks(self, facets, cells, alpha):
        """Facet mass contributions coef * int u.v ds -> list of (dofs, matrix)."""
        space, mesh = self.space, self.mesh
        coef = self.problem.robin_coefficient(mesh.region[cells], alpha)
        L = mesh.facet_lengths[facets]
        out = []
        if space.scheme == "th":
            M = taylor_hood.facet_mass(space.degree)
            M2 = np.kron(M, np.eye(2))
            for f, c, l in zip(facets, coef, L):
                out.append((space.velocity_pair(space.facet_nodes[f]).ravel(), c * l * M2))
        else:
            s, w = gauss_segment(4)
            phi = self.bdm.values(cells, hdg.facet_points(mesh, facets, s))
            M = np.einsum("q,tqai,tqbi->tab", w, phi, phi) * (coef * L)[:, None, None]
            for f, c, m in zip(facets, cells, M):
                out.append((space.element_dofs[c, :6], m))
        return out

    def _facet_load(self, facet, cell, kind, bc):
        """Right-hand side contribution of traction / normal / tangential stress data."""
        if bc is None or bc.value is None:
            return None
        space, mesh = self.space, self.mesh
        s, w = gauss_segment(12)
        L = mesh.facet_lengths[facet]
        n = mesh.facet_normals[facet] * mesh.outward_sign(np.array([facet]), np.array([cell]))[0]
        t = np.array([-n[1], n[0]])
        x = hdg.facet_points(mesh, np.array([facet]), s)[0]
        val = np.asarray(bc.value(x[:, 0], x[:, 1]), dtype=float)
        if kind == "neumann":
            traction = val
        elif kind in TANGENTIAL_CONSTRAINED:  # normal stress data loads v_n
            traction = val[:, None] * n
        else:  # normal-constrained kinds: tangential stress loads v_t
            traction = val[:, None] * t
        if space.scheme == "th":
            B = taylor_hood.facet_basis(space.degree, s)
            vec = L * np.einsum("q,qa,qc->ac", w, B, traction).ravel()
            return space.velocity_pair(space.facet_nodes[facet]).ravel(), vec
        # hdG: normal part tests the BDM trace, tangential part the multiplier
        phi = self.bdm.values(np.array([cell]), x[None])[0]
        tn = traction @ n
        tt = traction @ mesh.facet_tangents[facet]
        vec = np.r_[L * np.einsum("q,qbi,i,q->b", w, phi, n, tn), L * (w @ tt)]
        dofs = np.r_[space.element_dofs[cell, :6], 2 * mesh.n_facets + facet]
        return dofs, vec

    # ------------------------------------------------------------------

    def assemble(
        self,
        elements: Optional[np.ndarray] = None,
        interface: str = "neumann",
        robin_alpha: float = DEFAULT_ROBIN_ALPHA,
    ) -> LinearSystem:
        """Assemble over ``elements`` (all by default).

        Facets on the global boundary keep their boundary condition; facets
        bounding the element set inside the domain receive ``interface``.
        Globally Dirichlet dofs stay constrained in every local system.
        """
        if interface not in INTERFACE_KINDS:
            raise AssemblyError(f"unknown interface condition {interface!r}")
        if interface == "inherit":
            interface = "neumann"
        space, mesh = self.space, self.mesh
        if elements is None:
            elements = np.arange(mesh.n_triangles)
        elements = np.unique(np.asarray(elements, dtype=np.int64))
        if len(elements) == 0:
            raise AssemblyError("empty subdomain")
        Ke, Fe, We = self.kernels
        edofs = space.element_dofs[elements]
        dofs = np.unique(edofs)
        if self.augmented:
            dofs = np.r_[dofs, self.aug_index]
        n = len(dofs)
        g2l = -np.ones(self.ndofs, dtype=np.int64)
        g2l[dofs] = np.arange(n)
        ledofs = g2l[edofs]

        nl = edofs.shape[1]
        rows = np.repeat(ledofs, nl, axis=1).ravel()
        cols = np.tile(ledofs, (1, nl)).ravel()
        A = sp.coo_matrix((Ke[elements].ravel(), (rows, cols)), shape=(n, n)).tocsr()
        F = np.bincount(ledofs.ravel(), weights=Fe[elements].ravel(), minlength=n)
        pw = np.bincount(ledofs.ravel(), weights=We[elements].ravel(), minlength=n)

        # facets bounding the element set
        inside = np.zeros(mesh.n_triangles, dtype=bool)
        inside[elements] = True
        fc = mesh.facet_cells
        in0 = inside[fc[:, 0]]
        in1 = (fc[:, 1] >= 0) & inside[np.maximum(fc[:, 1], 0)]
        bfacets = np.flatnonzero(in0 ^ in1)
        bcells = np.where(in0[bfacets], fc[bfacets, 0], fc[bfacets, 1])
        kinds = [_facet_kind(self.problem, mesh, f, interface) for f in bfacets]
        is_interface = fc[bfacets, 1] >= 0

        extra = []
        robin = [i for i, (k, _) in enumerate(kinds) if k == "robin"]
        if robin:
            idx = np.array(robin)
            extra += self._robin_blocks(bfacets[idx], bcells[idx], robin_alpha)
        if extra:
            r, c, v = [], [], []
            for d, m in extra:
                ld = g2l[d]
                r.append(np.repeat(ld, len(ld)))
                c.append(np.tile(ld, len(ld)))
                v.append(m.ravel())
            A = A + sp.coo_matrix((np.concatenate(v), (np.concatenate(r), np.concatenate(c))), shape=(n, n)).tocsr()
        for f, cell, (k, bc) in zip(bfacets, bcells, kinds):
            if k in ("dirichlet", "robin"):
                continue
            load = self._facet_load(f, cell, k, bc)
            if load is not None:
                np.add.at(F, g2l[load[0]], load[1])

        # pressure augmentation
        aug_active = False
        if self.augmented:
            aug_active = all(k == "dirichlet" or k in NORMAL_CONSTRAINED for k, _ in kinds)
            ia = n - 1
            if aug_active:
                w = pw.copy()
                w[ia] = 0.0
                nz = np.flatnonzero(w)
                A = A + sp.coo_matrix(
                    (np.r_[w[nz], w[nz]], (np.r_[np.full(len(nz), ia), nz], np.r_[nz, np.full(len(nz), ia)])),
                    shape=(n, n),
                ).tocsr()
            else:
                A = A + sp.coo_matrix(([1.0], ([ia], [ia])), shape=(n, n)).tocsr()

        # constraints
        dir_facets = [(f, bc) for f, (k, bc) in zip(bfacets, kinds) if k == "dirichlet"]
        cdofs, cvals = self._dirichlet_values(dir_facets)
        gd, gv = self.dirichlet
        keep = g2l[gd] >= 0
        cdofs, cvals = np.r_[cdofs, gd[keep]], np.r_[cvals, gv[keep]]
        cdofs, first = np.unique(cdofs, return_index=True)
        cvals = cvals[first]
        fixed = np.zeros(n, dtype=bool)
        values = np.zeros(n)
        fixed[g2l[cdofs]] = True
        values[g2l[cdofs]] = cvals

        Q = None
        tang = [(f, c, i) for f, c, i, (k, _) in zip(bfacets, bcells, is_interface, kinds) if k in TANGENTIAL_CONSTRAINED]
        norm = [(f, c, i) for f, c, i, (k, _) in zip(bfacets, bcells, is_interface, kinds) if k in NORMAL_CONSTRAINED]
        boundary_fixed = fixed.copy()
        if space.scheme == "hdg":
            nF = mesh.n_facets
            for f, _, itf in tang:
                fixed[g2l[2 * nF + f]] = True
                boundary_fixed[g2l[2 * nF + f]] |= not itf
            for f, _, itf in norm:
                fixed[g2l[[2 * f, 2 * f + 1]]] = True
                boundary_fixed[g2l[[2 * f, 2 * f + 1]]] |= not itf
        elif tang or norm:
            Q, rot_fixed = self._rotation(g2l, n, [t[:2] for t in tang], [t[:2] for t in norm], fixed)
            tb = [t[:2] for t in tang if not t[2]]
            nb = [t[:2] for t in norm if not t[2]]
            if tb or nb:
                boundary_fixed |= self._rotation(g2l, n, tb, nb, boundary_fixed)[1]
            fixed |= rot_fixed
        interface_rows = np.flatnonzero(fixed & ~boundary_fixed)

        if Q is not None:
            A = (Q.T @ A @ Q).tocsr()
            F = Q.T @ F
        c = np.flatnonzero(fixed)
        F = F - A[:, c] @ values[c]
        keepd = sp.diags((~fixed).astype(float))
        A = (keepd @ A @ keepd + sp.diags(fixed.astype(float))).tocsr()
        F[c] = values[c]
        if Q is not None:
            A = (Q @ A @ Q.T).tocsr()
            F = Q @ F
        A.sum_duplicates()
        A.eliminate_zeros()
        A.sort_indices()
        return LinearSystem(
            A=A, F=F, dofs=dofs, constrained=c, augmented=self.augmented, aug_active=aug_active,
            rotation=Q, interface_facets=bfacets[is_interface], interface_constrained=interface_rows,
        )

    def _rotation(self, g2l, n, tang, norm, fixed):
        """Orthogonal node rotation into (normal, tangent) components.

        Returns the rotation and the local dofs fixed in the rotated frame.
        Nodes carrying Dirichlet data are left alone; a node touched by both a
        tangential and a normal constraint has both components fixed.
        """
        space, mesh = self.space, self.mesh
        acc = {"t": {}, "n": {}}
        for key, items in (("t", tang), ("n", norm)):
            for f, cell in items:
                nvec = mesh.facet_normals[f] * mesh.outward_sign(np.array([f]), np.array([cell]))[0]
                for node in space.facet_nodes[f]:
                    acc[key][int(node)] = acc[key].get(int(node), 0.0) + nvec
        nodes = sorted(set(acc["t"]) | set(acc["n"]))
        rot_fixed = np.zeros(n, dtype=bool)
        rows, cols, vals = [], [], []
        rotated = np.zeros(n, dtype=bool)
        for node in nodes:
            ix, iy = g2l[2 * node], g2l[2 * node + 1]
            if fixed[ix] and fixed[iy]:
                continue
            if node in acc["t"] and node in acc["n"]:
                rot_fixed[[ix, iy]] = True
                continue
            key = "t" if node in acc["t"] else "n"
            nv = acc[key][node]
            nv = nv / np.linalg.norm(nv)
            tv = np.array([-nv[1], nv[0]])
            # column 0 of the block is the normal, column 1 the tangent
            rows += [ix, iy, ix, iy]
            cols += [ix, ix, iy, iy]
            vals += [nv[0], nv[1], tv[0], tv[1]]
            rotated[[ix, iy]] = True
            rot_fixed[iy if key == "t" else ix] = True
        ident = np.flatnonzero(~rotated)
        Q = sp.coo_matrix(
            (np.r_[vals, np.ones(len(ident))], (np.r_[rows, ident], np.r_[cols, ident])), shape=(n, n)
        ).tocsr()
        return Q, rot_fixed

    # ------------------------------------------------------------------
    # post-processing

    def velocity_at(self, U: np.ndarray, ref_pts: np.ndarray) -> np.ndarray:
        """Velocity field of the global vector U at reference points of every triangle -> (nT, nq, 2)."""
        space, mesh = self.space, self.mesh
        if space.scheme == "th":
            from . import lagrange

            phi, _ = lagrange.evaluate(space.degree, ref_pts)
            vel = U[space.element_dofs[:, : 2 * phi.shape[1]]].reshape(mesh.n_triangles, -1, 2)
            return np.einsum("qa,tac->tqc", phi, vel)
        x = taylor_hood.physical_points(mesh, ref_pts)
        phi = self.bdm.values(np.arange(mesh.n_triangles), x)
        return np.einsum("tqbi,tb->tqi", phi, U[space.element_dofs[:, :6]])

    def velocity_l2_error(self, U: np.ndarray, exact) -> float:
        from .quadrature import gauss_triangle

        qp, qw = gauss_triangle(2 * self.space.degree + 6)
        uh = self.velocity_at(U, qp)
        x = taylor_hood.physical_points(self.mesh, qp)
        ue = np.asarray(exact(x[..., 0], x[..., 1]))
        area2 = 2 * np.abs(self.mesh.signed_areas)
        err = np.einsum("t,q,tqi->", area2, qw, (uh - ue) ** 2)
        return float(np.sqrt(err))


def assemble_global(disc: Discretization) -> LinearSystem:
    return disc.assemble()


def assemble_taylor_hood(space: Space, problem) -> LinearSystem:
    if space.scheme != "th":
        raise AssemblyError("assemble_taylor_hood needs a Taylor-Hood space")
    return Discretization(space, problem).assemble()


def assemble_hdg(space: Space, problem, tau: float = DEFAULT_TAU) -> LinearSystem:
    if space.scheme != "hdg":
        raise AssemblyError("assemble_hdg needs a hybrid DG space")
    return Discretization(space, problem, tau).assemble()


def assemble_local(
    disc: Discretization, elements: np.ndarray, interface: str, robin_alpha: float = DEFAULT_ROBIN_ALPHA
) -> LinearSystem:
    return disc.assemble(elements, interface, robin_alpha)


def write_matrix_market(A: sp.spmatrix) -> str:
    """Coordinate MatrixMarket text with 17 significant digits (1-based)."""
    A = sp.coo_matrix(A)
    order = np.lexsort((A.col, A.row))
    lines = ["%%MatrixMarket matrix coordinate real general", f"{A.shape[0]} {A.shape[1]} {A.nnz}"]
    lines += [f"{r + 1} {c + 1} {v:.17g}" for r, c, v in zip(A.row[order], A.col[order], A.data[order])]
    return "\n".join(lines) + "\n"
