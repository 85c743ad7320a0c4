"""Element partitions, overlap growth, restriction operators and the
partition of unity (smooth cutoff or Boolean)."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .discretization.space import Space
from .mesh import Mesh

PARTITION_METHODS = ("graph", "uniform_grid")
BALANCE_BAND = 1.3


class DecompositionError(ValueError):
    pass


# ----------------------------------------------------------------------
# element partitions


def _grid_shape(n: int, width: float, height: float) -> tuple[int, int]:
    """Factor n = a * b (a columns, b rows) with cells closest to square."""
    best = None
    for a in range(1, n + 1):
        if n % a:
            continue
        b = n // a
        score = abs(np.log((width / a) / (height / b)))
        if best is None or score < best[0] - 1e-12:
            best = (score, a, b)
    return best[1], best[2]


def _uniform_grid(mesh: Mesh, n: int) -> np.ndarray:
    x0, y0 = mesh.vertices.min(axis=0)
    x1, y1 = mesh.vertices.max(axis=0)
    a, b = _grid_shape(n, x1 - x0, y1 - y0)
    c = mesh.centroids
    ix = np.clip(np.floor((c[:, 0] - x0) / (x1 - x0) * a).astype(int), 0, a - 1)
    iy = np.clip(np.floor((c[:, 1] - y0) / (y1 - y0) * b).astype(int), 0, b - 1)
    owner = iy * a + ix
    counts = np.bincount(owner, minlength=n)
    if np.any(counts == 0):
        raise DecompositionError(f"uniform {a}x{b} grid leaves empty subdomains on this domain; choose another N")
    return owner


def _edge_adjacency(mesh: Mesh) -> sp.csr_matrix:
    interior = mesh.facet_cells[:, 1] >= 0
    a, b = mesh.facet_cells[interior].T
    nT = mesh.n_triangles
    return sp.coo_matrix((np.ones(2 * len(a)), (np.r_[a, b], np.r_[b, a])), shape=(nT, nT)).tocsr()


def _bisect(centroids: np.ndarray, cell: float, elems: np.ndarray, parts: int, first: int, owner: np.ndarray):
    if parts == 1:
        owner[elems] = first
        return
    c = centroids[elems]
    span = c.max(axis=0) - c.min(axis=0)
    axis = 0 if span[0] >= span[1] else 1
    # sort by grid column (quantized), then along the column, so the cut is a staircase
    column = np.floor(c[:, axis] / cell + 1e-9)
    order = np.lexsort((c[:, axis], c[:, 1 - axis], column))
    left = parts // 2
    cut = int(round(len(elems) * left / parts))
    _bisect(centroids, cell, elems[order[:cut]], left, first, owner)
    _bisect(centroids, cell, elems[order[cut:]], parts - left, first + left, owner)


def _repair_connectivity(adj: sp.csr_matrix, owner: np.ndarray, n: int) -> None:
    """Hand every detached fragment of a part to the neighbouring part it touches most."""
    for _ in range(10):
        changed = False
        for p in range(n):
            idx = np.flatnonzero(owner == p)
            ncomp, labels = connected_components(adj[idx][:, idx], directed=False)
            if ncomp <= 1:
                continue
            main = np.argmax(np.bincount(labels))
            for comp in range(ncomp):
                if comp == main:
                    continue
                frag = idx[labels == comp]
                nbr = owner[adj[frag].indices]
                nbr = nbr[nbr != p]
                if len(nbr) == 0:
                    continue
                owner[frag] = np.bincount(nbr).argmax()
                changed = True
        if not changed:
            return


def _rebalance(adj: sp.csr_matrix, owner: np.ndarray, n: int) -> None:
    """Diffuse elements across part boundaries until the band holds.

    Each move hands one element of part p to an edge-adjacent part q with
    ``size(p) >= size(q) + 2``, largest gap first, and only when p stays
    connected. Every move lowers the sum of squared sizes, so this ends.
    """
    coo = adj.tocoo()
    for _ in range(len(owner)):
        counts = np.bincount(owner, minlength=n)
        if counts.max() <= BALANCE_BAND * counts.min():
            return
        t_all, nb = coo.row, coo.col
        p, q = owner[t_all], owner[nb]
        gap = counts[p] - counts[q]
        ok = gap >= 2
        t_all, p, q, gap = t_all[ok], p[ok], q[ok], gap[ok]
        moved = False
        for k in np.lexsort((q, t_all, -gap)):
            t = t_all[k]
            rest = np.flatnonzero(owner == p[k])
            rest = rest[rest != t]
            if connected_components(adj[rest][:, rest], directed=False)[0] == 1:
                owner[t] = q[k]
                moved = True
                break
        if not moved and not _resplit_smallest(adj, owner, counts):
            return


def _connected(adj: sp.csr_matrix, idx: np.ndarray) -> bool:
    return len(idx) > 0 and connected_components(adj[idx][:, idx], directed=False)[0] == 1


def _resplit_smallest(adj: sp.csr_matrix, owner: np.ndarray, counts: np.ndarray) -> bool:
    """Merge the smallest part with a neighbour and cut the union in two
    halves along a breadth-first order from a pseudo-peripheral element."""
    q = int(np.argmin(counts))
    members = np.flatnonzero(owner == q)
    nbrs = np.unique(owner[adj[members].indices])
    for p in sorted(nbrs[nbrs != q], key=lambda r: (-counts[r], r)):
        union = np.flatnonzero((owner == q) | (owner == p))
        sub = adj[union][:, union]
        far = breadth_first_order(sub, 0, directed=False, return_predecessors=False)[-1]
        order = breadth_first_order(sub, far, directed=False, return_predecessors=False)
        half = len(union) // 2
        for first, second in ((order[:half], order[half:]), (order[-half:], order[:-half])):
            if _connected(adj, union[second]):
                owner[union[first]] = q
                owner[union[second]] = p
                return True
    return False


def _smooth(adj: sp.csr_matrix, owner: np.ndarray, n: int) -> None:
    """Greedy boundary smoothing: move an element whose edge neighbours mostly
    belong to one other part, as long as the balance band is kept."""
    counts = np.bincount(owner, minlength=n).astype(float)
    target = counts.mean()
    for t in range(len(owner)):
        nbr = owner[adj.indices[adj.indptr[t]:adj.indptr[t + 1]]]
        p = owner[t]
        # only leaves of their own part move, which never disconnects it
        if len(nbr) < 2 or np.count_nonzero(nbr == p) > 1:
            continue
        vals, cnt = np.unique(nbr[nbr != p], return_counts=True)
        if len(vals) == 0 or cnt.max() < 2:
            continue
        best = vals[np.argmax(cnt)]
        if counts[p] - 1 < target / 1.1 or counts[best] + 1 > target * 1.1:
            continue
        owner[t] = best
        counts[p] -= 1
        counts[best] += 1


def partition_elements(mesh: Mesh, n: int, method: str = "graph") -> np.ndarray:
    """Owner subdomain of every triangle.

    ``uniform_grid`` bins centroids into an a x b grid over the bounding box
    (row-major from the lower-left bin). ``graph`` is recursive coordinate
    bisection on centroids followed by boundary smoothing and connectivity
    repair.
    """
    if int(n) != n or n < 1:
        raise DecompositionError(f"subdomain count must be a positive integer, got {n!r}")
    n = int(n)
    if n > mesh.n_triangles:
        raise DecompositionError("more subdomains than triangles")
    if n == 1:
        return np.zeros(mesh.n_triangles, dtype=np.int64)
    if method == "uniform_grid":
        return _uniform_grid(mesh, n).astype(np.int64)
    if method != "graph":
        raise DecompositionError(f"unknown partition method {method!r}")
    owner = np.zeros(mesh.n_triangles, dtype=np.int64)
    _bisect(mesh.centroids, mesh.facet_lengths.min(), np.arange(mesh.n_triangles), n, 0, owner)
    adj = _edge_adjacency(mesh)
    _smooth(adj, owner, n)
    _repair_connectivity(adj, owner, n)
    _rebalance(adj, owner, n)
    counts = np.bincount(owner, minlength=n)
    if counts.min() == 0 or counts.max() > BALANCE_BAND * counts.min():
        raise DecompositionError(f"graph partition out of balance band: sizes {counts.min()}..{counts.max()}")
    return owner


def expand_overlap(mesh: Mesh, owner: np.ndarray, layers: int) -> list[np.ndarray]:
    """Element sets grown ``layers`` times by all triangles sharing a vertex."""
    if layers < 0:
        raise DecompositionError("overlap must be non-negative")
    VT = mesh.vertex_triangles.astype(np.int32)
    out = []
    for p in range(int(owner.max()) + 1):
        mask = owner == p
        for _ in range(layers):
            touched = (VT @ mask.astype(np.int32)) > 0
            mask = (VT.T @ touched.astype(np.int32)) > 0
        out.append(np.flatnonzero(mask))
    return out


# ----------------------------------------------------------------------
# dof-level operators

PU_KINDS = ("smooth", "boolean")
PU_BITS = 30  # smooth weights are integers over 2**PU_BITS


@dataclass(frozen=True, eq=False)
class Decomposition:
    element_owner: np.ndarray
    overlap: int
    overlapped_elements: list
    dof_sets: list  # sorted global dofs per subdomain (augmentation dof last when present)
    pu_numerators: list  # integer weights aligned with dof_sets
    pu_scale: int  # D_i = pu_numerators[i] / pu_scale
    ndofs: int
    method: str = "graph"
    pu_kind: str = "smooth"

    @property
    def n_subdomains(self) -> int:
        return len(self.dof_sets)

    @cached_property
    def pu_weights(self) -> list:
        return [w / self.pu_scale for w in self.pu_numerators]

    def restriction(self, i: int) -> sp.csr_matrix:
        d = self.dof_sets[i]
        return sp.csr_matrix((np.ones(len(d)), (np.arange(len(d)), d)), shape=(len(d), self.ndofs))

    def partition_of_unity_sum(self) -> sp.csr_matrix:
        """sum_i R_i^T D_i R_i scaled by ``pu_scale``, in integer arithmetic."""
        total = sp.csr_matrix((self.ndofs, self.ndofs), dtype=np.int64)
        for d, w in zip(self.dof_sets, self.pu_numerators):
            total = total + sp.csr_matrix((w, (d, d)), shape=(self.ndofs, self.ndofs))
        return total

    def partition_of_unity_is_exact(self) -> bool:
        diff = self.partition_of_unity_sum() - self.pu_scale * sp.identity(self.ndofs, dtype=np.int64, format="csr")
        return diff.count_nonzero() == 0

    def partition_csv(self) -> str:
        lines = ["triangle,owner"] + [f"{t},{p}" for t, p in enumerate(self.element_owner)]
        return "\n".join(lines) + "\n"


def build_restrictions(space: Space, overlapped: list, augmented: bool = False) -> list[np.ndarray]:
    sets = []
    for elems in overlapped:
        d = np.unique(space.element_dofs[elems])
        sets.append(np.r_[d, space.ndofs] if augmented else d)
    return sets


def boolean_weights(space: Space, owner: np.ndarray, dof_sets: list, augmented: bool = False) -> list:
    """0/1 weights: each dof goes to the lowest subdomain whose own
    (non-overlapped) triangles carry it; the augmentation dof to subdomain 0."""
    n = space.ndofs + int(augmented)
    dof_owner = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
    nl = space.element_dofs.shape[1]
    np.minimum.at(dof_owner, space.element_dofs.ravel(), np.repeat(owner, nl))
    if augmented:
        dof_owner[-1] = 0
    return [(dof_owner[d] == i).astype(np.int64) for i, d in enumerate(dof_sets)]


def _local_barycentrics(space: Space) -> np.ndarray:
    """(nloc, 3) barycentric position of every local dof inside its triangle."""
    if space.scheme == "th":
        from .discretization.lagrange import reference_nodes

        def bary(k):
            x = reference_nodes(k)
            return np.column_stack([1 - x[:, 0] - x[:, 1], x[:, 0], x[:, 1]])

        return np.vstack([np.repeat(bary(space.degree), 2, axis=0), bary(space.degree - 1)])
    mid = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
    return np.vstack([np.repeat(mid, 2, axis=0), mid, [[1 / 3, 1 / 3, 1 / 3]]])


def cutoff_functions(space: Space, owner: np.ndarray, overlapped: list, augmented: bool = False) -> list:
    """Per subdomain, a piecewise-linear cutoff evaluated at every dof: 1 on
    the owned triangles, falling linearly to 0 across the overlap layers."""
    mesh = space.mesh
    VT = mesh.vertex_triangles.astype(np.int32)
    bary = _local_barycentrics(space)
    n = space.ndofs + int(augmented)
    chis = []
    for i, elems in enumerate(overlapped):
        in_set = np.zeros(mesh.n_triangles, dtype=bool)
        in_set[elems] = True
        mask = owner == i
        level = np.full(mesh.n_vertices, -1)
        level[np.unique(mesh.triangles[mask])] = 0
        layers = 0
        while True:
            touched = (VT @ mask.astype(np.int32)) > 0
            grown = ((VT.T @ touched.astype(np.int32)) > 0) & in_set
            if grown.sum() == mask.sum():
                break
            layers += 1
            new = np.unique(mesh.triangles[grown])
            level[new[level[new] < 0]] = layers
            mask = grown
        vals = np.where(level >= 0, 1.0 - level / max(layers, 1), 0.0)
        chi = np.zeros(n)
        chi[space.element_dofs[elems].ravel()] = np.clip(vals[mesh.triangles[elems]] @ bary.T, 0.0, 1.0).ravel()
        if augmented:
            chi[-1] = 1.0 if i == 0 else 0.0
        chis.append(chi)
    return chis


def smooth_weights(space: Space, owner: np.ndarray, overlapped: list, dof_sets: list,
                   augmented: bool = False, bits: int = PU_BITS) -> list:
    """Integer numerators of chi_i / sum_j chi_j over 2**bits.

    Rounding is floor plus largest-remainder correction, so the numerators of
    every dof sum to exactly 2**bits.
    """
    chis = cutoff_functions(space, owner, overlapped, augmented)
    total = np.sum(chis, axis=0)
    scale = 1 << bits
    sub = np.concatenate([np.full(len(d), i) for i, d in enumerate(dof_sets)])
    dof = np.concatenate(dof_sets)
    exact = np.concatenate([chis[i][d] / total[d] for i, d in enumerate(dof_sets)]) * scale
    num = np.floor(exact).astype(np.int64)
    deficit = scale - np.bincount(dof, weights=num, minlength=len(total)).astype(np.int64)
    # hand the missing units to the entries with the largest remainders
    order = np.lexsort((sub, -(exact - num), dof))
    start = np.searchsorted(dof[order], dof[order])
    rank = np.arange(len(order)) - start
    num[order[rank < deficit[dof[order]]]] += 1
    out, pos = [], 0
    for d in dof_sets:
        out.append(num[pos:pos + len(d)])
        pos += len(d)
    return out


def decompose(space: Space, n: int, overlap: int = 1, method: str = "graph", augmented: bool = False,
              owner: np.ndarray = None, pu: str = "smooth") -> Decomposition:
    mesh = space.mesh
    if owner is None:
        owner = partition_elements(mesh, n, method)
    overlapped = expand_overlap(mesh, owner, overlap)
    sets = build_restrictions(space, overlapped, augmented)
    if pu == "smooth":
        num, scale = smooth_weights(space, owner, overlapped, sets, augmented), 1 << PU_BITS
    elif pu == "boolean":
        num, scale = boolean_weights(space, owner, sets, augmented), 1
    else:
        raise DecompositionError(f"unknown partition of unity {pu!r}; choose from {PU_KINDS}")
    return Decomposition(owner, overlap, overlapped, sets, num, scale, space.ndofs + int(augmented), method, pu)
