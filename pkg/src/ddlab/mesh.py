"""Structured triangulations of the rectilinear test domains.

Every axis-aligned cell of side ``1/resolution`` is split along its
lower-left to upper-right diagonal, so meshes are deterministic and
conforming across the blocks that make up the L- and T-shaped domains.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.sparse as sp

SHAPE_KINDS = ("unit_square", "rectangle", "l_shape", "t_shape")
BOUNDARY_RULES = ("sides", "cavity", "l_clamp", "beam_clamp", "t_inflow")

_GEOM_TOL = 1e-10


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class DomainShape:
    """Geometric recipe for a mesh.

    ``layers`` is ``(count, axis)`` and splits the domain into equal material
    bands stacked along ``axis`` ("x" or "y"). ``boundary_rule`` names the
    tagging rule applied to boundary facets (see :func:`tag_boundary`).
    """

    kind: str = "unit_square"
    width: float = 1.0
    height: float = 1.0
    layers: Optional[tuple[int, str]] = None
    boundary_rule: str = "sides"

    def __post_init__(self):
        if self.kind not in SHAPE_KINDS:
            raise MeshError(f"unknown shape kind {self.kind!r}")
        if self.boundary_rule not in BOUNDARY_RULES:
            raise MeshError(f"unknown boundary rule {self.boundary_rule!r}")
        if self.kind == "rectangle" and (self.width <= 0 or self.height <= 0):
            raise MeshError("rectangle needs positive width and height")
        if self.layers is not None:
            count, axis = self.layers
            if count < 1 or axis not in ("x", "y"):
                raise MeshError(f"bad layer spec {self.layers!r}")
            if self.kind in ("l_shape", "t_shape"):
                raise MeshError(f"material layers are not supported on {self.kind}")

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        if self.kind == "unit_square":
            return 0.0, 0.0, 1.0, 1.0
        if self.kind == "rectangle":
            return 0.0, 0.0, float(self.width), float(self.height)
        if self.kind == "l_shape":
            return -1.0, -1.0, 1.0, 1.0
        return 0.0, -1.0, 1.5, 1.0

    @property
    def area(self) -> float:
        if self.kind == "unit_square":
            return 1.0
        if self.kind == "rectangle":
            return float(self.width * self.height)
        if self.kind == "l_shape":
            return 3.0
        return 1.5 + 0.5 * 2.0 - 0.5 * 1.0

    def contains_cell(self, cx: np.ndarray, cy: np.ndarray) -> np.ndarray:
        if self.kind == "l_shape":
            return ~((cx > 0) & (cy < 0))
        if self.kind == "t_shape":
            return ((cy > 0) & (cy < 1)) | ((cx > 0.5) & (cx < 1.0))
        return np.ones_like(cx, dtype=bool)


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray  # (nV, 2)
    triangles: np.ndarray  # (nT, 3), counter-clockwise
    facets: np.ndarray  # (nF, 2), low vertex index first
    facet_cells: np.ndarray  # (nF, 2), second entry -1 on the boundary
    triangle_facets: np.ndarray  # (nT, 3), local edge i joins vertex i and i+1
    region: np.ndarray  # (nT,) material id
    boundary_tags: dict = field(default_factory=dict)  # facet -> label
    shape: Optional[DomainShape] = None
    resolution: int = 0

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_facets(self) -> int:
        return len(self.facets)

    @cached_property
    def boundary_facets(self) -> np.ndarray:
        return np.flatnonzero(self.facet_cells[:, 1] < 0)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def diameters(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d = [np.linalg.norm(p[:, i] - p[:, (i + 1) % 3], axis=1) for i in range(3)]
        return np.max(d, axis=0)

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    @cached_property
    def facet_lengths(self) -> np.ndarray:
        p = self.vertices[self.facets]
        return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)

    @cached_property
    def facet_tangents(self) -> np.ndarray:
        """Unit tangent pointing from the low to the high vertex index."""
        p = self.vertices[self.facets]
        t = p[:, 1] - p[:, 0]
        return t / np.linalg.norm(t, axis=1)[:, None]

    @cached_property
    def facet_normals(self) -> np.ndarray:
        """Global facet normal: the tangent rotated clockwise."""
        t = self.facet_tangents
        return np.column_stack([t[:, 1], -t[:, 0]])

    @cached_property
    def facet_midpoints(self) -> np.ndarray:
        return self.vertices[self.facets].mean(axis=1)

    def outward_sign(self, facets: np.ndarray, cells: np.ndarray) -> np.ndarray:
        """+1 where the global normal of ``facets`` points out of ``cells``."""
        d = self.facet_midpoints[facets] - self.centroids[cells]
        return np.where(np.einsum("ij,ij->i", d, self.facet_normals[facets]) > 0, 1.0, -1.0)

    @cached_property
    def vertex_triangles(self) -> sp.csr_matrix:
        """Incidence matrix (nV, nT)."""
        rows = self.triangles.ravel()
        cols = np.repeat(np.arange(self.n_triangles), 3)
        data = np.ones(len(rows), dtype=np.int8)
        return sp.csr_matrix((data, (rows, cols)), shape=(self.n_vertices, self.n_triangles))

    @cached_property
    def triangle_neighbors(self) -> list[np.ndarray]:
        """Edge-sharing neighbours of each triangle."""
        interior = self.facet_cells[:, 1] >= 0
        a, b = self.facet_cells[interior].T
        adj = sp.coo_matrix(
            (np.ones(2 * len(a)), (np.r_[a, b], np.r_[b, a])),
            shape=(self.n_triangles, self.n_triangles),
        ).tocsr()
        return [adj.indices[adj.indptr[i]:adj.indptr[i + 1]] for i in range(self.n_triangles)]

    def tag_of(self, facet: int) -> str:
        return self.boundary_tags[int(facet)]

    @property
    def tag_labels(self) -> list[str]:
        return sorted(set(self.boundary_tags.values()))

    def facets_with_tag(self, label: str) -> np.ndarray:
        return np.array(sorted(f for f, t in self.boundary_tags.items() if t == label), dtype=int)


def build_structured_mesh(shape: DomainShape, resolution: int) -> Mesh:
    """Triangulate ``shape`` with ``resolution`` cells per unit length."""
    if int(resolution) != resolution or resolution < 1:
        raise MeshError(f"resolution must be a positive integer, got {resolution!r}")
    n = int(resolution)
    x0, y0, x1, y1 = shape.bbox
    nx_f, ny_f = (x1 - x0) * n, (y1 - y0) * n
    nx, ny = int(round(nx_f)), int(round(ny_f))
    if abs(nx - nx_f) > 1e-9 or abs(ny - ny_f) > 1e-9:
        raise MeshError(f"{shape.kind} extents are not multiples of 1/{n}")
    if shape.kind == "t_shape" and n % 2:
        raise MeshError("t_shape needs an even resolution (grid lines at x=0.5 and x=1)")
    if shape.layers is not None:
        count, axis = shape.layers
        cells_along = ny if axis == "y" else nx
        if cells_along % count:
            raise MeshError(f"{count} layers do not align with {cells_along} grid cells along {axis}")

    jj, ii = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    keep = shape.contains_cell(x0 + (ii + 0.5) / n, y0 + (jj + 0.5) / n)
    ii, jj = ii[keep], jj[keep]

    gid = lambda i, j: j * (nx + 1) + i  # noqa: E731
    ll, lr, ur, ul = gid(ii, jj), gid(ii + 1, jj), gid(ii + 1, jj + 1), gid(ii, jj + 1)
    tris = np.empty((2 * len(ii), 3), dtype=np.int64)
    tris[0::2] = np.column_stack([ll, lr, ur])
    tris[1::2] = np.column_stack([ll, ur, ul])

    used, inverse = np.unique(tris.ravel(), return_inverse=True)
    tris = inverse.reshape(-1, 3)
    vj, vi = np.divmod(used, nx + 1)
    vertices = np.column_stack([x0 + vi / n, y0 + vj / n])

    edges = np.stack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]], axis=1).reshape(-1, 2)
    edges = np.sort(edges, axis=1)
    facets, edge_to_facet = np.unique(edges, axis=0, return_inverse=True)
    edge_to_facet = edge_to_facet.ravel()
    tri_facets = edge_to_facet.reshape(-1, 3)

    owner = np.repeat(np.arange(len(tris)), 3)
    order = np.lexsort((owner, edge_to_facet))
    sorted_f = edge_to_facet[order]
    sorted_t = owner[order]
    facet_cells = -np.ones((len(facets), 2), dtype=np.int64)
    first = np.r_[True, sorted_f[1:] != sorted_f[:-1]]
    facet_cells[sorted_f[first], 0] = sorted_t[first]
    facet_cells[sorted_f[~first], 1] = sorted_t[~first]

    region = np.zeros(len(tris), dtype=np.int64)
    if shape.layers is not None:
        count, axis = shape.layers
        c = vertices[tris].mean(axis=1)
        if axis == "y":
            region = np.floor((c[:, 1] - y0) / (y1 - y0) * count).astype(np.int64)
        else:
            region = np.floor((c[:, 0] - x0) / (x1 - x0) * count).astype(np.int64)

    mesh = Mesh(
        vertices=vertices,
        triangles=tris,
        facets=facets,
        facet_cells=facet_cells,
        triangle_facets=tri_facets,
        region=region,
        shape=shape,
        resolution=n,
    )
    return tag_boundary(mesh, shape)


def _side_labels(mesh: Mesh, facets: np.ndarray) -> list[str]:
    n = mesh.facet_normals[facets] * mesh.outward_sign(facets, mesh.facet_cells[facets, 0])[:, None]
    labels = []
    for nx_, ny_ in n:
        if nx_ < -0.5:
            labels.append("left")
        elif nx_ > 0.5:
            labels.append("right")
        elif ny_ < -0.5:
            labels.append("bottom")
        else:
            labels.append("top")
    return labels


def tag_boundary(mesh: Mesh, shape: DomainShape) -> Mesh:
    """Return a copy of ``mesh`` whose boundary facets carry ``shape``'s tags.

    Rules:
      * ``sides``: left/right/bottom/top from the outward normal;
      * ``cavity``: ``lid`` on y = 1, ``wall`` elsewhere;
      * ``l_clamp``: ``dirichlet`` on x = -1 and on the top/bottom edges with
        x < 0, ``neumann`` elsewhere;
      * ``beam_clamp``: ``dirichlet`` on x = 0, ``neumann`` elsewhere;
      * ``t_inflow``: ``inflow`` on x = 0, ``outflow`` on x = 1.5, ``wall``
        elsewhere.
    """
    bf = mesh.boundary_facets
    mid = mesh.facet_midpoints[bf]
    x, y = mid[:, 0], mid[:, 1]
    x0, y0, x1, y1 = shape.bbox
    close = lambda a, b: np.abs(a - b) < _GEOM_TOL  # noqa: E731
    rule = shape.boundary_rule
    if rule == "sides":
        labels = _side_labels(mesh, bf)
    elif rule == "cavity":
        labels = np.where(close(y, y1), "lid", "wall")
    elif rule == "l_clamp":
        if shape.kind != "l_shape":
            raise MeshError("l_clamp rule needs the l_shape domain")
        d = close(x, -1.0) | ((close(y, 1.0) | close(y, -1.0)) & (x < 0))
        labels = np.where(d, "dirichlet", "neumann")
    elif rule == "beam_clamp":
        labels = np.where(close(x, x0), "dirichlet", "neumann")
    else:
        if shape.kind != "t_shape":
            raise MeshError("t_inflow rule needs the t_shape domain")
        labels = np.where(close(x, 0.0), "inflow", np.where(close(x, 1.5), "outflow", "wall"))
    tags = {int(f): str(lab) for f, lab in zip(bf, labels)}
    if len(tags) != len(bf):
        raise MeshError("untaggable boundary facet")
    return dataclasses.replace(mesh, boundary_tags=tags, shape=shape)


def write_mesh(mesh: Mesh) -> str:
    """Plain-text dump: a header line then one entity per line."""
    lines = [f"vertices {mesh.n_vertices} / triangles {mesh.n_triangles} / facets {mesh.n_facets}"]
    lines += [f"v {x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines += [f"t {a} {b} {c} {r}" for (a, b, c), r in zip(mesh.triangles, mesh.region)]
    for f, ((a, b), (k1, k2)) in enumerate(zip(mesh.facets, mesh.facet_cells)):
        lines.append(f"f {a} {b} {k1} {k2} {mesh.boundary_tags.get(f, '-')}")
    return "\n".join(lines) + "\n"


def read_mesh(text: str) -> Mesh:
    rows = text.strip().splitlines()
    verts, tris, regs, facets, cells, tags = [], [], [], [], [], {}
    for line in rows[1:]:
        parts = line.split()
        if parts[0] == "v":
            verts.append((float(parts[1]), float(parts[2])))
        elif parts[0] == "t":
            tris.append(tuple(int(p) for p in parts[1:4]))
            regs.append(int(parts[4]))
        elif parts[0] == "f":
            facets.append((int(parts[1]), int(parts[2])))
            cells.append((int(parts[3]), int(parts[4])))
            if parts[5] != "-":
                tags[len(facets) - 1] = parts[5]
    facets_arr = np.array(facets, dtype=np.int64)
    lookup = {tuple(f): i for i, f in enumerate(facets)}
    tris_arr = np.array(tris, dtype=np.int64)
    tf = np.array(
        [[lookup[tuple(sorted((t[i], t[(i + 1) % 3])))] for i in range(3)] for t in tris_arr],
        dtype=np.int64,
    )
    return Mesh(
        vertices=np.array(verts),
        triangles=tris_arr,
        facets=facets_arr,
        facet_cells=np.array(cells, dtype=np.int64),
        triangle_facets=tf,
        region=np.array(regs, dtype=np.int64),
        boundary_tags=tags,
    )
