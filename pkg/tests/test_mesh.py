import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ddlab.mesh import DomainShape, MeshError, build_structured_mesh, read_mesh, write_mesh

SHAPES = [
    DomainShape("unit_square"),
    DomainShape("rectangle", width=5.0, height=1.0, layers=(10, "y"), boundary_rule="beam_clamp"),
    DomainShape("l_shape", boundary_rule="l_clamp"),
    DomainShape("t_shape", boundary_rule="t_inflow"),
]


@pytest.mark.parametrize("shape", SHAPES, ids=lambda s: s.kind)
def test_area_orientation_and_tags(shape):
    n = 10 if shape.layers else 4
    mesh = build_structured_mesh(shape, n)
    assert np.all(mesh.signed_areas > 0)
    assert mesh.signed_areas.sum() == pytest.approx(shape.area, rel=1e-12)
    # every boundary facet is tagged, no interior facet is
    assert set(mesh.boundary_tags) == set(mesh.boundary_facets.tolist())
    # Euler characteristic of a simply connected planar triangulation
    assert mesh.n_vertices - mesh.n_facets + mesh.n_triangles == 1


def test_counts_on_unit_square():
    mesh = build_structured_mesh(DomainShape(), 3)
    assert (mesh.n_vertices, mesh.n_triangles, mesh.n_facets) == (16, 18, 33)
    assert mesh.h == pytest.approx(np.sqrt(2) / 3)


def test_facet_normals_are_unit_and_outward_on_boundary():
    mesh = build_structured_mesh(DomainShape("l_shape", boundary_rule="l_clamp"), 3)
    n = mesh.facet_normals
    assert np.allclose(np.linalg.norm(n, axis=1), 1.0)
    bf = mesh.boundary_facets
    cells = mesh.facet_cells[bf, 0]
    outward = n[bf] * mesh.outward_sign(bf, cells)[:, None]
    d = mesh.facet_midpoints[bf] - mesh.centroids[cells]
    assert np.all(np.einsum("ij,ij->i", outward, d) > 0)


def test_beam_layers_alternate():
    mesh = build_structured_mesh(SHAPES[1], 10)
    y = mesh.centroids[:, 1]
    assert np.array_equal(mesh.region, np.floor(y * 10).astype(int))


def test_beam_rejects_resolution_incompatible_with_layers():
    with pytest.raises(MeshError):
        build_structured_mesh(SHAPES[1], 3)


def test_unknown_shape():
    with pytest.raises(MeshError):
        DomainShape("circle")


@settings(max_examples=10, deadline=None)
@given(st.sampled_from(SHAPES[::2]), st.integers(1, 5))
def test_write_read_round_trip(shape, n):
    mesh = build_structured_mesh(shape, n)
    back = read_mesh(write_mesh(mesh))
    assert np.array_equal(back.vertices, mesh.vertices)
    assert np.array_equal(back.triangles, mesh.triangles)
    assert np.array_equal(back.facets, mesh.facets)
    assert np.array_equal(back.facet_cells, mesh.facet_cells)
    assert np.array_equal(back.triangle_facets, mesh.triangle_facets)
    assert back.boundary_tags == mesh.boundary_tags
