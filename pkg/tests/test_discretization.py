import io
from math import factorial

import numpy as np
import pytest
import scipy.io
from hypothesis import given, settings, strategies as st

from ddlab.discretization import (
    PRESSURE,
    AssemblyError,
    Discretization,
    FacetProjection,
    SpaceError,
    build_space,
    write_matrix_market,
)
from ddlab.discretization import hdg, lagrange
from ddlab.discretization.quadrature import gauss_segment, gauss_triangle
from ddlab.mesh import DomainShape, build_structured_mesh
from manufactured import SQUARE, stokes_solution
from conftest import make_disc


@given(st.integers(0, 8), st.integers(0, 8))
def test_triangle_rule_is_exact(a, b):
    pts, w = gauss_triangle(a + b)
    exact = factorial(a) * factorial(b) / factorial(a + b + 2)
    assert w @ (pts[:, 0] ** a * pts[:, 1] ** b) == pytest.approx(exact, rel=1e-12)


@given(st.integers(0, 15))
def test_segment_rule_is_exact(d):
    s, w = gauss_segment(d)
    assert w @ s ** d == pytest.approx(1.0 / (d + 1), rel=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_lagrange_basis_is_nodal(k):
    nodes = lagrange.reference_nodes(k)
    assert len(nodes) == (k + 1) * (k + 2) // 2
    vals, grads = lagrange.evaluate(k, nodes)
    assert np.allclose(vals, np.eye(len(nodes)), atol=1e-12)
    pts, _ = gauss_triangle(4)
    vals, grads = lagrange.evaluate(k, pts)
    assert np.allclose(vals.sum(axis=1), 1.0)
    assert np.allclose(grads.sum(axis=1), 0.0, atol=1e-11)


@pytest.mark.parametrize("scheme,k,expect", [
    # n = 3 unit square: 16 vertices, 33 facets, 18 triangles
    ("th", 2, (2 * 49, 16, 0)),
    ("th", 3, (2 * 100, 49, 0)),
    ("hdg", 1, (2 * 33, 18, 33)),
])
def test_space_counts(scheme, k, expect):
    space = build_space(build_structured_mesh(DomainShape(), 3), scheme, k)
    assert (space.n_velocity, space.n_pressure, space.n_multiplier) == expect
    assert space.ndofs == sum(expect)
    assert np.array_equal(space.pressure_dofs, np.flatnonzero(space.dof_block == PRESSURE))


@pytest.mark.parametrize("scheme,k", [("th", 1), ("th", 4), ("hdg", 2), ("dg", 1)])
def test_space_rejects(scheme, k):
    with pytest.raises(SpaceError):
        build_space(build_structured_mesh(DomainShape(), 2), scheme, k)


def test_bdm_moments_are_dual():
    mesh = build_structured_mesh(DomainShape("l_shape", boundary_rule="l_clamp"), 2)
    bdm = hdg.BDM1(mesh)
    s, w = gauss_segment(6)
    q = hdg.edge_moments(s)
    cells = np.arange(mesh.n_triangles)
    for i in range(3):
        f = mesh.triangle_facets[:, i]
        phi = bdm.values(cells, hdg.facet_points(mesh, f, s))  # (nT, nq, 6, 2)
        moments = np.einsum("q,qj,tqbi,ti->tjb", w, q, phi, mesh.facet_normals[f])
        # moment j on local facet i picks out basis function 2i + j
        expect = np.eye(6)[2 * i:2 * i + 2]
        assert np.allclose(moments, expect[None], atol=1e-12)


def test_hdg_velocity_is_normally_continuous(rng):
    disc = make_disc("cavity", 3, "hdg", 1)
    mesh = disc.mesh
    U = rng.standard_normal(disc.ndofs)
    s, _ = gauss_segment(4)
    interior = np.flatnonzero(mesh.facet_cells[:, 1] >= 0)
    x = hdg.facet_points(mesh, interior, s)
    n = mesh.facet_normals[interior]
    sides = []
    for side in (0, 1):
        cells = mesh.facet_cells[interior, side]
        phi = disc.bdm.values(cells, x)
        u = np.einsum("tqbi,tb->tqi", phi, U[disc.space.element_dofs[cells, :6]])
        sides.append(np.einsum("tqi,ti->tq", u, n))
    assert np.allclose(sides[0], sides[1], atol=1e-12)


def test_facet_projection_of_constant_and_linear():
    proj = FacetProjection(0, length=0.3)
    assert np.allclose(proj.project(lambda s: np.full_like(s, 2.5))(np.linspace(0, 1, 5)), 2.5)
    # the mean of a linear function
    assert np.allclose(proj.project(lambda s: 4 * s)(np.array([0.2])), 2.0)
    assert np.allclose(FacetProjection(1).project(lambda s: 4 * s - 1)(np.array([0.1, 0.9])), [-0.6, 2.6])


@pytest.mark.parametrize("case,scheme,k", [
    ("cavity", "th", 2), ("cavity", "hdg", 1), ("l_shape_elasticity", "th", 3), ("l_shape_elasticity", "hdg", 1),
])
def test_global_system_structure(case, scheme, k):
    disc = make_disc(case, 4, scheme, k)
    system = disc.assemble()
    A = system.A
    assert abs(A - A.T).max() <= 1e-10 * abs(A).max()
    # constrained rows are identity rows carrying the boundary data
    c = system.constrained
    gd, gv = disc.dirichlet
    assert set(gd.tolist()) <= set(system.dofs[c].tolist())
    assert np.allclose(A.diagonal()[c], 1.0)
    assert A[c].nnz == len(c)
    lookup = dict(zip(gd.tolist(), gv.tolist()))
    assert np.allclose(system.F[c], [lookup.get(int(d), 0.0) for d in system.dofs[c]])


@pytest.mark.parametrize("scheme,k", [("th", 2), ("hdg", 1)])
def test_pressure_augmentation_row_integrates_pressure(scheme, k):
    disc = make_disc("cavity", 3, scheme, k)
    assert disc.augmented
    system = disc.assemble()
    aug = system.size - 1
    row = system.A[aug].toarray().ravel()
    # the row is int q_h for every pressure basis function; they sum to |Omega|
    assert row[disc.space.pressure_dofs].sum() == pytest.approx(1.0, rel=1e-12)
    assert np.count_nonzero(row[: disc.space.ndofs][disc.space.dof_block != PRESSURE]) == 0
    if scheme == "hdg":
        assert np.allclose(row[disc.space.pressure_dofs], 1.0 / disc.mesh.n_triangles)


def test_elasticity_is_not_augmented():
    assert not make_disc("l_shape_elasticity", 2).augmented


def test_single_subdomain_inherit_matches_global():
    disc = make_disc("t_shape", 2)
    a, b = disc.assemble(), disc.assemble(np.arange(disc.mesh.n_triangles), interface="inherit")
    assert abs(a.A - b.A).max() == 0.0
    assert np.array_equal(a.F, b.F)


def test_assembly_rejects_bad_input():
    disc = make_disc("cavity", 2)
    with pytest.raises(AssemblyError):
        disc.assemble(np.array([], dtype=int))
    with pytest.raises(AssemblyError):
        disc.assemble(interface="periodic")


def test_manufactured_solution_is_resolved():
    problem, exact = stokes_solution()
    disc = Discretization(build_space(build_structured_mesh(SQUARE, 8), "th", 2), problem)
    system = disc.assemble()
    from ddlab.solvers import factorize

    U = factorize(system.A).solve(system.F)
    assert disc.velocity_l2_error(U, exact) < 1e-4


@settings(max_examples=5, deadline=None)
@given(st.integers(2, 4))
def test_matrix_market_round_trip(n):
    A = make_disc("cavity", n, "hdg", 1).assemble().A
    back = scipy.io.mmread(io.StringIO(write_matrix_market(A))).tocsr()
    assert abs(back - A).max() == 0.0
