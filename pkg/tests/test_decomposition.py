import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from scipy.sparse.csgraph import connected_components

from ddlab.decomposition import (
    BALANCE_BAND,
    PU_BITS,
    DecompositionError,
    decompose,
    expand_overlap,
    partition_elements,
)
from conftest import make_disc

CASES = [("cavity", "th", 2, 6), ("cavity", "hdg", 1, 6), ("l_shape_elasticity", "th", 3, 4),
         ("t_shape", "hdg", 1, 4)]


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(CASES), st.integers(1, 8), st.integers(0, 2), st.sampled_from(["smooth", "boolean"]))
def test_partition_of_unity_is_exact(case, N, overlap, pu):
    name, scheme, k, n = case
    disc = make_disc(name, n, scheme, k)
    D = decompose(disc.space, N, overlap, augmented=disc.augmented, pu=pu)
    assert D.partition_of_unity_is_exact()
    x = np.random.default_rng(N).standard_normal(D.ndofs)
    total = sum(D.restriction(i).T @ (D.pu_weights[i] * (D.restriction(i) @ x)) for i in range(N))
    assert np.allclose(total, x, rtol=0, atol=1e-15 * np.abs(x).max() * N)
    for w in D.pu_numerators:
        assert w.min() >= 0 and w.max() <= D.pu_scale


def test_smooth_weights_are_integers_over_power_of_two():
    disc = make_disc("cavity", 6)
    D = decompose(disc.space, 4, 2, augmented=True)
    assert D.pu_scale == 1 << PU_BITS
    assert all(w.dtype.kind == "i" for w in D.pu_numerators)
    # fractional weights appear inside the overlap
    frac = np.concatenate([(w > 0) & (w < D.pu_scale) for w in D.pu_numerators])
    assert frac.any()


def test_smooth_weights_vanish_on_the_outer_boundary_of_the_overlap():
    disc = make_disc("cavity", 8, "th", 2)
    space = disc.space
    D = decompose(space, 4, 2, augmented=False)
    for i in range(4):
        elems = D.overlapped_elements[i]
        inside = np.zeros(disc.mesh.n_triangles, bool)
        inside[elems] = True
        # velocity nodes on facets between the overlapped set and the rest
        fc = disc.mesh.facet_cells
        edge = np.flatnonzero((fc[:, 1] >= 0) & (inside[fc[:, 0]] != inside[np.maximum(fc[:, 1], 0)]))
        nodes = np.unique(space.facet_nodes[edge])
        dofs = space.velocity_pair(nodes).ravel()
        w = dict(zip(D.dof_sets[i].tolist(), D.pu_numerators[i].tolist()))
        assert all(w[d] == 0 for d in dofs)


def test_boolean_weights_pick_one_owner():
    disc = make_disc("cavity", 6, "hdg", 1)
    D = decompose(disc.space, 4, 1, augmented=True, pu="boolean")
    assert D.pu_scale == 1
    assert all(set(np.unique(w).tolist()) <= {0, 1} for w in D.pu_numerators)
    aug = [w[-1] for w in D.pu_numerators]
    assert aug == [1, 0, 0, 0]


def test_restriction_is_a_selection():
    disc = make_disc("cavity", 4)
    D = decompose(disc.space, 3, 1, augmented=True)
    for i in range(3):
        R = D.restriction(i)
        assert R.shape == (len(D.dof_sets[i]), disc.ndofs)
        assert abs(R @ R.T - sp.identity(R.shape[0])).max() == 0
        assert D.dof_sets[i][-1] == disc.aug_index


@pytest.mark.parametrize("N", [2, 3, 4, 7, 8, 16])
def test_graph_partition_is_balanced_and_connected(N):
    disc = make_disc("l_shape_elasticity", 8, "th", 2)
    mesh = disc.mesh
    owner = partition_elements(mesh, N)
    counts = np.bincount(owner, minlength=N)
    assert counts.min() > 0 and counts.max() <= BALANCE_BAND * counts.min()
    adj = mesh.facet_cells[mesh.facet_cells[:, 1] >= 0]
    for p in range(N):
        idx = np.flatnonzero(owner == p)
        keep = (owner[adj[:, 0]] == p) & (owner[adj[:, 1]] == p)
        g2l = -np.ones(mesh.n_triangles, int)
        g2l[idx] = np.arange(len(idx))
        e = g2l[adj[keep]]
        G = sp.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(len(idx), len(idx)))
        assert connected_components(G, directed=False)[0] == 1


def test_partition_is_deterministic():
    mesh = make_disc("t_shape", 6).mesh
    assert np.array_equal(partition_elements(mesh, 8), partition_elements(mesh, 8))


def test_uniform_grid_quadrants():
    mesh = make_disc("cavity", 4).mesh
    owner = partition_elements(mesh, 4, "uniform_grid")
    c = mesh.centroids
    expect = (c[:, 0] > 0.5).astype(int) + 2 * (c[:, 1] > 0.5).astype(int)
    assert np.array_equal(owner, expect)


@settings(max_examples=10, deadline=None)
@given(st.integers(2, 6), st.integers(0, 3))
def test_overlap_layers_are_nested(N, layers):
    mesh = make_disc("cavity", 6).mesh
    owner = partition_elements(mesh, N)
    inner = expand_overlap(mesh, owner, layers)
    outer = expand_overlap(mesh, owner, layers + 1)
    base = expand_overlap(mesh, owner, 0)
    for p in range(N):
        assert np.array_equal(base[p], np.flatnonzero(owner == p))
        assert set(inner[p]) <= set(outer[p])


def test_errors():
    disc = make_disc("cavity", 2)
    with pytest.raises(DecompositionError):
        partition_elements(disc.mesh, 100)
    with pytest.raises(DecompositionError):
        partition_elements(disc.mesh, 2, "metis")
    with pytest.raises(DecompositionError):
        partition_elements(disc.mesh, 0)
    with pytest.raises(DecompositionError):
        decompose(disc.space, 2, pu="multiplicity")
    with pytest.raises(DecompositionError):
        expand_overlap(disc.mesh, np.zeros(disc.mesh.n_triangles, int), -1)
