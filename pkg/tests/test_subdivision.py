import numpy as np
import pytest

from wrapnet.mesh import Mesh, MeshError, unique_edges, validate_manifold
from wrapnet.subdivision import (from_fine, hierarchy_connectivity, lift_matching, loop_subdivide, pool_faces,
                                 subdivide_connectivity, unpool_faces)
from wrapnet.synthetic import icosahedron, tetrahedron, torus


@pytest.mark.parametrize("make", [tetrahedron, icosahedron, lambda: torus(5, 3)])
def test_counts_and_euler(make):
    mesh = make()
    sub = loop_subdivide(mesh, 3)
    chi = mesh.euler_characteristic()
    for lo, hi in zip(sub.levels[:-1], sub.levels[1:]):
        E = len(unique_edges(lo.triangles))
        assert hi.n_vertices == lo.n_vertices + E
        assert hi.n_faces == 4 * lo.n_faces
        assert hi.euler_characteristic() == chi
        assert validate_manifold(hi).ok


def test_single_split_layout():
    tri = np.array([[0, 1, 2], [0, 2, 3], [0, 3, 1], [1, 3, 2]])
    kids, edges = subdivide_connectivity(tri, 4)
    assert edges.tolist() == [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]]
    # face 0 = (0, 1, 2): ab = 4 + rank(0,1) = 4, bc = 4 + rank(1,2) = 7, ca = 4 + rank(0,2) = 5
    assert kids[:4].tolist() == [[0, 4, 5], [4, 1, 7], [5, 7, 2], [4, 7, 5]]


def test_parent_recovered_from_children():
    # corner k of child k is corner k of the parent, so pooling the connectivity is exact
    mesh = torus(6, 4)
    tris, _, counts = hierarchy_connectivity(mesh.triangles, mesh.n_vertices, 2)
    for lv in range(2):
        kids = tris[lv + 1].reshape(-1, 4, 3)
        parent = np.stack([kids[:, 0, 0], kids[:, 1, 1], kids[:, 2, 2]], axis=1)
        assert np.array_equal(parent, tris[lv])
        assert counts[lv + 1] > counts[lv]


def test_midpoint_positions():
    mesh = icosahedron()
    sub = loop_subdivide(mesh, 1)
    e = sub.edges[0]
    np.testing.assert_array_equal(sub.fine.positions[12:], 0.5 * (mesh.positions[e[:, 0]] + mesh.positions[e[:, 1]]))
    np.testing.assert_array_equal(sub.fine.positions[:12], mesh.positions)


def test_pool_unpool():
    rng = np.random.default_rng(0)
    f = rng.normal(size=(5, 3))
    sub = loop_subdivide(tetrahedron(), 1)
    np.testing.assert_array_equal(pool_faces(unpool_faces(f[:4]), sub.child_map(0)), f[:4])
    child = rng.normal(size=(16, 3))
    np.testing.assert_allclose(pool_faces(child, sub.child_map(0)), child.reshape(4, 4, 3).mean(axis=1),
                               rtol=1e-15)
    with pytest.raises(ValueError):
        pool_faces(child[:5], sub.child_map(0))


def test_from_fine_round_trip_and_rejection():
    mesh = torus(5, 3)
    sub = loop_subdivide(mesh, 2)
    again = from_fine(mesh.triangles, sub.fine, 2)
    assert all(a == b for a, b in zip(again.levels, sub.levels))
    with pytest.raises(MeshError):
        from_fine(mesh.triangles, sub.levels[1], 2)


def test_lift_matching_tracks_positions():
    # relabel the base, subdivide both; the lifted map must send each fine vertex to the same point
    mesh = icosahedron()
    rng = np.random.default_rng(3)
    sigma = rng.permutation(12)
    pos = np.empty_like(mesh.positions)
    pos[sigma] = mesh.positions
    src = loop_subdivide(mesh, 2)
    dst = loop_subdivide(Mesh(pos, sigma[mesh.triangles]), 2)
    for lv in range(3):
        lifted = lift_matching(sigma, src, lv)
        assert sorted(lifted.tolist()) == list(range(src.levels[lv].n_vertices))
        np.testing.assert_array_equal(dst.levels[lv].positions[lifted], src.levels[lv].positions)


def test_negative_levels():
    with pytest.raises(ValueError):
        loop_subdivide(tetrahedron(), -1)
